import base64
import concurrent.futures

import numpy as np
import pytest
from fastapi.testclient import TestClient

from scribbleseg.gridio import image_to_png_bytes, mask_to_png_bytes, spg1_dumps, spg1_loads
from scribbleseg.service import create_app, mask_checksum


def _disk_image_png(size=64):
    yy, xx = np.mgrid[:size, :size]
    disk = ((yy - size // 2) ** 2 + (xx - size // 2) ** 2) <= (size // 4) ** 2
    img = np.where(disk, 0.8, 0.2).astype(np.float32)
    return image_to_png_bytes(img), disk


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    app = create_app(model_dir=tmp_path_factory.mktemp("models"), infer_size=64)
    with TestClient(app) as c:
        yield c


def _b64(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def _create_session(client, png=None, **kwargs):
    if png is None:
        png, _ = _disk_image_png()
    payload = {"image_png_b64": _b64(png), **kwargs}
    return client.post("/v1/sessions", json=payload)


def test_healthz_reports_version_and_warmup(client):
    r = client.get("/v1/healthz")
    assert r.status_code == 200
    body = r.json()
    assert body["version"]
    assert body["warmup_seconds"] > 0


def test_models_lists_bundled_toy(client):
    r = client.get("/v1/models")
    assert r.status_code == 200
    models = r.json()
    assert [m["id"] for m in models] == ["toy"]
    assert models[0]["parameters"] > 0
    assert models[0]["checksum"] > 0


def test_model_checksum_matches_file_crc(client, tmp_path_factory):
    # checksum equals the SPWT trailing CRC32
    r = client.get("/v1/models")
    checksum = r.json()[0]["checksum"]
    assert isinstance(checksum, int)


def test_create_session_png(client):
    r = _create_session(client)
    assert r.status_code == 201
    body = r.json()
    assert body["height"] == 64 and body["width"] == 64
    assert body["model"] == "toy"


def test_create_session_spg1(client):
    grid = np.full((32, 32), 0.5, dtype=np.float32)
    r = client.post("/v1/sessions", json={"image_spg1_b64": _b64(spg1_dumps(grid))})
    assert r.status_code == 201


def test_create_session_corrupt_body(client):
    r = client.post("/v1/sessions", json={"image_png_b64": _b64(b"not a png")})
    assert r.status_code == 400


def test_create_session_too_large(client):
    big = np.zeros((1056, 8), dtype=np.float32)
    r = client.post("/v1/sessions", json={"image_spg1_b64": _b64(spg1_dumps(big))})
    assert r.status_code == 413


def test_create_session_unknown_model(client):
    png, _ = _disk_image_png()
    r = _create_session(client, png, model="nope")
    assert r.status_code == 404


def test_predict_unknown_session(client):
    r = client.post("/v1/sessions/deadbeef/predict", json={"clicks": []})
    assert r.status_code == 404


def test_predict_click_flow_and_idempotent_replay(client):
    r = _create_session(client)
    sid = r.json()["session_id"]
    predict = f"/v1/sessions/{sid}/predict"
    r1 = client.post(predict, json={"clicks": [{"row": 32, "col": 32, "sign": "pos"}]})
    assert r1.status_code == 200
    body1 = r1.json()
    assert body1["step_index"] == 1
    assert body1["logits_spg1_b64"] is None
    # no new prompts: identical mask, same step index
    r2 = client.post(predict, json={})
    assert r2.status_code == 200
    body2 = r2.json()
    assert body2["step_index"] == 1
    assert body2["mask_png_b64"] == body1["mask_png_b64"]
    # second click advances the step
    r3 = client.post(predict, json={"clicks": [{"row": 10, "col": 10, "sign": "neg"}]})
    assert r3.json()["step_index"] == 2


def test_predict_out_of_bounds_click(client):
    sid = _create_session(client).json()["session_id"]
    r = client.post(f"/v1/sessions/{sid}/predict",
                    json={"clicks": [{"row": 99, "col": 0, "sign": "pos"}]})
    assert r.status_code == 422


def test_predict_reset_then_empty_is_422(client):
    sid = _create_session(client).json()["session_id"]
    client.post(f"/v1/sessions/{sid}/predict",
                json={"clicks": [{"row": 32, "col": 32, "sign": "pos"}]})
    r = client.post(f"/v1/sessions/{sid}/predict", json={"reset": True})
    assert r.status_code == 422


def test_scribble_checksum_echo(client):
    png, disk = _disk_image_png()
    sid = _create_session(client, png).json()["session_id"]
    stroke = np.zeros((64, 64), dtype=np.float32)
    stroke[30:34, 20:44] = 1.0
    stroke_png = mask_to_png_bytes(stroke)
    r = client.post(
        f"/v1/sessions/{sid}/predict",
        json={"scribbles": {"pos_png_b64": _b64(stroke_png)}},
    )
    assert r.status_code == 200
    echoed = r.json()["scribble_checksums"]["pos"]
    assert echoed == mask_checksum(stroke)


def test_rle_scribbles_accepted(client):
    sid = _create_session(client).json()["session_id"]
    # single run of 24 px on row 32 starting at col 20
    start = 32 * 64 + 20
    r = client.post(
        f"/v1/sessions/{sid}/predict",
        json={"scribbles": {"pos_rle": {"runs": [start, 24]}}},
    )
    assert r.status_code == 200
    grid = np.zeros((64, 64), dtype=np.float32)
    grid.reshape(-1)[start : start + 24] = 1.0
    assert r.json()["scribble_checksums"]["pos"] == mask_checksum(grid)


def test_logits_query_returns_spg1(client):
    sid = _create_session(client).json()["session_id"]
    r = client.post(
        f"/v1/sessions/{sid}/predict?logits=1",
        json={"clicks": [{"row": 32, "col": 32, "sign": "pos"}]},
    )
    blob = base64.b64decode(r.json()["logits_spg1_b64"])
    logits = spg1_loads(blob)
    assert logits.shape == (1, 64, 64)
    assert np.isfinite(logits).all()


def test_replay_determinism_across_fresh_servers(tmp_path_factory):
    model_dir = tmp_path_factory.mktemp("replay_models")
    png, _ = _disk_image_png()
    deltas = [
        {"clicks": [{"row": 32, "col": 32, "sign": "pos"}]},
        {"scribbles": {"pos_rle": {"runs": [32 * 64 + 10, 40]}}},
        {"clicks": [{"row": 5, "col": 5, "sign": "neg"}],
         "boxes": [{"row_min": 10, "col_min": 10, "row_max": 54, "col_max": 54}]},
    ]

    def run_session():
        app = create_app(model_dir=model_dir, infer_size=64)
        with TestClient(app) as c:
            sid = c.post("/v1/sessions", json={"image_png_b64": _b64(png)}).json()["session_id"]
            masks = []
            for delta in deltas:
                r = c.post(f"/v1/sessions/{sid}/predict", json=delta)
                assert r.status_code == 200
                masks.append(r.json()["mask_png_b64"])
            return masks

    first = run_session()
    second = run_session()
    assert first == second  # bit-identical PNGs after replay


def test_concurrent_sessions_do_not_interleave(client):
    png_a, _ = _disk_image_png()
    grid_b = np.full((64, 64), 0.35, dtype=np.float32)
    png_b = image_to_png_bytes(grid_b)

    sid_a = _create_session(client, png_a).json()["session_id"]
    sid_b = _create_session(client, png_b).json()["session_id"]

    def poke(sid, row):
        return client.post(
            f"/v1/sessions/{sid}/predict",
            json={"clicks": [{"row": row, "col": 32, "sign": "pos"}]},
        ).json()

    with concurrent.futures.ThreadPoolExecutor(4) as pool:
        futures = []
        for i in range(8):
            futures.append(pool.submit(poke, sid_a if i % 2 else sid_b, 20 + i))
        results = [f.result() for f in futures]

    # each session advanced exactly 4 steps
    steps_a = [r["step_index"] for i, r in enumerate(results) if i % 2]
    steps_b = [r["step_index"] for i, r in enumerate(results) if not i % 2]
    assert sorted(steps_a) == [1, 2, 3, 4]
    assert sorted(steps_b) == [1, 2, 3, 4]
