"""Session-based interactive segmentation service.

JSON over HTTP under /v1. Images arrive as base64 PNG or SPG1; scribbles
cross the wire as sign-separated PNG masks or run-length lists; masks
come back as base64 PNG (binary + soft), with raw logits available via
?logits=1. Sessions keep the full prompt history so any final mask can be
reproduced by replaying the deltas on a fresh server.
"""

from __future__ import annotations

import base64
import binascii
import os
import threading
import time
import uuid
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from . import __version__
from .grids import (
    BoundingBox,
    Click,
    Image2D,
    InteractionSet,
    PredictionLogits,
    ScribbleMap,
)
from .gridio import (
    image_to_png_bytes,
    load_image_png,
    mask_to_png_bytes,
    spg1_dumps,
    spg1_loads,
)
from .nn.unet import Predictor, UNetWeights
from .nn.weights_io import load_weights, save_weights, weights_crc
from .rng import SeededRng

MAX_SIDE = 1024
DEFAULT_TOY_WIDTH = 32


class ClickIn(BaseModel):
    row: int
    col: int
    sign: str = Field(pattern="^(pos|neg)$")


class BoxIn(BaseModel):
    row_min: int
    col_min: int
    row_max: int
    col_max: int


class RleMask(BaseModel):
    """Row-major foreground runs: [start, length, start, length, ...]."""

    runs: list[int] = Field(default_factory=list)


class ScribblesIn(BaseModel):
    pos_png_b64: str | None = None
    neg_png_b64: str | None = None
    pos_rle: RleMask | None = None
    neg_rle: RleMask | None = None


class CreateSessionRequest(BaseModel):
    image_png_b64: str | None = None
    image_spg1_b64: str | None = None
    model: str | None = None


class CreateSessionResponse(BaseModel):
    session_id: str
    height: int
    width: int
    model: str


class PredictRequest(BaseModel):
    clicks: list[ClickIn] = Field(default_factory=list)
    scribbles: ScribblesIn | None = None
    boxes: list[BoxIn] = Field(default_factory=list)
    reset: bool = False


class LogitsStats(BaseModel):
    min: float
    max: float
    mean: float


class PredictResponse(BaseModel):
    step_index: int
    mask_png_b64: str
    soft_mask_png_b64: str
    logits_stats: LogitsStats
    scribble_checksums: dict[str, int]
    logits_spg1_b64: str | None = None


class ModelInfo(BaseModel):
    id: str
    checksum: int
    width: int
    parameters: int


class HealthResponse(BaseModel):
    version: str
    models: int
    warmup_seconds: float


@dataclass
class Session:
    id: str
    image: Image2D
    model_id: str
    deltas: list[InteractionSet] = field(default_factory=list)
    interactions: InteractionSet = field(default_factory=InteractionSet)
    last_logits: PredictionLogits | None = None
    last_response: dict | None = None
    step_index: int = 0
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)


def mask_checksum(arr: np.ndarray) -> int:
    """CRC32 of the mask quantized to uint8 (val*255, row-major)."""
    raw = np.clip(np.rint(np.asarray(arr, dtype=np.float32) * 255.0), 0, 255).astype(np.uint8)
    return zlib.crc32(raw.tobytes(order="C"))


def _decode_b64(data: str, what: str) -> bytes:
    try:
        return base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError) as err:
        raise HTTPException(400, f"invalid base64 in {what}: {err}") from err


def _rle_to_grid(rle: RleMask, shape: tuple[int, int]) -> np.ndarray:
    runs = rle.runs
    if len(runs) % 2:
        raise HTTPException(422, "run-length list must have even length")
    total = shape[0] * shape[1]
    flat = np.zeros(total, dtype=np.float32)
    for i in range(0, len(runs), 2):
        start, length = runs[i], runs[i + 1]
        if start < 0 or length < 0 or start + length > total:
            raise HTTPException(422, f"run ({start},{length}) outside grid of {total} px")
        flat[start : start + length] = 1.0
    return flat.reshape(shape)


def _png_to_scribble(data_b64: str, shape: tuple[int, int], what: str) -> np.ndarray:
    blob = _decode_b64(data_b64, what)
    try:
        from PIL import Image as PILImage
        import io as _io

        arr = np.asarray(PILImage.open(_io.BytesIO(blob)).convert("L"), dtype=np.float32)
    except Exception as err:
        raise HTTPException(400, f"cannot decode {what} as PNG: {err}") from err
    if arr.shape != shape:
        raise HTTPException(422, f"{what} shape {arr.shape} != session image {shape}")
    return arr / 255.0


class ModelRegistry:
    """SPWT files in a directory; creates a seeded toy model when empty."""

    def __init__(self, model_dir: str | Path, infer_size: int = 128):
        self.dir = Path(model_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.infer_size = infer_size
        self._lock = threading.Lock()
        self._predictors: dict[str, Predictor] = {}
        if not list(self.dir.glob("*.spwt")):
            weights = UNetWeights.initialize(SeededRng(1234), width=DEFAULT_TOY_WIDTH)
            save_weights(self.dir / "toy.spwt", weights)

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.dir.glob("*.spwt"))

    def default_id(self) -> str:
        ids = self.ids()
        if not ids:
            raise HTTPException(500, "model registry is empty")
        return ids[0]

    def info(self) -> list[ModelInfo]:
        out = []
        for model_id in self.ids():
            path = self.dir / f"{model_id}.spwt"
            predictor = self.predictor(model_id)
            out.append(
                ModelInfo(
                    id=model_id,
                    checksum=weights_crc(path),
                    width=predictor.weights.width,
                    parameters=predictor.weights.parameter_count(),
                )
            )
        return out

    def predictor(self, model_id: str) -> Predictor:
        with self._lock:
            if model_id not in self._predictors:
                path = self.dir / f"{model_id}.spwt"
                if not path.exists():
                    raise HTTPException(404, f"unknown model {model_id!r}")
                self._predictors[model_id] = Predictor(
                    load_weights(path), infer_size=self.infer_size
                )
            return self._predictors[model_id]


def create_app(
    model_dir: str | Path | None = None,
    infer_size: int = 128,
    max_sessions: int = 64,
) -> FastAPI:
    model_dir = Path(model_dir) if model_dir else Path(
        os.environ.get("SCRIBBLESEG_MODEL_DIR", "models")
    )
    registry = ModelRegistry(model_dir, infer_size=infer_size)
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    app = FastAPI(title="scribbleseg", version=__version__)

    # warm up the default model once so healthz can report real latency
    warm = registry.predictor(registry.default_id())
    t0 = time.perf_counter()
    side = min(infer_size, 128)
    warm.predict(
        Image2D(np.zeros((side, side), dtype=np.float32) + 0.5),
        InteractionSet(clicks=(Click(side // 2, side // 2, "pos"),)),
        None,
    )
    warmup_seconds = time.perf_counter() - t0

    def get_session(session_id: str) -> Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return session

    @app.get("/v1/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(
            version=__version__, models=len(registry.ids()), warmup_seconds=warmup_seconds
        )

    @app.get("/v1/models", response_model=list[ModelInfo])
    def models() -> list[ModelInfo]:
        return registry.info()

    @app.post("/v1/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session(req: CreateSessionRequest) -> CreateSessionResponse:
        if (req.image_png_b64 is None) == (req.image_spg1_b64 is None):
            raise HTTPException(400, "provide exactly one of image_png_b64 or image_spg1_b64")
        if req.image_png_b64 is not None:
            blob = _decode_b64(req.image_png_b64, "image_png_b64")
            try:
                image = load_image_png(blob)
            except Exception as err:
                raise HTTPException(400, f"cannot decode image PNG: {err}") from err
        else:
            blob = _decode_b64(req.image_spg1_b64, "image_spg1_b64")
            try:
                grid = spg1_loads(blob)
            except ValueError as err:
                raise HTTPException(400, f"cannot parse SPG1 image: {err}") from err
            if grid.shape[0] != 1:
                raise HTTPException(400, f"expected 1-channel SPG1 image, got {grid.shape[0]}")
            arr = np.clip(grid[0], 0.0, 1.0)
            try:
                image = Image2D(arr)
            except ValueError as err:
                raise HTTPException(400, f"bad image grid: {err}") from err
        if image.height > MAX_SIDE or image.width > MAX_SIDE:
            raise HTTPException(413, f"image exceeds {MAX_SIDE}^2: {image.shape}")
        model_id = req.model or registry.default_id()
        if model_id not in registry.ids():
            raise HTTPException(404, f"unknown model {model_id!r}")
        session = Session(id=uuid.uuid4().hex, image=image, model_id=model_id)
        with sessions_lock:
            if len(sessions) >= max_sessions:
                oldest = min(sessions.values(), key=lambda s: s.updated)
                del sessions[oldest.id]
            sessions[session.id] = session
        return CreateSessionResponse(
            session_id=session.id, height=image.height, width=image.width, model=model_id
        )

    def _parse_delta(req: PredictRequest, shape: tuple[int, int]) -> tuple[InteractionSet, dict]:
        pos_scribbles: list[ScribbleMap] = []
        neg_scribbles: list[ScribbleMap] = []
        checksums: dict[str, int] = {}
        if req.scribbles is not None:
            s = req.scribbles
            if s.pos_png_b64:
                grid = _png_to_scribble(s.pos_png_b64, shape, "pos scribble")
                checksums["pos"] = mask_checksum(grid)
                pos_scribbles.append(ScribbleMap(grid, "pos"))
            if s.neg_png_b64:
                grid = _png_to_scribble(s.neg_png_b64, shape, "neg scribble")
                checksums["neg"] = mask_checksum(grid)
                neg_scribbles.append(ScribbleMap(grid, "neg"))
            if s.pos_rle is not None:
                grid = _rle_to_grid(s.pos_rle, shape)
                checksums["pos"] = mask_checksum(grid)
                pos_scribbles.append(ScribbleMap(grid, "pos"))
            if s.neg_rle is not None:
                grid = _rle_to_grid(s.neg_rle, shape)
                checksums["neg"] = mask_checksum(grid)
                neg_scribbles.append(ScribbleMap(grid, "neg"))
        clicks = []
        for c in req.clicks:
            if not (0 <= c.row < shape[0] and 0 <= c.col < shape[1]):
                raise HTTPException(422, f"click ({c.row},{c.col}) outside grid {shape}")
            clicks.append(Click(c.row, c.col, c.sign))
        boxes = []
        for b in req.boxes:
            if b.row_min > b.row_max or b.col_min > b.col_max:
                raise HTTPException(422, f"degenerate box {b}")
            if not (0 <= b.row_min < shape[0] and 0 <= b.col_min < shape[1]):
                raise HTTPException(422, f"box corner outside grid {shape}")
            boxes.append(
                BoundingBox(b.row_min, b.col_min, b.row_max, b.col_max).clipped(shape)
            )
        delta = InteractionSet(
            pos_scribbles=tuple(pos_scribbles),
            neg_scribbles=tuple(neg_scribbles),
            clicks=tuple(clicks),
            boxes=tuple(boxes),
        )
        return delta, checksums

    @app.post("/v1/sessions/{session_id}/predict", response_model=PredictResponse)
    def predict(
        session_id: str, req: PredictRequest, logits: int = Query(default=0)
    ) -> PredictResponse:
        session = get_session(session_id)
        with session.lock:
            delta, checksums = _parse_delta(req, session.image.shape)
            if req.reset:
                session.deltas.clear()
                session.interactions = InteractionSet()
                session.last_logits = None
                session.last_response = None
                session.step_index = 0
            if delta.is_empty():
                if session.last_response is None:
                    raise HTTPException(
                        422, "no prompts provided and session has no history"
                    )
                # idempotent replay of the last prediction
                cached = dict(session.last_response)
                cached["scribble_checksums"] = checksums
                if not logits:
                    cached["logits_spg1_b64"] = None
                return PredictResponse(**cached)

            session.deltas.append(delta)
            session.interactions = session.interactions.merged(delta)
            predictor = registry.predictor(session.model_id)
            out = predictor.predict(session.image, session.interactions, session.last_logits)
            session.last_logits = out
            session.step_index += 1
            session.updated = time.time()

            probs = out.probabilities()
            payload = {
                "step_index": session.step_index,
                "mask_png_b64": base64.b64encode(
                    mask_to_png_bytes(out.binarized())
                ).decode("ascii"),
                "soft_mask_png_b64": base64.b64encode(
                    image_to_png_bytes(probs)
                ).decode("ascii"),
                "logits_stats": {
                    "min": float(out.data.min()),
                    "max": float(out.data.max()),
                    "mean": float(out.data.mean()),
                },
                "scribble_checksums": checksums,
                "logits_spg1_b64": base64.b64encode(spg1_dumps(out.data)).decode("ascii"),
            }
            session.last_response = payload
            response = dict(payload)
            if not logits:
                response["logits_spg1_b64"] = None
            return PredictResponse(**response)

    return app


def run_server(
    host: str = "127.0.0.1",
    port: int = 8000,
    model_dir: str | Path | None = None,
    infer_size: int = 128,
    max_sessions: int = 64,
) -> None:
    import uvicorn

    app = create_app(model_dir=model_dir, infer_size=infer_size, max_sessions=max_sessions)
    uvicorn.run(app, host=host, port=port, log_level="warning")
