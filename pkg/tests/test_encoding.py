import numpy as np
import pytest

from scribbleseg.encoding import compute_error_region, encode_model_input, rasterize_clicks
from scribbleseg.grids import (
    BinaryMask,
    BoundingBox,
    Click,
    Image2D,
    InteractionSet,
    PredictionLogits,
    ScribbleMap,
)


def test_rasterize_single_click():
    pos, neg = rasterize_clicks([Click(3, 4, "pos")], (8, 8))
    assert pos[3, 4] == 1.0 and pos.sum() == 1.0
    assert neg.sum() == 0.0


def test_rasterize_empty():
    pos, neg = rasterize_clicks([], (8, 8))
    assert pos.sum() == 0 and neg.sum() == 0


def test_rasterize_duplicates_idempotent():
    pos, _ = rasterize_clicks([Click(2, 2, "pos"), Click(2, 2, "pos")], (8, 8))
    assert pos[2, 2] == 1.0 and pos.sum() == 1.0


def test_rasterize_rejects_out_of_bounds():
    with pytest.raises(ValueError, match=r"\(9,0\)"):
        rasterize_clicks([Click(9, 0, "pos")], (8, 8))


def test_encode_first_step_channels():
    img = Image2D(np.random.default_rng(0).uniform(size=(16, 16)))
    x = encode_model_input(img, InteractionSet(), None)
    assert x.shape == (5, 16, 16)
    assert np.array_equal(x[0], img.data)
    assert not x[1:].any()  # previous-prediction channel zeros, no prompts


def test_encode_full_grid_box():
    img = Image2D(np.full((16, 16), 0.5))
    u = InteractionSet(boxes=(BoundingBox(0, 0, 15, 15),))
    x = encode_model_input(img, u)
    assert (x[1] == 1.0).all()


def test_encode_positive_channel_is_elementwise_max():
    img = Image2D(np.full((16, 16), 0.5))
    scr = np.zeros((16, 16), dtype=np.float32)
    scr[5, 5] = 0.7
    u = InteractionSet(
        pos_scribbles=(ScribbleMap(scr, "pos"),), clicks=(Click(5, 5, "pos"),)
    )
    x = encode_model_input(img, u)
    assert x[2][5, 5] == 1.0


def test_encode_prev_logits_passthrough():
    img = Image2D(np.full((16, 16), 0.5))
    prev = PredictionLogits(np.full((16, 16), -2.5))
    x = encode_model_input(img, InteractionSet(), prev)
    assert np.allclose(x[4], -2.5)


def test_encode_shape_mismatch():
    img = Image2D(np.full((16, 16), 0.5))
    prev = PredictionLogits(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        encode_model_input(img, InteractionSet(), prev)


def test_error_region_perfect_prediction():
    y = BinaryMask(np.eye(8))
    logits = PredictionLogits(np.where(np.eye(8) > 0, 50.0, -50.0))
    fn, fp = compute_error_region(y, logits)
    assert fn.is_empty() and fp.is_empty()


def test_error_region_zero_logits_is_all_background():
    y = BinaryMask(np.eye(8))
    fn, fp = compute_error_region(y, PredictionLogits(np.zeros((8, 8))))
    assert np.array_equal(fn.data, y.data)
    assert fp.is_empty()


def test_error_region_halves():
    y = np.zeros((8, 8))
    y[:, :4] = 1
    pred = np.full((8, 8), -10.0)
    pred[:, 4:] = 10.0
    fn, fp = compute_error_region(BinaryMask(y), PredictionLogits(pred))
    assert np.array_equal(fn.data, y)
    assert np.array_equal(fp.data, 1 - y)


def test_error_regions_partition_the_symmetric_difference():
    rng = np.random.default_rng(3)
    for _ in range(20):
        y = BinaryMask((rng.uniform(size=(12, 12)) > 0.5).astype(np.float32))
        logits = PredictionLogits(rng.normal(size=(12, 12)))
        fn, fp = compute_error_region(y, logits)
        assert not (fn.as_bool() & fp.as_bool()).any()
        xor = y.as_bool() ^ logits.binarized().as_bool()
        assert np.array_equal(fn.as_bool() | fp.as_bool(), xor)
