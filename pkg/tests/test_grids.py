import numpy as np
import pytest

from scribbleseg.grids import (
    BinaryMask,
    BoundingBox,
    Click,
    Image2D,
    InteractionSet,
    MultiLabelMask,
    NoRegionError,
    PredictionLogits,
    ScribbleMap,
    min_bounding_box,
)


def test_image_validation():
    img = Image2D(np.full((8, 8), 0.5))
    assert img.shape == (8, 8)
    with pytest.raises(ValueError):
        Image2D(np.full((4, 8), 0.5))  # too small
    with pytest.raises(ValueError):
        Image2D(np.full((8, 8), 1.5))  # out of range
    with pytest.raises(ValueError):
        Image2D(np.full((8, 8), np.nan))


def test_image_immutable():
    img = Image2D(np.full((8, 8), 0.5))
    with pytest.raises(ValueError):
        img.data[0, 0] = 0.1


def test_image_does_not_freeze_caller_array():
    arr = np.full((8, 8), 0.5, dtype=np.float32)
    Image2D(arr)
    arr[0, 0] = 0.25  # caller's array must stay writeable


def test_binary_mask_rejects_fractions():
    with pytest.raises(ValueError):
        BinaryMask(np.full((4, 4), 0.5))
    m = BinaryMask(np.eye(4))
    assert m.area == 4
    assert m.complement().area == 12


def test_multilabel_bounds():
    MultiLabelMask(np.zeros((3, 3), dtype=np.int32), num_labels=1)
    with pytest.raises(ValueError):
        MultiLabelMask(np.full((3, 3), 5, dtype=np.int32), num_labels=3)


def test_click_and_box_validation():
    with pytest.raises(ValueError):
        Click(0, 0, "positive")
    c = Click(2, 3, "pos")
    assert c.in_bounds((4, 4)) and not c.in_bounds((2, 4))
    with pytest.raises(ValueError):
        BoundingBox(5, 0, 2, 4)
    box = BoundingBox(-3, -2, 10, 12).clipped((8, 8))
    assert (box.row_min, box.col_min, box.row_max, box.col_max) == (0, 0, 7, 7)


def test_min_bounding_box():
    grid = np.zeros((30, 50))
    grid[10:21, 30:41] = 1
    box = min_bounding_box(BinaryMask(grid))
    assert (box.row_min, box.col_min, box.row_max, box.col_max) == (10, 30, 20, 40)
    with pytest.raises(NoRegionError):
        min_bounding_box(BinaryMask(np.zeros((4, 4))))


def test_scribble_range():
    with pytest.raises(ValueError):
        ScribbleMap(np.full((4, 4), 1.2), "pos")
    s = ScribbleMap(np.eye(4) * 0.5, "neg")
    assert s.support_size() == 4


def test_interaction_set_merge_is_append_only():
    a = InteractionSet(clicks=(Click(1, 1, "pos"),))
    b = InteractionSet(clicks=(Click(2, 2, "neg"),), boxes=(BoundingBox(0, 0, 3, 3),))
    merged = a.merged(b)
    assert merged.count() == 3
    assert merged.contains(a)
    assert not a.contains(merged)


def test_logits_binarize_threshold_is_strict():
    logits = PredictionLogits(np.zeros((4, 4)))
    # sigmoid(0) = 0.5 exactly; strict > keeps background
    assert logits.binarized().is_empty()
