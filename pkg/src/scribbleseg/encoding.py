"""Model-input encoding: prompts and image become a 5-channel grid.

Channel order: image, box mask, positive prompts, negative prompts,
previous-prediction logits. Click and scribble evidence is merged per
sign by elementwise max, so all prompt channels stay on [0, 1].
"""

from __future__ import annotations

import numpy as np

from .grids import BinaryMask, Click, Image2D, InteractionSet, PredictionLogits

MODEL_INPUT_CHANNELS = 5


def rasterize_clicks(
    clicks: list[Click] | tuple[Click, ...], shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Binary hit grids (pos, neg) for a click list; duplicates are idempotent."""
    pos = np.zeros(shape, dtype=np.float32)
    neg = np.zeros(shape, dtype=np.float32)
    for c in clicks:
        if not c.in_bounds(shape):
            raise ValueError(f"click ({c.row},{c.col}) outside grid of shape {shape}")
        (pos if c.sign == "pos" else neg)[c.row, c.col] = 1.0
    return pos, neg


def encode_model_input(
    image: Image2D,
    interactions: InteractionSet,
    prev: PredictionLogits | None = None,
) -> np.ndarray:
    """Stack the 5 input channels as a (5, h, w) float32 array."""
    shape = image.shape
    interactions.validate_shape(shape)
    if prev is not None and prev.shape != shape:
        raise ValueError(f"previous logits shape {prev.shape} != image shape {shape}")

    box_channel = np.zeros(shape, dtype=np.float32)
    for box in interactions.boxes:
        box_channel = np.maximum(box_channel, box.to_mask(shape))

    pos_channel, neg_channel = rasterize_clicks(interactions.clicks, shape)
    for s in interactions.pos_scribbles:
        pos_channel = np.maximum(pos_channel, s.data)
    for s in interactions.neg_scribbles:
        neg_channel = np.maximum(neg_channel, s.data)

    prev_channel = np.zeros(shape, dtype=np.float32) if prev is None else prev.data
    return np.stack(
        [image.data, box_channel, pos_channel, neg_channel, prev_channel]
    ).astype(np.float32, copy=False)


def compute_error_region(
    y: BinaryMask, logits: PredictionLogits, threshold: float = 0.5
) -> tuple[BinaryMask, BinaryMask]:
    """Split the prediction error into (false_negative, false_positive) masks."""
    if y.shape != logits.shape:
        raise ValueError(f"label shape {y.shape} != logits shape {logits.shape}")
    pred = logits.binarized(threshold).as_bool()
    truth = y.as_bool()
    false_neg = BinaryMask(truth & ~pred)
    false_pos = BinaryMask(~truth & pred)
    return false_neg, false_pos
