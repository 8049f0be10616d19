"""Compact encoder-decoder segmentation network (SPUNet-v1).

Eight conv blocks: four encoder and four decoder, each two 3x3
convolutions with PReLU activations and no normalization. Downsampling
is 2x2 max-pool, upsampling is bilinear, skips are channel concatenation,
and a 1x1 head produces single-channel logits. Input is the 5-channel
prompt encoding; spatial sides must be divisible by 16.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..encoding import encode_model_input
from ..grids import BoundingBox, Click, Image2D, InteractionSet, PredictionLogits, ScribbleMap
from ..rng import SeededRng
from .functional import (
    conv1x1_backward,
    conv1x1_forward,
    conv3x3_backward,
    conv3x3_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    prelu_backward,
    prelu_forward,
    resize_bilinear,
    resize_nearest,
    upsample2x_backward,
    upsample2x_forward,
)

ENCODER_BLOCKS = ("enc1", "enc2", "enc3", "enc4")
DECODER_BLOCKS = ("dec1", "dec2", "dec3", "dec4")
DEFAULT_WIDTH = 192
IN_CHANNELS = 5
_PRELU_INIT = 0.25


def _block_names(block: str) -> tuple[str, ...]:
    return (
        f"{block}.conv1.w", f"{block}.conv1.b", f"{block}.act1.slope",
        f"{block}.conv2.w", f"{block}.conv2.b", f"{block}.act2.slope",
    )


def tensor_names(width: int = DEFAULT_WIDTH) -> list[str]:
    names: list[str] = []
    for block in ENCODER_BLOCKS + DECODER_BLOCKS:
        names.extend(_block_names(block))
    names.extend(["head.w", "head.b"])
    return names


@dataclass
class UNetWeights:
    """Named parameter tensors plus the derived width/input channel counts."""

    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        first = self.tensors.get("enc1.conv1.w")
        if first is None:
            raise ValueError("weights missing enc1.conv1.w")
        self.width = int(first.shape[0])
        self.in_channels = int(first.shape[1])
        expected = set(tensor_names())
        got = set(self.tensors)
        if expected != got:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValueError(f"weight names mismatch: missing={missing}, extra={extra}")
        for name, arr in self.tensors.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"tensor {name} contains non-finite values")

    @classmethod
    def initialize(
        cls, rng: SeededRng, width: int = DEFAULT_WIDTH, in_channels: int = IN_CHANNELS
    ) -> "UNetWeights":
        """Kaiming-uniform (fan-in, PReLU gain) convs, zero biases, 0.25 slopes."""
        gain = np.sqrt(2.0 / (1.0 + _PRELU_INIT**2))
        tensors: dict[str, np.ndarray] = {}

        def conv(name: str, cout: int, cin: int, k: int) -> None:
            fan_in = cin * k * k
            bound = gain * np.sqrt(3.0 / fan_in)
            tensors[f"{name}.w"] = rng.gen.uniform(
                -bound, bound, size=(cout, cin, k, k)
            ).astype(np.float32)
            tensors[f"{name}.b"] = np.zeros(cout, dtype=np.float32)

        def block(name: str, cin: int) -> None:
            conv(f"{name}.conv1", width, cin, 3)
            tensors[f"{name}.act1.slope"] = np.full(width, _PRELU_INIT, dtype=np.float32)
            conv(f"{name}.conv2", width, width, 3)
            tensors[f"{name}.act2.slope"] = np.full(width, _PRELU_INIT, dtype=np.float32)

        block("enc1", in_channels)
        for name in ENCODER_BLOCKS[1:]:
            block(name, width)
        for name in DECODER_BLOCKS:
            block(name, 2 * width)
        conv("head", 1, width, 1)
        # background-prior head bias: fresh models predict "empty" rather
        # than coin flips, which speeds up loss descent on sparse labels
        tensors["head.b"][:] = -2.0
        return cls(tensors)

    def zeros_like_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.tensors.items()}

    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.tensors.values())

    def astype(self, dtype) -> "UNetWeights":
        return UNetWeights({k: v.astype(dtype) for k, v in self.tensors.items()})


def _block_forward(weights: dict[str, np.ndarray], block: str, x: np.ndarray, caches: list):
    y, c1 = conv3x3_forward(x, weights[f"{block}.conv1.w"], weights[f"{block}.conv1.b"])
    y, a1 = prelu_forward(y, weights[f"{block}.act1.slope"])
    y, c2 = conv3x3_forward(y, weights[f"{block}.conv2.w"], weights[f"{block}.conv2.b"])
    y, a2 = prelu_forward(y, weights[f"{block}.act2.slope"])
    caches.append((block, c1, a1, c2, a2))
    return y


def _block_backward(
    weights: dict[str, np.ndarray],
    cache,
    grad: np.ndarray,
    grads: dict[str, np.ndarray],
) -> np.ndarray:
    block, c1, a1, c2, a2 = cache
    grad, dslope2 = prelu_backward(a2, grad, weights[f"{block}.act2.slope"])
    grads[f"{block}.act2.slope"] += dslope2
    grad, dw2, db2 = conv3x3_backward(c2, grad, weights[f"{block}.conv2.w"])
    grads[f"{block}.conv2.w"] += dw2
    grads[f"{block}.conv2.b"] += db2
    grad, dslope1 = prelu_backward(a1, grad, weights[f"{block}.act1.slope"])
    grads[f"{block}.act1.slope"] += dslope1
    grad, dw1, db1 = conv3x3_backward(c1, grad, weights[f"{block}.conv1.w"])
    grads[f"{block}.conv1.w"] += dw1
    grads[f"{block}.conv1.b"] += db1
    return grad


def unet_forward(
    weights: UNetWeights, model_input: np.ndarray, keep_cache: bool = False
):
    """Run the network on a (5, h, w) input; returns (logits_hw, cache)."""
    dtype = weights.tensors["enc1.conv1.w"].dtype
    x = np.asarray(model_input, dtype=dtype)
    if x.ndim != 3 or x.shape[0] != weights.in_channels:
        raise ValueError(
            f"expected ({weights.in_channels}, h, w) input, got shape {x.shape}"
        )
    h, w = x.shape[1], x.shape[2]
    if h % 16 or w % 16:
        raise ValueError(f"input sides must be divisible by 16, got {(h, w)}")

    t = weights.tensors
    caches: list = []
    skips: list[np.ndarray] = []
    out = x
    pools: list = []
    for block in ENCODER_BLOCKS:
        out = _block_forward(t, block, out, caches)
        skips.append(out)
        out, pc = maxpool2x2_forward(out)
        pools.append(pc)

    ups: list = []
    concat_splits: list[int] = []
    for block, skip in zip(DECODER_BLOCKS, reversed(skips)):
        out, uc = upsample2x_forward(out)
        ups.append(uc)
        concat_splits.append(out.shape[0])
        out = np.concatenate([out, skip], axis=0)
        out = _block_forward(t, block, out, caches)

    logits, head_cache = conv1x1_forward(out, t["head.w"], t["head.b"])
    cache = (
        (caches, pools, ups, concat_splits, head_cache) if keep_cache else None
    )
    return logits[0], cache


def unet_backward(
    weights: UNetWeights, cache, grad_logits: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact parameter gradients for a cached forward pass."""
    if cache is None:
        raise ValueError("forward pass was run without keep_cache=True")
    caches, pools, ups, concat_splits, head_cache = cache
    t = weights.tensors
    grads = weights.zeros_like_grads()

    grad, dw, db = conv1x1_backward(head_cache, grad_logits[None], t["head.w"])
    grads["head.w"] += dw
    grads["head.b"] += db

    # decoder blocks in reverse; collect skip gradients for the encoder
    skip_grads: list[np.ndarray] = []
    for i, block in enumerate(reversed(DECODER_BLOCKS)):
        cache_i = caches[len(ENCODER_BLOCKS) + len(DECODER_BLOCKS) - 1 - i]
        grad = _block_backward(t, cache_i, grad, grads)
        split = concat_splits[len(DECODER_BLOCKS) - 1 - i]
        grad_up, grad_skip = grad[:split], grad[split:]
        skip_grads.append(grad_skip)
        grad = upsample2x_backward(ups[len(DECODER_BLOCKS) - 1 - i], grad_up)

    # encoder blocks in reverse; skip_grads arrived for enc1..enc4 in order
    for i, block in enumerate(reversed(ENCODER_BLOCKS)):
        grad = maxpool2x2_backward(pools[len(ENCODER_BLOCKS) - 1 - i], grad)
        grad = grad + skip_grads[len(ENCODER_BLOCKS) - 1 - i]
        cache_i = caches[len(ENCODER_BLOCKS) - 1 - i]
        grad = _block_backward(t, cache_i, grad, grads)
    return grads


def _scale_coord(v: int, src: int, dst: int) -> int:
    return int(np.clip(np.floor((v + 0.5) * dst / src), 0, dst - 1))


def scale_interactions(
    interactions: InteractionSet, src: tuple[int, int], dst: tuple[int, int]
) -> InteractionSet:
    """Map prompts between grid resolutions (nearest resize for masks)."""
    if src == dst:
        return interactions
    pos = tuple(
        ScribbleMap(resize_nearest(s.data, dst), s.sign) for s in interactions.pos_scribbles
    )
    neg = tuple(
        ScribbleMap(resize_nearest(s.data, dst), s.sign) for s in interactions.neg_scribbles
    )
    clicks = tuple(
        Click(_scale_coord(c.row, src[0], dst[0]), _scale_coord(c.col, src[1], dst[1]), c.sign)
        for c in interactions.clicks
    )
    boxes = tuple(
        BoundingBox(
            _scale_coord(b.row_min, src[0], dst[0]),
            _scale_coord(b.col_min, src[1], dst[1]),
            _scale_coord(b.row_max, src[0], dst[0]),
            _scale_coord(b.col_max, src[1], dst[1]),
        )
        for b in interactions.boxes
    )
    return InteractionSet(pos_scribbles=pos, neg_scribbles=neg, clicks=clicks, boxes=boxes)


class Predictor:
    """Inference wrapper: resizes to a fixed working resolution, runs the
    network, and upsamples the logits back to the input resolution."""

    def __init__(self, weights: UNetWeights, infer_size: int = 128):
        if infer_size % 16:
            raise ValueError("infer_size must be divisible by 16")
        self.weights = weights
        self.infer_size = infer_size

    def predict(
        self,
        image: Image2D,
        interactions: InteractionSet,
        prev: PredictionLogits | None = None,
    ) -> PredictionLogits:
        src = image.shape
        native = (
            src == (self.infer_size, self.infer_size)
            or (src[0] % 16 == 0 and src[1] % 16 == 0 and max(src) <= self.infer_size)
        )
        if native:
            x = encode_model_input(image, interactions, prev)
            logits, _ = unet_forward(self.weights, x)
            return PredictionLogits(logits)

        dst = (self.infer_size, self.infer_size)
        small_img = Image2D(np.clip(resize_bilinear(image.data, dst), 0.0, 1.0))
        small_u = scale_interactions(interactions, src, dst)
        small_prev = (
            None if prev is None else PredictionLogits(resize_bilinear(prev.data, dst))
        )
        x = encode_model_input(small_img, small_u, small_prev)
        logits, _ = unet_forward(self.weights, x)
        return PredictionLogits(resize_bilinear(logits, src))
