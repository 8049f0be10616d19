"""Layer primitives (forward + exact backward) on float32 numpy arrays.

Convolutions run as one GEMM over an im2col workspace; backward passes
rebuild the workspace from the cached padded input instead of caching it,
trading a little compute for half the peak memory.
"""

from __future__ import annotations

import numpy as np


def _im2col(padded: np.ndarray, h: int, w: int) -> np.ndarray:
    """(Cin, h+2, w+2) padded input -> (9*Cin, h*w) column matrix."""
    cin = padded.shape[0]
    cols = np.empty((9 * cin, h * w), dtype=padded.dtype)
    k = 0
    for di in range(3):
        for dj in range(3):
            cols[k * cin : (k + 1) * cin] = padded[:, di : di + h, dj : dj + w].reshape(
                cin, h * w
            )
            k += 1
    return cols


# wide layers skip im2col: nine GEMMs on the padded input avoid the large
# column-matrix copies that otherwise dominate single-thread latency
_SHIFT_GEMM_MIN_CIN = 64


def _conv_shift_gemm(
    padded: np.ndarray, weight: np.ndarray, bias: np.ndarray, h: int, w: int
) -> np.ndarray:
    cin = padded.shape[0]
    cout = weight.shape[0]
    flat = padded.reshape(cin, -1)
    acc = np.zeros((cout, h, w), dtype=padded.dtype)
    zbuf = np.empty((cout, flat.shape[1]), dtype=padded.dtype)
    for di in range(3):
        for dj in range(3):
            w_tap = np.ascontiguousarray(weight[:, :, di, dj])
            np.matmul(w_tap, flat, out=zbuf)
            acc += zbuf.reshape(cout, h + 2, w + 2)[:, di : di + h, dj : dj + w]
    acc += bias[:, None, None]
    return acc


def conv3x3_forward(
    x: np.ndarray, weight: np.ndarray, bias: np.ndarray
) -> tuple[np.ndarray, tuple]:
    """Same-padding 3x3 convolution; x is (Cin, H, W), weight (Cout, Cin, 3, 3)."""
    cin, h, w = x.shape
    cout = weight.shape[0]
    if weight.shape != (cout, cin, 3, 3):
        raise ValueError(f"weight shape {weight.shape} does not match input channels {cin}")
    padded = np.zeros((cin, h + 2, w + 2), dtype=x.dtype)
    padded[:, 1 : h + 1, 1 : w + 1] = x
    if cin >= _SHIFT_GEMM_MIN_CIN:
        y = _conv_shift_gemm(padded, np.ascontiguousarray(weight), bias, h, w)
        return y, (padded, weight.shape)
    cols = _im2col(padded, h, w)
    # w_mat columns are interleaved (di, dj) major / cin minor, matching _im2col
    w_mat = weight.transpose(0, 2, 3, 1).reshape(cout, 9 * cin)
    y = w_mat @ cols + bias[:, None]
    return y.reshape(cout, h, w), (padded, weight.shape)


def conv3x3_backward(
    cache: tuple, grad_y: np.ndarray, weight: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients (dx, dweight, dbias) for conv3x3_forward."""
    padded, w_shape = cache
    cout, cin, _, _ = w_shape
    h = padded.shape[1] - 2
    w = padded.shape[2] - 2
    g = grad_y.reshape(cout, h * w)

    cols = _im2col(padded, h, w)
    dw_mat = g @ cols.T
    dweight = dw_mat.reshape(cout, 3, 3, cin).transpose(0, 3, 1, 2).copy()
    dbias = g.sum(axis=1)

    w_mat = weight.transpose(0, 2, 3, 1).reshape(cout, 9 * cin)
    dcols = w_mat.T @ g  # (9*Cin, h*w)
    dpad = np.zeros_like(padded)
    k = 0
    for di in range(3):
        for dj in range(3):
            dpad[:, di : di + h, dj : dj + w] += dcols[k * cin : (k + 1) * cin].reshape(
                cin, h, w
            )
            k += 1
    dx = dpad[:, 1 : h + 1, 1 : w + 1].copy()
    return dx, dweight, dbias


def prelu_forward(x: np.ndarray, slope: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Per-channel PReLU; slope has shape (C,)."""
    s = slope[:, None, None]
    y = np.where(x > 0, x, s * x)
    return y.astype(x.dtype, copy=False), (x,)


def prelu_backward(
    cache: tuple, grad_y: np.ndarray, slope: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    (x,) = cache
    s = slope[:, None, None]
    dx = grad_y * np.where(x > 0, 1.0, s)
    dslope = (grad_y * np.where(x > 0, 0.0, x)).sum(axis=(1, 2))
    return dx.astype(x.dtype, copy=False), dslope.astype(slope.dtype, copy=False)


def maxpool2x2_forward(x: np.ndarray) -> tuple[np.ndarray, tuple]:
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool needs even sides, got {(h, w)}")
    windows = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(
        c, h // 2, w // 2, 4
    )
    idx = windows.argmax(axis=3)
    y = np.take_along_axis(windows, idx[..., None], axis=3)[..., 0]
    return np.ascontiguousarray(y), (idx, (c, h, w))


def maxpool2x2_backward(cache: tuple, grad_y: np.ndarray) -> np.ndarray:
    idx, (c, h, w) = cache
    scatter = np.zeros((c, h // 2, w // 2, 4), dtype=grad_y.dtype)
    np.put_along_axis(scatter, idx[..., None], grad_y[..., None], axis=3)
    return np.ascontiguousarray(
        scatter.reshape(c, h // 2, w // 2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h, w)
    )


def _axis_taps(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Half-pixel bilinear taps for 2x upsampling along one axis."""
    src = np.arange(n_out, dtype=np.float32) / 2.0 - 0.25
    base = np.floor(src)
    frac = (src - base).astype(np.float32)
    i0 = np.clip(base.astype(np.int64), 0, n_in - 1)
    i1 = np.clip(base.astype(np.int64) + 1, 0, n_in - 1)
    return i0, i1, (1.0 - frac), frac


def upsample2x_forward(x: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Bilinear 2x upsampling with half-pixel alignment and edge clamping."""
    c, h, w = x.shape
    r0, r1, wr0, wr1 = _axis_taps(2 * h, h)
    c0, c1, wc0, wc1 = _axis_taps(2 * w, w)
    rows = x[:, r0, :] * wr0[None, :, None] + x[:, r1, :] * wr1[None, :, None]
    y = rows[:, :, c0] * wc0[None, None, :] + rows[:, :, c1] * wc1[None, None, :]
    return y.astype(x.dtype, copy=False), ((c, h, w),)


def upsample2x_backward(cache: tuple, grad_y: np.ndarray) -> np.ndarray:
    ((c, h, w),) = cache
    r0, r1, wr0, wr1 = _axis_taps(2 * h, h)
    c0, c1, wc0, wc1 = _axis_taps(2 * w, w)
    # transpose of the column interpolation
    g = grad_y
    flat = g.transpose(2, 0, 1).reshape(2 * w, -1)  # (2w, c*2h)
    acc = np.zeros((w, flat.shape[1]), dtype=g.dtype)
    np.add.at(acc, c0, flat * wc0[:, None])
    np.add.at(acc, c1, flat * wc1[:, None])
    tmp = acc.reshape(w, c, 2 * h).transpose(1, 2, 0)  # (c, 2h, w)
    # transpose of the row interpolation
    flat = tmp.transpose(1, 0, 2).reshape(2 * h, -1)  # (2h, c*w)
    acc = np.zeros((h, flat.shape[1]), dtype=g.dtype)
    np.add.at(acc, r0, flat * wr0[:, None])
    np.add.at(acc, r1, flat * wr1[:, None])
    return np.ascontiguousarray(acc.reshape(h, c, w).transpose(1, 0, 2))


def conv1x1_forward(
    x: np.ndarray, weight: np.ndarray, bias: np.ndarray
) -> tuple[np.ndarray, tuple]:
    """Pointwise convolution; weight is (Cout, Cin, 1, 1)."""
    cin, h, w = x.shape
    cout = weight.shape[0]
    w_mat = weight.reshape(cout, cin)
    y = w_mat @ x.reshape(cin, h * w) + bias[:, None]
    return y.reshape(cout, h, w), (x, weight.shape)


def conv1x1_backward(
    cache: tuple, grad_y: np.ndarray, weight: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w_shape = cache
    cout, cin = w_shape[0], w_shape[1]
    h, w = x.shape[1], x.shape[2]
    g = grad_y.reshape(cout, h * w)
    dweight = (g @ x.reshape(cin, h * w).T).reshape(cout, cin, 1, 1)
    dbias = g.sum(axis=1)
    dx = (weight.reshape(cout, cin).T @ g).reshape(cin, h, w)
    return dx, dweight, dbias


def resize_bilinear(arr: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Generic bilinear resize (half-pixel centers, edge clamped); no gradients."""
    squeeze = arr.ndim == 2
    x = arr[None] if squeeze else arr
    c, h, w = x.shape
    oh, ow = out_shape
    if (h, w) == (oh, ow):
        out = x.astype(np.float32, copy=True)
        return out[0] if squeeze else out

    def taps(n_out, n_in):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) * n_in / n_out - 0.5
        base = np.floor(src)
        frac = (src - base).astype(np.float32)
        i0 = np.clip(base.astype(np.int64), 0, n_in - 1)
        i1 = np.clip(base.astype(np.int64) + 1, 0, n_in - 1)
        return i0, i1, (1.0 - frac), frac

    r0, r1, wr0, wr1 = taps(oh, h)
    c0, c1, wc0, wc1 = taps(ow, w)
    rows = x[:, r0, :] * wr0[None, :, None] + x[:, r1, :] * wr1[None, :, None]
    out = rows[:, :, c0] * wc0[None, None, :] + rows[:, :, c1] * wc1[None, None, :]
    out = out.astype(np.float32)
    return out[0] if squeeze else out


def resize_nearest(arr: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resize; keeps sparse prompt masks crisp."""
    squeeze = arr.ndim == 2
    x = arr[None] if squeeze else arr
    _, h, w = x.shape
    oh, ow = out_shape
    ri = np.minimum((np.arange(oh, dtype=np.float64) + 0.5) * h / oh, h - 1).astype(np.int64)
    ci = np.minimum((np.arange(ow, dtype=np.float64) + 0.5) * w / ow, w - 1).astype(np.int64)
    out = x[:, ri][:, :, ci].astype(np.float32, copy=True)
    return out[0] if squeeze else out
