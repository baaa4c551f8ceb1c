"""Layer forward/backward passes: 2D convolution, dense, activations, pooling.

Convolution is cross-correlation (no kernel flip), the deep-learning
convention.  Training runs on float32 arrays in the (N, C, H, W) layout;
float64 inputs pass through unconverted so the gradient checker can
evaluate forward passes at 64-bit precision.
"""

from __future__ import annotations

import numpy as np

DTYPE = np.float32


class ShapeError(ValueError):
    """An operation received inconsistently shaped arrays."""


def as_f32(x) -> np.ndarray:
    """Coerce to a contiguous real array; float64 stays, everything else becomes float32."""
    x = np.ascontiguousarray(x)
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(DTYPE)
    return x


def conv2d_out_size(size: int, k: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def _pad_hw(x: np.ndarray, padding: int) -> np.ndarray:
    if not padding:
        return x
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=x.dtype)
    xp[:, :, padding:padding + h, padding:padding + w] = x
    return xp


def _im2col(xp: np.ndarray, k: int, stride: int, dilation: int, ho: int, wo: int) -> np.ndarray:
    """Gather (N, C*k*k, ho*wo) patch columns from a padded (N, C, Hp, Wp) input."""
    n, c, hp, wp = xp.shape
    if k == 1 and stride == 1:
        return xp.reshape(n, c, ho * wo)
    sn, sc, sh, sw = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, k, k, ho, wo),
        strides=(sn, sc, dilation * sh, dilation * sw, stride * sh, stride * sw),
        writeable=False,
    )
    return view.reshape(n, c * k * k, ho * wo)


def conv2d_forward(x, weights, bias, stride: int = 1, padding: int = 0, dilation: int = 1):
    """Cross-correlation of (N,Cin,H,W) with (Cout,Cin,k,k) kernels plus bias.

    Returns (out, cache) with out of shape (N, Cout, H', W') where
    H' = (H + 2*padding - dilation*(k-1) - 1)//stride + 1.
    """
    x = as_f32(x)
    weights = as_f32(weights)
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be 4-d (N,Cin,H,W), got ndim={x.ndim}")
    if weights.ndim != 4 or weights.shape[2] != weights.shape[3]:
        raise ShapeError(f"conv2d weights must be (Cout,Cin,k,k), got {weights.shape}")
    n, cin, h, w = x.shape
    cout, cin_w, k, _ = weights.shape
    if cin_w != cin:
        raise ShapeError(f"conv2d channel mismatch: input Cin={cin}, weights Cin={cin_w}")
    if bias is not None:
        bias = as_f32(bias)
        if bias.shape != (cout,):
            raise ShapeError(f"conv2d bias must be ({cout},), got {bias.shape}")
    if stride < 1 or dilation < 1 or padding < 0:
        raise ValueError(f"invalid conv2d params stride={stride} padding={padding} dilation={dilation}")
    ho = conv2d_out_size(h, k, stride, padding, dilation)
    wo = conv2d_out_size(w, k, stride, padding, dilation)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d output would be empty: H'={ho}, W'={wo} for input {h}x{w}")

    xp = _pad_hw(x, padding)
    cols = _im2col(xp, k, stride, dilation, ho, wo)
    w2d = weights.reshape(cout, cin * k * k)
    out = np.matmul(w2d, cols)  # (N, Cout, ho*wo)
    if bias is not None:
        out += bias[:, None]
    out = out.reshape(n, cout, ho, wo)
    cache = (x.shape, x.dtype, cols, weights, bias is not None, stride, padding, dilation, ho, wo)
    return out, cache


def conv2d_backward(dout, cache, need_dx=True):
    """Gradients of conv2d_forward w.r.t. input, weights, and bias.

    ``need_dx=False`` skips the input gradient (returns None for it),
    useful when the layer below is frozen.
    """
    x_shape, x_dtype, cols, weights, has_bias, stride, padding, dilation, ho, wo = cache
    dout = as_f32(dout)
    n, cin, h, w = x_shape
    cout, _, k, _ = weights.shape
    if dout.shape != (n, cout, ho, wo):
        raise ShapeError(f"conv2d upstream gradient must be {(n, cout, ho, wo)}, got {dout.shape}")

    dy2d = dout.reshape(n, cout, ho * wo)
    db = dy2d.sum(axis=(0, 2)) if has_bias else None

    dw = np.matmul(dy2d, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weights.shape)

    if not need_dx:
        return None, dw.astype(weights.dtype, copy=False), db

    full_pad = dilation * (k - 1) - padding
    if stride == 1 and full_pad >= 0:
        # dx is the cross-correlation of dout with the spatially flipped,
        # channel-transposed kernel at the same dilation.
        wf = np.ascontiguousarray(weights.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
        dx, _ = conv2d_forward(dout, wf, None, stride=1, padding=full_pad, dilation=dilation)
    else:
        dx = _col2im_scatter(dout, weights, x_shape, stride, padding, dilation, ho, wo)
    return dx.astype(x_dtype, copy=False), dw.astype(weights.dtype, copy=False), db


def _col2im_scatter(dout, weights, x_shape, stride, padding, dilation, ho, wo):
    """General-stride input gradient via deterministic bincount scatter-add."""
    n, cin, h, w = x_shape
    cout, _, k, _ = weights.shape
    hp, wp = h + 2 * padding, w + 2 * padding
    w2d = weights.reshape(cout, cin * k * k)
    dcols = np.matmul(w2d.T, dout.reshape(n, cout, ho * wo))  # (N, Cin*k*k, L)

    ch = np.repeat(np.arange(cin), k * k)
    ku = np.tile(np.repeat(np.arange(k), k), cin)
    kv = np.tile(np.arange(k), cin * k)
    oy = stride * np.repeat(np.arange(ho), wo)
    ox = stride * np.tile(np.arange(wo), ho)
    rows = dilation * ku[:, None] + oy[None, :]
    colsx = dilation * kv[:, None] + ox[None, :]
    flat = (ch[:, None] * hp + rows) * wp + colsx  # (Cin*k*k, L)

    dx = np.empty((n, cin, h, w), dtype=dcols.dtype)
    idx = flat.ravel()
    size = cin * hp * wp
    for i in range(n):
        acc = np.bincount(idx, weights=dcols[i].ravel().astype(np.float64), minlength=size)
        dxp = acc.reshape(cin, hp, wp)
        dx[i] = dxp[:, padding:padding + h, padding:padding + w]
    return dx.astype(dcols.dtype, copy=False)


def dense_forward(x, weights, bias):
    """Affine map out = x @ weights.T + bias for x (N, Din), weights (Dout, Din)."""
    x = as_f32(x)
    weights = as_f32(weights)
    if x.ndim != 2:
        raise ShapeError(f"dense input must be 2-d (N,Din), got ndim={x.ndim}")
    if weights.ndim != 2:
        raise ShapeError(f"dense weights must be 2-d (Dout,Din), got ndim={weights.ndim}")
    if x.shape[1] != weights.shape[1]:
        raise ShapeError(f"dense feature mismatch: input Din={x.shape[1]}, weights Din={weights.shape[1]}")
    if bias is not None:
        bias = as_f32(bias)
        if bias.shape != (weights.shape[0],):
            raise ShapeError(f"dense bias must be ({weights.shape[0]},), got {bias.shape}")
    out = x @ weights.T
    if bias is not None:
        out += bias
    return out, (x, weights, bias is not None)


def dense_backward(dout, cache):
    x, weights, has_bias = cache
    dout = as_f32(dout)
    if dout.shape != (x.shape[0], weights.shape[0]):
        raise ShapeError(f"dense upstream gradient must be {(x.shape[0], weights.shape[0])}, got {dout.shape}")
    dw = dout.T @ x
    db = dout.sum(axis=0) if has_bias else None
    dx = dout @ weights
    return dx, dw, db


def relu_forward(x):
    x = as_f32(x)
    out = np.maximum(x, 0)
    return out, x


def relu_backward(dout, cache):
    return as_f32(dout) * (cache > 0)


def sigmoid_forward(x):
    x = as_f32(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out, out


def sigmoid_backward(dout, cache):
    return as_f32(dout) * cache * (1.0 - cache)


def global_avg_pool_forward(x):
    """Mean over the spatial map: (N,C,H,W) -> (N,C)."""
    x = as_f32(x)
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool input must be 4-d (N,C,H,W), got ndim={x.ndim}")
    n, c, h, w = x.shape
    out = x.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype)
    return out, (n, c, h, w)


def global_avg_pool_backward(dout, cache):
    n, c, h, w = cache
    dout = as_f32(dout)
    if dout.shape != (n, c):
        raise ShapeError(f"global_avg_pool upstream gradient must be {(n, c)}, got {dout.shape}")
    scale = dout.dtype.type(1.0 / (h * w))
    return np.broadcast_to((dout * scale)[:, :, None, None], (n, c, h, w)).astype(dout.dtype)
