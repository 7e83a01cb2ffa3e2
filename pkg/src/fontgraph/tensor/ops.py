"""Neural-network forward ops with analytic backward passes.

Convolutions use im2col views feeding BLAS matmuls; the transposed variants
are implemented through the exact same column machinery, which makes
conv_transpose the numerical adjoint of conv by construction.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Tensor, _accumulate, _make, as_tensor, matmul, softmax, transpose


class ShapeError(ValueError):
    pass


def _check(cond: bool, op: str, detail: str):
    if not cond:
        raise ShapeError(f"{op}: {detail}")


# ---------------------------------------------------------------------------
# im2col machinery (arrays in, arrays out)


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """(B,C,H,W) -> columns (B, OH*OW, C*kh*kw)."""
    b, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b, oh * ow, c * kh * kw)
    return np.ascontiguousarray(cols), oh, ow


def _col2im(
    cols: np.ndarray, h: int, w: int, c: int, kh: int, kw: int, stride: int, pad: int
) -> np.ndarray:
    """Adjoint of _im2col: scatter-add columns back onto the image grid."""
    b = cols.shape[0]
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    pieces = cols.reshape(b, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    out = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += pieces[
                :, :, i, j
            ]
    if pad:
        out = out[:, :, pad:-pad, pad:-pad]
    return out


# ---------------------------------------------------------------------------
# Convolutions


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """x (B,Cin,H,W) * weight (Cout,Cin,kh,kw) -> (B,Cout,OH,OW)."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check(x.ndim == 4, "conv2d", f"input must be 4-d, got {x.shape}")
    _check(weight.ndim == 4, "conv2d", f"weight must be 4-d, got {weight.shape}")
    b, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    _check(cin == cin_w, "conv2d", f"channels {cin} vs weight {cin_w}")
    bias_t = None if bias is None else as_tensor(bias)
    cols, oh, ow = _im2col(x.data, kh, kw, stride, padding)
    w2 = weight.data.reshape(cout, cin * kh * kw)
    out = cols @ w2.T  # (B, OH*OW, Cout)
    out = out.transpose(0, 2, 1).reshape(b, cout, oh, ow)
    if bias_t is not None:
        out = out + bias_t.data.reshape(1, cout, 1, 1)
    parents = (x, weight) if bias_t is None else (x, weight, bias_t)

    def bwd(g):
        g2 = g.reshape(b, cout, oh * ow).transpose(0, 2, 1)  # (B,L,Cout)
        if weight.requires_grad:
            gw = g2.reshape(-1, cout).T @ cols.reshape(-1, cin * kh * kw)
            _accumulate(weight, gw.reshape(weight.shape))
        if x.requires_grad:
            dcols = g2 @ w2  # (B,L,C*kh*kw)
            _accumulate(x, _col2im(dcols, h, w, cin, kh, kw, stride, padding))
        if bias_t is not None and bias_t.requires_grad:
            _accumulate(bias_t, g.sum(axis=(0, 2, 3)))

    return _make(out, parents, bwd, "conv2d")


def conv_transpose2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """x (B,Cin,H,W) * weight (Cin,Cout,kh,kw) -> (B,Cout,(H-1)s-2p+kh, ...).

    With a shared weight array this is the exact adjoint of conv2d, i.e.
    <conv2d(x, w), y> == <x, conv_transpose2d(y, w)>.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    _check(x.ndim == 4, "conv_transpose2d", f"input must be 4-d, got {x.shape}")
    b, cin, h, w = x.shape
    cin_w, cout, kh, kw = weight.shape
    _check(cin == cin_w, "conv_transpose2d", f"channels {cin} vs weight {cin_w}")
    oh = (h - 1) * stride - 2 * padding + kh
    ow = (w - 1) * stride - 2 * padding + kw
    _check(oh > 0 and ow > 0, "conv_transpose2d", f"empty output {oh}x{ow}")
    bias_t = None if bias is None else as_tensor(bias)
    w2 = weight.data.reshape(cin, cout * kh * kw)
    x2 = x.data.reshape(b, cin, h * w).transpose(0, 2, 1)  # (B,L,Cin)
    cols = x2 @ w2  # (B, L, Cout*kh*kw)
    out = _col2im(cols, oh, ow, cout, kh, kw, stride, padding)
    if bias_t is not None:
        out = out + bias_t.data.reshape(1, cout, 1, 1)
    parents = (x, weight) if bias_t is None else (x, weight, bias_t)

    def bwd(g):
        gcols, _, _ = _im2col(g, kh, kw, stride, padding)  # (B, L, Cout*kh*kw)
        if x.requires_grad:
            gx = gcols @ w2.T  # (B,L,Cin)
            _accumulate(x, gx.transpose(0, 2, 1).reshape(x.shape))
        if weight.requires_grad:
            gw = x2.reshape(-1, cin).T @ gcols.reshape(-1, cout * kh * kw)
            _accumulate(weight, gw.reshape(weight.shape))
        if bias_t is not None and bias_t.requires_grad:
            _accumulate(bias_t, g.sum(axis=(0, 2, 3)))

    return _make(out, parents, bwd, "conv_transpose2d")


def _pad_last(x: Tensor, padding: int) -> Tensor:
    """Zero-pad the final axis on both sides (tracked)."""
    if padding == 0:
        return x
    width = [(0, 0)] * (x.ndim - 1) + [(padding, padding)]
    data = np.pad(x.data, width)

    def bwd(g):
        _accumulate(x, g[..., padding:-padding])

    return _make(data, (x,), bwd, "pad")


def conv1d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """x (B,Cin,L) * weight (Cout,Cin,k) via the 2-d kernel with height 1."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check(x.ndim == 3, "conv1d", f"input must be 3-d, got {x.shape}")
    xp = _pad_last(x, padding)
    x4 = xp.reshape((xp.shape[0], xp.shape[1], 1, xp.shape[2]))
    w4 = weight.reshape((weight.shape[0], weight.shape[1], 1, weight.shape[2]))
    out = conv2d(x4, w4, bias=bias, stride=stride, padding=0)
    return out.reshape((out.shape[0], out.shape[1], out.shape[3]))


def _crop_last(x: Tensor, amount: int) -> Tensor:
    """Drop `amount` entries from both ends of the final axis (tracked)."""
    if amount == 0:
        return x
    data = x.data[..., amount:-amount]

    def bwd(g):
        buf = np.zeros_like(x.data)
        buf[..., amount:-amount] = g
        _accumulate(x, buf)

    return _make(np.ascontiguousarray(data), (x,), bwd, "crop")


def conv_transpose1d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """x (B,Cin,L) * weight (Cin,Cout,k), adjoint of conv1d."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check(x.ndim == 3, "conv_transpose1d", f"input must be 3-d, got {x.shape}")
    x4 = x.reshape((x.shape[0], x.shape[1], 1, x.shape[2]))
    w4 = weight.reshape((weight.shape[0], weight.shape[1], 1, weight.shape[2]))
    out = conv_transpose2d(x4, w4, bias=bias, stride=stride, padding=0)
    out = _crop_last(out, padding)
    return out.reshape((out.shape[0], out.shape[1], out.shape[3]))


# ---------------------------------------------------------------------------
# Normalization, pooling, attention


def batch_norm(
    x,
    gamma,
    beta,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Channel-wise batch normalization for (B,C,...) layouts.

    Running statistics are plain arrays mutated in place during training
    (biased variance, update factor = momentum).
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    c = x.shape[1]
    _check(gamma.shape == (c,) and beta.shape == (c,), "batch_norm", "scale/shift shape")
    axes = (0,) + tuple(range(2, x.ndim))
    shape = (1, c) + (1,) * (x.ndim - 2)

    if training:
        mean = x.data.mean(axis=axes, dtype=np.float64)
        var = x.data.var(axis=axes, dtype=np.float64)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean.astype(running_mean.dtype)
        running_var *= 1.0 - momentum
        running_var += momentum * var.astype(running_var.dtype)
    else:
        mean = running_mean.astype(np.float64)
        var = running_var.astype(np.float64)

    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    mean = mean.astype(x.dtype)
    xhat = (x.data - mean.reshape(shape)) * inv.reshape(shape)
    out = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)
    n = x.size // c

    def bwd(g):
        if beta.requires_grad:
            _accumulate(beta, g.sum(axis=axes))
        if gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=axes))
        if x.requires_grad:
            gs = g * gamma.data.reshape(shape)
            if training:
                gmean = gs.mean(axis=axes, keepdims=True)
                gxhat = (gs * xhat).mean(axis=axes, keepdims=True)
                gx = inv.reshape(shape) * (gs - gmean - xhat * gxhat)
            else:
                gx = gs * inv.reshape(shape)
            _accumulate(x, gx.astype(x.dtype))

    return _make(out, (x, gamma, beta), bwd, "batch_norm")


def avg_pool1d(x, k: int) -> Tensor:
    """Non-overlapping mean pooling along the length axis of (B,C,L)."""
    x = as_tensor(x)
    b, c, l = x.shape
    _check(l % k == 0, "avg_pool1d", f"length {l} not divisible by window {k}")
    out = x.data.reshape(b, c, l // k, k).mean(axis=3, dtype=np.float64).astype(x.dtype)

    def bwd(g):
        gx = np.repeat(g / k, k, axis=2)
        _accumulate(x, gx)

    return _make(out, (x,), bwd, "avg_pool1d")


def global_avg_pool(x) -> Tensor:
    """Mean over all trailing spatial axes of (B,C,...) -> (B,C)."""
    x = as_tensor(x)
    axes = tuple(range(2, x.ndim))
    return x.mean(axis=axes) if axes else x


def attention(q, k, v) -> Tensor:
    """Single-head scaled dot-product attention: softmax(QK^T/sqrt(d)) V.

    Shapes (..., L, D); composed from tracked primitives so the gradient
    needs no dedicated backward.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    d = q.shape[-1]
    _check(k.shape[-1] == d, "attention", f"key dim {k.shape[-1]} != query dim {d}")
    axes = tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2)
    scores = matmul(q, transpose(k, axes)) * (1.0 / math.sqrt(d))
    return matmul(softmax(scores, axis=-1), v)
