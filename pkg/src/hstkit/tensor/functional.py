"""Neural-network primitives built on :mod:`hstkit.tensor.core`.

Layouts: convolutions take ``(B, C, H, W)``; windowed attention takes
``(B, H, W, C)`` feature maps and ``(windows, tokens, C)`` sequences.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .core import (
    ShapeError,
    Tensor,
    add,
    make_node,
    matmul,
    mul,
    reshape,
    roll,
    transpose,
)

# additive logit for masked-out attention pairs
MASK_VALUE = -100.0


class ConfigError(ValueError):
    """Invalid hyper-parameter combination."""


def _zero_pad(a: np.ndarray, p: int) -> np.ndarray:
    B, C, H, W = a.shape
    out = np.zeros((B, C, H + 2 * p, W + 2 * p), dtype=a.dtype)
    out[:, :, p:p + H, p:p + W] = a
    return out


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding (im2col + matmul)."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and weight, got {x.shape}, {weight.shape}")
    B, cin, H, W = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise ShapeError(f"conv2d channel mismatch: input has {cin}, weight expects {wcin}")
    if kh > H + 2 * padding or kw > W + 2 * padding:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {H}x{W} (+{padding})")
    s, p = stride, padding
    xp = _zero_pad(x.data, p) if p else x.data
    Ho = (H + 2 * p - kh) // s + 1
    Wo = (W + 2 * p - kw) // s + 1
    cols = np.empty((B, cin, kh, kw, Ho, Wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + s * (Ho - 1) + 1:s, j:j + s * (Wo - 1) + 1:s]
    cols = cols.reshape(B, cin * kh * kw, Ho * Wo)
    w2 = weight.data.reshape(cout, -1)
    out = w2 @ cols
    if bias is not None:
        out += bias.data[:, None]
    out = out.reshape(B, cout, Ho, Wo)

    def bw(g):
        g2 = g.reshape(B, cout, Ho * Wo)
        gw = gx = gb = None
        if weight.requires_grad:
            gw = np.einsum("bok,bck->oc", g2, cols, optimize=True).reshape(weight.shape)
        if x.requires_grad:
            gcols = (w2.T @ g2).reshape(B, cin, kh, kw, Ho, Wo)
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + s * (Ho - 1) + 1:s, j:j + s * (Wo - 1) + 1:s] += gcols[:, :, i, j]
            gx = gxp[:, :, p:p + H, p:p + W] if p else gxp
        if bias is not None and bias.requires_grad:
            gb = g2.sum(axis=(0, 2))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_node(out, parents, bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last axis: ``x @ weight.T + bias``."""
    dout, din = weight.shape
    if x.shape[-1] != din:
        raise ShapeError(f"linear expects last extent {din}, got {x.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is not None:
        out = out + bias.data

    def bw(g):
        g2 = g.reshape(-1, dout)
        gx = g @ wd if x.requires_grad else None
        gw = g2.T @ xd.reshape(-1, din) if weight.requires_grad else None
        gb = g2.sum(axis=0) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_node(out, parents, bw)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * gamma.data + beta.data

    def bw(g):
        lead = tuple(range(g.ndim - 1))
        ggam = (g * xhat).sum(axis=lead)
        gbet = g.sum(axis=lead)
        gh = g * gamma.data
        gx = rstd * (gh - gh.mean(axis=-1, keepdims=True)
                     - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, ggam, gbet

    return make_node(out, (x, gamma, beta), bw)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, ``x * Phi(x)``."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * xd * xd) / math.sqrt(2.0 * math.pi)
    return make_node(xd * cdf, (x,), lambda g: (g * (cdf + xd * pdf),))


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, max-shifted for stability."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_node(y, (x,), bw)


# ---------------------------------------------------------------------------
# windowing


def window_partition(x: Tensor, window: int) -> Tensor:
    """``(B, H, W, C)`` -> ``(B * H/M * W/M, M, M, C)``, windows in row-major order."""
    B, H, W, C = x.shape
    M = window
    if H % M or W % M:
        raise ShapeError(f"window {M} does not divide {H}x{W}; pad the feature map first")
    t = reshape(x, (B, H // M, M, W // M, M, C))
    t = transpose(t, (0, 1, 3, 2, 4, 5))
    return reshape(t, (-1, M, M, C))


def window_reverse(windows: Tensor, window: int, H: int, W: int) -> Tensor:
    M = window
    if H % M or W % M:
        raise ShapeError(f"window {M} does not divide {H}x{W}; pad the feature map first")
    B = windows.shape[0] // ((H // M) * (W // M))
    t = reshape(windows, (B, H // M, W // M, M, M, -1))
    t = transpose(t, (0, 1, 3, 2, 4, 5))
    return reshape(t, (B, H, W, -1))


def cyclic_shift(x: Tensor, dy: int, dx: int) -> Tensor:
    """Toroidal roll of the spatial axes of a ``(B, H, W, C)`` map."""
    return roll(x, (dy, dx), (1, 2))


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Depth-to-space: ``(B, C*r*r, H, W)`` -> ``(B, C, H*r, W*r)``."""
    B, Cr, H, W = x.shape
    if Cr % (r * r):
        raise ShapeError(f"pixel_shuffle: {Cr} channels not divisible by r^2={r * r}")
    C = Cr // (r * r)
    t = reshape(x, (B, C, r, r, H, W))
    t = transpose(t, (0, 1, 4, 2, 5, 3))
    return reshape(t, (B, C, H * r, W * r))


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    B, C, Hr, Wr = x.shape
    if Hr % r or Wr % r:
        raise ShapeError(f"pixel_unshuffle: {Hr}x{Wr} not divisible by {r}")
    H, W = Hr // r, Wr // r
    t = reshape(x, (B, C, H, r, W, r))
    t = transpose(t, (0, 1, 3, 5, 2, 4))
    return reshape(t, (B, C * r * r, H, W))


# ---------------------------------------------------------------------------
# attention


def relative_position_index(window: int) -> np.ndarray:
    """``(M*M, M*M)`` index into a ``(2M-1)^2`` offset table."""
    M = window
    ys, xs = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
    coords = np.stack([ys.ravel(), xs.ravel()])  # 2, N
    rel = coords[:, :, None] - coords[:, None, :] + (M - 1)
    return rel[0] * (2 * M - 1) + rel[1]


def shifted_window_mask(H: int, W: int, window: int, shift: int) -> np.ndarray:
    """Additive mask ``(nW, N, N)`` separating regions that wrapped around."""
    M, s = window, shift
    labels = np.zeros((H, W), dtype=np.int64)
    cnt = 0
    for hs in (slice(0, -M), slice(-M, -s), slice(-s, None)):
        for ws in (slice(0, -M), slice(-M, -s), slice(-s, None)):
            labels[hs, ws] = cnt
            cnt += 1
    win = labels.reshape(H // M, M, W // M, M).transpose(0, 2, 1, 3).reshape(-1, M * M)
    diff = win[:, None, :] != win[:, :, None]
    return np.where(diff, MASK_VALUE, 0.0)


def multi_head_attention(x: Tensor, qkv_weight: Tensor, qkv_bias: Tensor,
                         proj_weight: Tensor, proj_bias: Tensor, heads: int,
                         rel_bias: Tensor | None = None, mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention inside each window.

    ``x`` is ``(Nw, N, C)``; ``rel_bias`` is ``(heads, N, N)``; ``mask`` is an
    additive ``(nW, N, N)`` array where ``Nw`` is a multiple of ``nW``.
    """
    Nw, N, C = x.shape
    if heads < 1 or C % heads:
        raise ConfigError(f"heads={heads} must divide channel count {C}")
    d = C // heads
    qkv = linear(x, qkv_weight, qkv_bias)
    qkv = transpose(reshape(qkv, (Nw, N, 3, heads, d)), (2, 0, 3, 1, 4))  # 3, Nw, h, N, d
    q = _select(qkv, 0)
    k = _select(qkv, 1)
    v = _select(qkv, 2)
    logits = matmul(mul(q, 1.0 / math.sqrt(d)), transpose(k, (0, 1, 3, 2)))
    if rel_bias is not None:
        logits = add(logits, rel_bias)
    if mask is not None:
        nW = mask.shape[0]
        m = np.asarray(mask, dtype=x.dtype)[None, :, None]
        logits = reshape(add(reshape(logits, (Nw // nW, nW, heads, N, N)), m), (Nw, heads, N, N))
    attn = softmax(logits)
    out = transpose(matmul(attn, v), (0, 2, 1, 3))
    return linear(reshape(out, (Nw, N, C)), proj_weight, proj_bias)


def _select(x: Tensor, i: int) -> Tensor:
    shape = x.shape

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[i] = g
        return (full,)

    return make_node(x.data[i], (x,), bw)
