"""Separable bicubic resampling (a = -0.5) with optional antialiasing."""

from __future__ import annotations

import numpy as np

from .image import Image, quantize


def cubic(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x <= 2, far, 0.0))


def resize_weights(n_in: int, n_out: int, antialias: bool = True) -> np.ndarray:
    """Dense ``(n_out, n_in)`` matrix; each row sums to 1.

    Output sample ``i`` sits at input coordinate ``(i + 0.5) / s - 0.5``. Taps
    falling outside the input are clamped to the nearest edge sample.
    """
    if n_in < 1 or n_out < 1:
        raise ValueError("resize extents must be >= 1")
    s = n_out / n_in
    stretch = 1.0 / s if (antialias and s < 1) else 1.0
    half = 2.0 * stretch
    centers = (np.arange(n_out) + 0.5) / s - 0.5
    first = np.floor(centers - half).astype(np.int64)
    taps = int(np.ceil(2 * half)) + 2
    idx = first[:, None] + np.arange(taps)[None, :]
    w = cubic((centers[:, None] - idx) / stretch)
    w /= w.sum(axis=1, keepdims=True)
    mat = np.zeros((n_out, n_in))
    rows = np.broadcast_to(np.arange(n_out)[:, None], idx.shape)
    np.add.at(mat, (rows, np.clip(idx, 0, n_in - 1)), w)
    return mat


def resize_array(x: np.ndarray, out_h: int, out_w: int, antialias: bool = True) -> np.ndarray:
    """Resample a real ``(H, W, C)`` array; stays in 64-bit, no rounding."""
    x = np.asarray(x, dtype=np.float64)
    wh = resize_weights(x.shape[0], out_h, antialias)
    ww = resize_weights(x.shape[1], out_w, antialias)
    return np.einsum("ih,hwc,jw->ijc", wh, x, ww, optimize=True)


def bicubic_resize(img: Image, out_h: int, out_w: int, antialias: bool = True) -> Image:
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output extents must be >= 1, got {out_h}x{out_w}")
    if (out_h, out_w) == (img.height, img.width):
        return Image(img.pixels.copy())
    return Image(quantize(resize_array(img.pixels, out_h, out_w, antialias)))
