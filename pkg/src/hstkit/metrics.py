"""Training losses (on tensors) and image-quality metrics (on 8-bit images)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor

CHARBONNIER_EPS = 1e-9


def _check_pair(sr: Tensor, hr: Tensor) -> Tensor:
    if not isinstance(hr, Tensor):
        hr = Tensor(np.asarray(hr, dtype=sr.dtype))
    if sr.shape != hr.shape:
        raise ShapeError(f"loss operands differ in shape: {sr.shape} vs {hr.shape}")
    return hr


def l1_loss(sr: Tensor, hr: Tensor) -> Tensor:
    hr = _check_pair(sr, hr)
    return T.mean(T.absolute(T.sub(sr, hr)))


def charbonnier_loss(sr: Tensor, hr: Tensor, eps: float = CHARBONNIER_EPS) -> Tensor:
    """Mean over elements of ``sqrt(diff^2 + eps)``."""
    if eps <= 0:
        raise ValueError("charbonnier eps must be positive")
    hr = _check_pair(sr, hr)
    d = T.sub(sr, hr)
    return T.mean(T.sqrt(T.add(T.square(d), eps)))


def mse_loss(sr: Tensor, hr: Tensor) -> Tensor:
    hr = _check_pair(sr, hr)
    return T.mean(T.square(T.sub(sr, hr)))


@dataclass(frozen=True)
class LossConfig:
    kind: str = "l1"
    epsilon: float = CHARBONNIER_EPS

    def __post_init__(self):
        if self.kind not in ("l1", "charbonnier", "mse"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "charbonnier" and not self.epsilon > 0:
            raise ValueError("charbonnier epsilon must be > 0")

    def __call__(self, sr: Tensor, hr: Tensor) -> Tensor:
        if self.kind == "l1":
            return l1_loss(sr, hr)
        if self.kind == "mse":
            return mse_loss(sr, hr)
        return charbonnier_loss(sr, hr, self.epsilon)


# ---------------------------------------------------------------------------
# metrics on 8-bit RGB


def _samples(img) -> np.ndarray:
    arr = getattr(img, "pixels", img)
    return np.asarray(arr, dtype=np.float64)


def psnr_rgb(a, b) -> float:
    """PSNR in dB over all RGB samples; ``math.inf`` for identical images."""
    x, y = _samples(a), _samples(b)
    if x.shape != y.shape:
        raise ShapeError(f"PSNR operands differ in geometry: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable 'valid' correlation with a symmetric 1-D kernel
    k = len(g)
    H, W = img.shape
    rows = sum(g[i] * img[i:H - k + 1 + i, :] for i in range(k))
    return sum(g[j] * rows[:, j:W - k + 1 + j] for j in range(k))


def ssim(a, b, data_range: float = 255.0, win: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean single-scale SSIM, Gaussian window, averaged over channels."""
    x, y = _samples(a), _samples(b)
    if x.shape != y.shape:
        raise ShapeError(f"SSIM operands differ in geometry: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    if min(x.shape[:2]) < win:
        raise ShapeError(f"SSIM needs both extents >= {win}, got {x.shape[:2]}")
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    g = gaussian_window(win, sigma)
    vals = []
    for c in range(x.shape[2]):
        xc, yc = x[..., c], y[..., c]
        mx, my = _filter_valid(xc, g), _filter_valid(yc, g)
        sxx = _filter_valid(xc * xc, g) - mx * mx
        syy = _filter_valid(yc * yc, g) - my * my
        sxy = _filter_valid(xc * yc, g) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))
