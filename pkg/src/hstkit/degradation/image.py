"""8-bit images and their conversion to unit-interval reals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(x: np.ndarray) -> np.ndarray:
    """Reals on the 0..255 scale -> uint8 (round half away from zero, clamp)."""
    return np.clip(round_half_away(np.asarray(x, dtype=np.float64)), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Image:
    """``pixels`` is ``(H, W, C)`` uint8 with ``C`` in {1, 3}."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[..., None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"image must be HxWx1 or HxWx3, got {px.shape}")
        if px.dtype != np.uint8:
            raise TypeError(f"image samples must be uint8, got {px.dtype}")
        if min(px.shape[:2]) < 1:
            raise ValueError("image extents must be >= 1")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple:
        return self.pixels.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)

    def to_float(self) -> np.ndarray:
        """``(H, W, C)`` float64 in [0, 1]."""
        return self.pixels.astype(np.float64) / 255.0

    @classmethod
    def from_float(cls, x: np.ndarray) -> "Image":
        return cls(quantize(np.asarray(x, dtype=np.float64) * 255.0))

    def to_tensor_array(self, dtype=np.float32) -> np.ndarray:
        """``(1, C, H, W)`` array in [0, 1] for the network."""
        return self.to_float().transpose(2, 0, 1)[None].astype(dtype)

    @classmethod
    def from_tensor_array(cls, x: np.ndarray) -> "Image":
        x = np.asarray(x)
        if x.ndim == 4:
            if x.shape[0] != 1:
                raise ValueError("expected a single image batch")
            x = x[0]
        return cls.from_float(x.transpose(1, 2, 0))

    def crop(self, top: int, left: int, h: int, w: int) -> "Image":
        return Image(self.pixels[top:top + h, left:left + w].copy())

    def crop_to_multiple(self, m: int) -> "Image":
        return self.crop(0, 0, self.height - self.height % m, self.width - self.width % m)
