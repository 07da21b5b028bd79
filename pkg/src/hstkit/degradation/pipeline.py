"""Downsample-then-compress degradation with optional plugin stages."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .image import Image, quantize
from .jpeg import jpeg_roundtrip
from .resize import bicubic_resize

STAGES: dict = {}


def register_stage(name: str):
    """Class decorator adding a plugin stage under ``name``."""
    def deco(cls):
        if name in STAGES:
            raise ValueError(f"stage {name!r} already registered")
        cls.kind = name
        STAGES[name] = cls
        return cls
    return deco


class Stage:
    """A plugin maps ``(Image, Generator) -> Image``; parameters are dataclass fields."""

    kind = "?"

    def apply(self, img: Image, rng: np.random.Generator) -> Image:  # pragma: no cover
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.__dict__}


@register_stage("blur")
@dataclass(frozen=True)
class GaussianBlur(Stage):
    sigma: float = 1.0

    def apply(self, img, rng):
        x = img.pixels.astype(np.float64)
        out = np.stack([gaussian_filter(x[..., c], self.sigma, mode="nearest")
                        for c in range(img.channels)], axis=-1)
        return Image(quantize(out))


@register_stage("noise")
@dataclass(frozen=True)
class GaussianNoise(Stage):
    sigma: float = 5.0  # on the 0..255 scale

    def apply(self, img, rng):
        x = img.pixels.astype(np.float64)
        return Image(quantize(x + rng.normal(0.0, self.sigma, size=x.shape)))


@register_stage("jpeg")
@dataclass(frozen=True)
class JpegStage(Stage):
    quality: int = 30

    def apply(self, img, rng):
        return jpeg_roundtrip(img, self.quality)


@register_stage("realsr")
@dataclass(frozen=True)
class RandomRealSR(Stage):
    """Blur, noise and JPEG with parameters drawn per call, in shuffled order."""

    blur_sigma: tuple = (0.2, 3.0)
    noise_sigma: tuple = (0.0, 25.0)
    jpeg_quality: tuple = (30, 95)

    def __post_init__(self):
        for name in ("blur_sigma", "noise_sigma", "jpeg_quality"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def draw(self, rng: np.random.Generator) -> list:
        stages = [GaussianBlur(float(rng.uniform(*self.blur_sigma))),
                  GaussianNoise(float(rng.uniform(*self.noise_sigma))),
                  JpegStage(int(rng.integers(self.jpeg_quality[0], self.jpeg_quality[1] + 1)))]
        return [stages[i] for i in rng.permutation(3)]

    def apply(self, img, rng):
        for st in self.draw(rng):
            img = st.apply(img, rng)
        return img

    def to_dict(self) -> dict:
        return {"kind": self.kind, "blur_sigma": list(self.blur_sigma),
                "noise_sigma": list(self.noise_sigma), "jpeg_quality": list(self.jpeg_quality)}


def stage_from_dict(d: dict) -> Stage:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in STAGES:
        raise ValueError(f"unknown degradation stage {kind!r}; known: {sorted(STAGES)}")
    return STAGES[kind](**d)


@dataclass(frozen=True)
class DegradationSpec:
    scale: int = 4
    antialias: bool = True
    jpeg_quality: int | None = 10
    extra_stages: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "extra_stages", tuple(
            s if isinstance(s, Stage) else stage_from_dict(s) for s in self.extra_stages))
        if not isinstance(self.scale, (int, np.integer)) or self.scale < 1:
            raise ValueError(f"scale must be an integer >= 1, got {self.scale!r}")
        q = self.jpeg_quality
        if q is not None and (isinstance(q, bool) or not isinstance(q, (int, np.integer)) or not 1 <= q <= 100):
            raise ValueError(f"jpeg_quality must be in [1, 100] or None, got {q!r}")

    def to_dict(self) -> dict:
        return {"scale": int(self.scale), "kernel": "bicubic", "a": -0.5,
                "antialias": bool(self.antialias),
                "jpeg_quality": None if self.jpeg_quality is None else int(self.jpeg_quality),
                "extra_stages": [s.to_dict() for s in self.extra_stages]}

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        d = {k: v for k, v in d.items() if k not in ("kernel", "a")}
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def degrade(hr: Image, spec: DegradationSpec, seed: int = 0) -> Image:
    """HR -> LR: bicubic 1/scale, JPEG round trip, then extra stages in order."""
    s = spec.scale
    if hr.height % s or hr.width % s:
        raise ValueError(f"HR extents {hr.height}x{hr.width} not divisible by scale {s}; crop first")
    lr = bicubic_resize(hr, hr.height // s, hr.width // s, antialias=spec.antialias)
    if spec.jpeg_quality is not None:
        lr = jpeg_roundtrip(lr, spec.jpeg_quality)
    rng = np.random.default_rng(seed)
    for stage in spec.extra_stages:
        lr = stage.apply(lr, rng)
    return lr
