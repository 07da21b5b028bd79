"""Training pairs, aligned patch sampling and dihedral augmentation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..degradation import DegradationSpec, Image, degrade


@dataclass(frozen=True)
class Pair:
    name: str
    hr: Image
    lr: Image


def make_pairs(hr_items, spec: DegradationSpec, seed: int = 0) -> list[Pair]:
    """Degrade each ``(name, Image)`` after cropping it to a multiple of the scale.

    Extra-stage randomness is seeded per image from ``seed`` and its index.
    """
    out = []
    for i, (name, hr) in enumerate(hr_items):
        hr = hr.crop_to_multiple(spec.scale)
        out.append(Pair(name, hr, degrade(hr, spec, seed=seed * 1_000_003 + i)))
    return out


def dihedral(a: np.ndarray, k: int, axes: tuple = (0, 1)) -> np.ndarray:
    """Transform ``k`` in 0..7: optional mirror (k >= 4) then ``k % 4`` quarter turns."""
    if k >= 4:
        a = np.flip(a, axis=axes[1])
    return np.rot90(a, k % 4, axes=axes)


def inverse_dihedral(a: np.ndarray, k: int, axes: tuple = (0, 1)) -> np.ndarray:
    a = np.rot90(a, -(k % 4), axes=axes)
    if k >= 4:
        a = np.flip(a, axis=axes[1])
    return a


@dataclass
class Batch:
    lr: np.ndarray  # (B, 3, p, p)
    hr: np.ndarray  # (B, 3, s*p, s*p)
    picks: list  # (pair index, top, left, transform) per sample, LR coordinates


def sample_batch(pairs: list[Pair], stage, rng: np.random.Generator, dtype=np.float32) -> Batch:
    """Aligned random crops; HR window is the LR window scaled by ``s``."""
    if not pairs:
        raise ValueError("cannot sample from an empty dataset")
    p = stage.patch_size
    eligible = []
    for i, pr in enumerate(pairs):
        if pr.lr.height < p or pr.lr.width < p:
            warnings.warn(f"skipping {pr.name}: LR {pr.lr.height}x{pr.lr.width} smaller than patch {p}",
                          stacklevel=2)
        else:
            eligible.append(i)
    if not eligible:
        raise ValueError(f"no image is large enough for {p}x{p} LR patches")
    lrs, hrs, picks = [], [], []
    for _ in range(stage.batch_size):
        i = eligible[int(rng.integers(len(eligible)))]
        pr = pairs[i]
        s = pr.hr.height // pr.lr.height
        top = int(rng.integers(pr.lr.height - p + 1))
        left = int(rng.integers(pr.lr.width - p + 1))
        k = int(rng.integers(8)) if stage.augment else 0
        lp = pr.lr.pixels[top:top + p, left:left + p]
        hp = pr.hr.pixels[s * top:s * (top + p), s * left:s * (left + p)]
        lrs.append(dihedral(lp, k))
        hrs.append(dihedral(hp, k))
        picks.append((i, top, left, k))
    to = lambda xs: (np.stack(xs).astype(np.float64) / 255.0).transpose(0, 3, 1, 2).astype(dtype)
    return Batch(to(lrs), to(hrs), picks)
