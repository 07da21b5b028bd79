"""Single-pass and self-ensemble inference, and dataset evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..degradation import DegradationSpec, Image, degrade
from ..metrics import psnr_rgb, ssim
from .data import dihedral, inverse_dihedral


def _run(model, x: np.ndarray) -> np.ndarray:
    """``(H, W, C)`` reals -> model output as ``(H', W', C)`` reals."""
    out = model(np.ascontiguousarray(x.transpose(2, 0, 1)[None]))
    return np.asarray(out, dtype=np.float64)[0].transpose(1, 2, 0)


def infer_array(model, lr: Image) -> np.ndarray:
    return _run(model, lr.to_float())


def ensemble_array(model, lr: Image) -> np.ndarray:
    """Mean over the 8 dihedral transforms, each undone on the output; unquantized."""
    x = lr.to_float()
    acc = None
    for k in range(8):
        y = inverse_dihedral(_run(model, dihedral(x, k)), k)
        acc = y if acc is None else acc + y
    return acc / 8.0


def infer(model, lr: Image) -> Image:
    return Image.from_float(infer_array(model, lr))


def self_ensemble_infer(model, lr: Image) -> Image:
    return Image.from_float(ensemble_array(model, lr))


@dataclass
class EvalReport:
    rows: list  # (name, psnr, ssim or None), sorted by name

    @property
    def mean_psnr(self) -> float:
        vals = [r[1] for r in self.rows]
        if not vals:
            return math.nan
        return math.inf if any(math.isinf(v) for v in vals) else float(np.mean(vals))

    @property
    def mean_ssim(self) -> float:
        vals = [r[2] for r in self.rows if r[2] is not None]
        return float(np.mean(vals)) if vals else math.nan

    def to_dict(self) -> dict:
        return {"rows": [{"name": n, "psnr": p, "ssim": s} for n, p, s in self.rows],
                "mean_psnr": self.mean_psnr, "mean_ssim": self.mean_ssim}


def score(sr: Image, hr: Image):
    s = ssim(sr, hr) if min(hr.height, hr.width) >= 11 else None
    return psnr_rgb(sr, hr), s


def evaluate(model, hr_items, spec: DegradationSpec, ensemble: bool = False, seed: int = 0) -> EvalReport:
    """Degrade each HR, super-resolve, score against the (scale-cropped) HR."""
    rows = []
    for i, (name, hr) in enumerate(sorted(hr_items, key=lambda t: t[0])):
        hr = hr.crop_to_multiple(spec.scale)
        lr = degrade(hr, spec, seed=seed * 1_000_003 + i)
        sr = self_ensemble_infer(model, lr) if ensemble else infer(model, lr)
        rows.append((name, *score(sr, hr)))
    return EvalReport(rows)
