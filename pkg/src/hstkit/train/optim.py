"""Adam and the milestone learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MissingGradientError(RuntimeError):
    pass


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def to_arrays(self) -> dict:
        out = {}
        for n in self.m:
            out[f"adam.m.{n}"] = self.m[n]
            out[f"adam.v.{n}"] = self.v[n]
        return out

    def to_meta(self) -> dict:
        return {"beta1": self.beta1, "beta2": self.beta2, "eps": self.eps, "step": self.step}

    @classmethod
    def restore(cls, meta: dict, arrays: dict) -> "AdamState":
        st = cls(meta["beta1"], meta["beta2"], meta["eps"], int(meta["step"]))
        for key, a in arrays.items():
            if key.startswith("adam.m."):
                st.m[key[7:]] = a.copy()
            elif key.startswith("adam.v."):
                st.v[key[7:]] = a.copy()
        return st


def adam_step(params, state: AdamState, lr: float, grads: dict | None = None) -> None:
    """One bias-corrected Adam update, in place.

    ``grads`` maps parameter names to arrays; when omitted each tensor's
    ``.grad`` is used.
    """
    names = list(params)
    gs = {}
    for n in names:
        g = grads.get(n) if grads is not None else params[n].grad
        if g is None:
            raise MissingGradientError(f"no gradient for parameter {n!r}")
        gs[n] = g
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for n in names:
        p = params[n]
        g = gs[n]
        if n not in state.m:
            state.m[n] = np.zeros_like(p.data)
            state.v[n] = np.zeros_like(p.data)
        m, v = state.m[n], state.v[n]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.data.dtype)


def clip_grad_norm(params, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(params[n].grad ** 2)) for n in params)))
    if total > max_norm:
        k = max_norm / (total + 1e-12)
        for n in params:
            params[n].grad = params[n].grad * k
    return total


def lr_at(stage, it: int) -> float:
    """``lr_initial`` halved once per milestone ``<= it``."""
    drops = sum(1 for m in stage.lr_milestones if m <= it)
    return stage.lr_initial * 0.5 ** drops
