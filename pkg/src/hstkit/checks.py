"""Finite-difference verification of the full network's gradients."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .metrics import charbonnier_loss
from .model import HSTConfig, build, crop_output, forward, pad_input, reduced, stage_plan
from .tensor.gradcheck import STEP, relative_error


def model_gradcheck(cfg: HSTConfig | None = None, seed: int = 0, size: tuple = (8, 8),
                    h: float = STEP, max_entries: int | None = None) -> list[tuple[str, float]]:
    """Relative error per parameter tensor for Charbonnier(forward(x), y).

    Runs in 64-bit.  Finite differences restart from the cached input of
    the stage that owns the perturbed parameter, which is the same
    computation as a full forward because upstream stages do not depend on
    it.
    """
    cfg = cfg or reduced()
    rng = np.random.default_rng(seed)
    params = build(cfg, seed, np.float64)
    # generic values for zero/one-initialized entries so no gradient is trivially structured
    for name, t in params.items():
        if name.endswith(("bias", "beta")):
            t.data[...] = 0.05 * rng.standard_normal(t.shape)
        elif name.endswith("gamma"):
            t.data[...] = 1.0 + 0.1 * rng.standard_normal(t.shape)
    H, W = size
    img = T.Tensor(rng.random((1, cfg.in_channels, H, W)))
    target = T.Tensor(rng.random((1, cfg.out_channels, cfg.scale * H, cfg.scale * W)))

    params.zero_grad()
    T.backward(charbonnier_loss(forward(img, params, cfg), target), inputs=params.tensors())

    plan = stage_plan(cfg)
    states = []
    with T.no_grad():
        state = {"img": pad_input(img, cfg)}
        for st in plan:
            states.append(state)
            state = st.run(state, params, cfg)

    def loss_from(k):
        s = states[k]
        for st in plan[k:]:
            s = st.run(s, params, cfg)
        return float(charbonnier_loss(crop_output(s["out"], H, W, cfg), target).data)

    results = []
    with T.no_grad():
        for name, t in params.items():
            k = next(i for i, st in enumerate(plan) if name.startswith(st.prefix))
            flat = t.data.reshape(-1)
            idx = np.arange(flat.size)
            if max_entries is not None and flat.size > max_entries:
                idx = rng.choice(flat.size, size=max_entries, replace=False)
            num = np.empty(len(idx))
            for n, i in enumerate(idx):
                orig = flat[i]
                flat[i] = orig + h
                fp = loss_from(k)
                flat[i] = orig - h
                fm = loss_from(k)
                flat[i] = orig
                num[n] = (fp - fm) / (2 * h)
            results.append((name, relative_error(t.grad.reshape(-1)[idx], num)))
    params.zero_grad()
    return results
