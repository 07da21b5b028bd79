"""Stage execution: optimization, logging, validation, checkpoints, resume."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .. import tensor as T
from ..model import Checkpoint, SRModel, load_checkpoint, save_checkpoint
from ..tensor import Tensor
from .data import Pair, make_pairs, sample_batch
from .infer import infer, score
from .optim import AdamState, adam_step, clip_grad_norm, lr_at

VAL_IMAGES = 5


class NonFiniteLossError(FloatingPointError):
    pass


class RunSink:
    """Output directory for one run: ``metrics.jsonl`` plus checkpoints.

    With ``out_dir=None`` records are only kept in memory and checkpoints
    are not written.
    """

    def __init__(self, out_dir=None):
        self.out_dir = out_dir
        self.records: list = []
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)

    def log(self, rec: dict) -> None:
        self.records.append(rec)
        if self.out_dir is not None:
            with open(os.path.join(self.out_dir, "metrics.jsonl"), "a") as f:
                f.write(json.dumps(rec, sort_keys=True) + "\n")

    def path(self, name: str) -> str | None:
        return None if self.out_dir is None else os.path.join(self.out_dir, name)


@dataclass
class StageResult:
    model: SRModel
    checkpoint: str | None
    records: list = field(default_factory=list)
    adam: AdamState | None = None


def validate(model, pairs: list[Pair]) -> tuple[float, float]:
    """Mean PSNR/SSIM over the first few pairs (name order)."""
    subset = sorted(pairs, key=lambda p: p.name)[:VAL_IMAGES]
    ps, ss = [], []
    for pr in subset:
        p, s = score(infer(model, pr.lr), pr.hr)
        ps.append(p)
        if s is not None:
            ss.append(s)
    psnr = math.inf if any(math.isinf(p) for p in ps) else float(np.mean(ps))
    return psnr, float(np.mean(ss)) if ss else math.nan


def _snapshot(model, adam, stage, it, rng, seed) -> Checkpoint:
    meta = {"stage": stage.to_dict(), "iteration": it, "seed": seed,
            "adam": adam.to_meta(), "rng": rng.bit_generator.state}
    params = model.params.copy()
    return Checkpoint(model.config, params, {k: v.copy() for k, v in adam.to_arrays().items()}, meta)


def _load_init(model: SRModel, path: str) -> None:
    ck = load_checkpoint(path, dtype=model.params.dtype)
    if ck.config != model.config:
        raise ValueError(f"init checkpoint {path} was built for a different architecture")
    for n, t in ck.params.items():
        if n not in model.params or model.params[n].shape != t.shape:
            raise ValueError(f"init checkpoint {path} has mismatched parameter {n}")
        model.params[n].data = t.data.copy()


def run_stage(stage, model: SRModel, pairs: list[Pair], sink: RunSink | None = None,
              val_pairs: list[Pair] | None = None, seed: int = 0,
              resume_from: str | None = None, stop_at: int | None = None) -> StageResult:
    """Run ``stage.total_iters`` Adam steps (or up to ``stop_at``) on ``pairs``.

    The model's parameters are updated in place.
    ``resume_from`` continues from a checkpoint written by this function,
    restoring parameters, optimizer moments, iteration and sampler state.
    """
    sink = sink or RunSink()
    dtype = model.params.dtype
    adam = AdamState()
    rng = np.random.default_rng(seed)
    start = 0
    if resume_from is not None:
        ck = load_checkpoint(resume_from, dtype=dtype)
        model = SRModel(ck.config, ck.params)
        adam = AdamState.restore(ck.meta["adam"], ck.extra)
        rng.bit_generator.state = ck.meta["rng"]
        start = int(ck.meta["iteration"])
    elif stage.init_from:
        _load_init(model, stage.init_from)

    end = stage.total_iters if stop_at is None else min(stop_at, stage.total_iters)
    params = model.params
    for it in range(start, end):
        lr = lr_at(stage, it)
        batch = sample_batch(pairs, stage, rng, dtype=dtype)
        sr = model.forward(Tensor(batch.lr))
        loss = stage.loss(sr, Tensor(batch.hr))
        lval = float(loss.item())
        if not math.isfinite(lval):
            dump = sink.path(f"{stage.name}_nonfinite_iter{it}.npz")
            if dump is not None:
                np.savez(dump, lr=batch.lr, hr=batch.hr, picks=np.array(batch.picks), iteration=it)
            raise NonFiniteLossError(f"{stage.name}: loss {lval} at iteration {it}; batch dumped to {dump}")
        params.zero_grad()
        T.backward(loss, inputs=params.tensors())
        gnorm = clip_grad_norm(params, stage.grad_clip) if stage.grad_clip else None
        adam_step(params, adam, lr)
        params.zero_grad()

        done = it + 1
        rec = None
        if stage.log_every and (done % stage.log_every == 0 or done == end):
            rec = {"stage": stage.name, "iter": done, "lr": lr, "loss": lval}
            if gnorm is not None:
                rec["grad_norm"] = gnorm
        if stage.val_every and val_pairs and (done % stage.val_every == 0 or done == end):
            rec = rec or {"stage": stage.name, "iter": done, "lr": lr, "loss": lval}
            rec["val_psnr"], rec["val_ssim"] = validate(model, val_pairs)
        if rec is not None:
            sink.log(rec)
        if stage.ckpt_every and done % stage.ckpt_every == 0 and done != end:
            p = sink.path(f"{stage.name}_iter{done:07d}.ckpt")
            if p is not None:
                save_checkpoint(p, _snapshot(model, adam, stage, done, rng, seed))

    final = sink.path(f"{stage.name}_final.ckpt" if end == stage.total_iters else f"{stage.name}_iter{end:07d}.ckpt")
    if final is not None:
        save_checkpoint(final, _snapshot(model, adam, stage, end, rng, seed))
    return StageResult(model, final, sink.records, adam)


def run_chain(stages, model: SRModel, hr_items, out_dir, val_items=None, seed: int = 0) -> dict:
    """Run stages in order; ``init_from`` may name an earlier stage."""
    finals: dict = {}
    results = {}
    for st in stages:
        if st.init_from and st.init_from in finals:
            st = replace(st, init_from=finals[st.init_from])
        model = SRModel(model.config, model.params.copy())
        pairs = make_pairs(hr_items, st.degradation, seed)
        vals = make_pairs(val_items, st.degradation, seed + 1) if val_items else None
        res = run_stage(st, model, pairs, RunSink(os.path.join(out_dir, st.name)), vals, seed)
        finals[st.name] = res.checkpoint
        results[st.name] = res
        model = res.model
    return results
