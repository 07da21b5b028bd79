"""HST forward pass: extraction, RSTB enhancement, fusion, x4 reconstruction."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from .. import tensor as T
from ..tensor import ShapeError, Tensor
from .config import HSTConfig

# kernel, stride, padding of the three extraction convolutions
EXTRACT = {"high": (7, 1, 3), "mid": (5, 2, 2), "low": (3, 2, 1)}


class ParamStore:
    """Ordered name -> Tensor map with dotted hierarchical names.

    Names look like ``branch.high.rstb0.stl1.attn.qkv.weight``; iteration
    follows insertion order, which :func:`build` makes deterministic.
    """

    def __init__(self, items=()):
        self._t: dict[str, Tensor] = {}
        for name, t in items:
            self.add(name, t)

    def add(self, name: str, t: Tensor) -> None:
        if name in self._t:
            raise KeyError(f"duplicate parameter name {name!r}")
        t.requires_grad = True
        self._t[name] = t

    def __getitem__(self, name: str) -> Tensor:
        return self._t[name]

    def __contains__(self, name: str) -> bool:
        return name in self._t

    def __iter__(self) -> Iterator[str]:
        return iter(self._t)

    def __len__(self) -> int:
        return len(self._t)

    def items(self):
        return self._t.items()

    def names(self) -> list[str]:
        return list(self._t)

    def tensors(self) -> list[Tensor]:
        return list(self._t.values())

    def sub(self, prefix: str) -> "ParamView":
        return ParamView(self, prefix)

    def zero_grad(self) -> None:
        T.zero_grad(self._t.values())

    def astype(self, dtype) -> "ParamStore":
        return ParamStore((n, Tensor(t.data.astype(dtype))) for n, t in self._t.items())

    def copy(self) -> "ParamStore":
        return ParamStore((n, Tensor(t.data.copy())) for n, t in self._t.items())

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: t.data for n, t in self._t.items()}

    @property
    def dtype(self):
        return next(iter(self._t.values())).dtype if self._t else np.dtype(np.float32)


class ParamView:
    """Prefix-scoped read access into a :class:`ParamStore`."""

    def __init__(self, store: ParamStore, prefix: str):
        self.store = store
        self.prefix = prefix

    def __getitem__(self, name: str) -> Tensor:
        return self.store[f"{self.prefix}.{name}"]

    def sub(self, prefix: str) -> "ParamView":
        return ParamView(self.store, f"{self.prefix}.{prefix}")


# ---------------------------------------------------------------------------
# parameter layout and initialization


def _conv_shapes(name, cin, cout, k):
    return [(f"{name}.weight", (cout, cin, k, k), "conv"), (f"{name}.bias", (cout,), "zeros")]


def _linear_shapes(name, din, dout):
    return [(f"{name}.weight", (dout, din), "trunc"), (f"{name}.bias", (dout,), "zeros")]


def _norm_shapes(name, d):
    return [(f"{name}.gamma", (d,), "ones"), (f"{name}.beta", (d,), "zeros")]


def param_shapes(cfg: HSTConfig) -> list[tuple[str, tuple, str]]:
    """``(name, shape, init)`` for every parameter, in store order."""
    out = []
    names = cfg.branch_names
    for b in reversed(names):  # high, mid, low: mid feeds low
        k = EXTRACT[b][0]
        cin = cfg.width("mid") if b == "low" else cfg.in_channels
        out += _conv_shapes(f"extract.{b}", cin, cfg.width(b), k)
    M = cfg.window
    for i, b in enumerate(names):
        C, hidden = cfg.width(b), cfg.mlp_hidden[b]
        if i:
            lo = names[i - 1]
            cl = cfg.width(lo)
            out += _conv_shapes(f"fuse.{lo}_{b}.up", cl, 4 * cl, 3)
            out += _conv_shapes(f"fuse.{lo}_{b}.conv", C + cl, C, 3)
        for r in range(cfg.depth(b)):
            pre = f"branch.{b}.rstb{r}"
            for s in range(cfg.stl_per_rstb):
                sp = f"{pre}.stl{s}"
                out += _norm_shapes(f"{sp}.norm1", C)
                out += _linear_shapes(f"{sp}.attn.qkv", C, 3 * C)
                out.append((f"{sp}.attn.rel_table", ((2 * M - 1) ** 2, cfg.heads), "trunc"))
                out += _linear_shapes(f"{sp}.attn.proj", C, C)
                out += _norm_shapes(f"{sp}.norm2", C)
                out += _linear_shapes(f"{sp}.mlp.fc1", C, hidden)
                out += _linear_shapes(f"{sp}.mlp.fc2", hidden, C)
            out += _conv_shapes(f"{pre}.conv", C, C, 3)
    C = cfg.width("high")
    out += _conv_shapes("recon.up1", C, 4 * C, 3)
    out += _conv_shapes("recon.up2", C, 4 * C, 3)
    out += _conv_shapes("recon.out", C, cfg.out_channels, 3)
    return out


def _trunc_normal(rng, shape, std=0.02):
    z = rng.standard_normal(shape)
    bad = np.abs(z) > 2.0
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > 2.0
    return z * std


def build(cfg: HSTConfig, seed: int = 0, dtype=np.float32) -> ParamStore:
    """Allocate and initialize every parameter; deterministic in ``seed``."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    store = ParamStore()
    for name, shape, init in param_shapes(cfg):
        if init == "zeros":
            arr = np.zeros(shape)
        elif init == "ones":
            arr = np.ones(shape)
        elif init == "trunc":
            arr = _trunc_normal(rng, shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            arr = rng.uniform(-bound, bound, shape)
        store.add(name, Tensor(arr.astype(dtype)))
    return store


def count_parameters(store: ParamStore) -> int:
    return int(sum(t.size for t in store.tensors()))


def count_for_config(cfg: HSTConfig) -> int:
    """Parameter count without allocating."""
    return int(sum(int(np.prod(s)) for _, s, _ in param_shapes(cfg)))


# ---------------------------------------------------------------------------
# forward pieces


def _conv(x, p, stride=1, padding=1):
    return T.conv2d(x, p["weight"], p["bias"], stride, padding)


def extract_hierarchical(img: Tensor, params: ParamStore, cfg: HSTConfig):
    """Return ``(F_h, F_m, F_l)``; branches absent from ``cfg`` are ``None``.

    The low branch is computed from the middle feature, not from the image.
    """
    if img.ndim != 4 or img.shape[0] < 1 or img.shape[1] != cfg.in_channels:
        raise ShapeError(f"expected (B>=1, {cfg.in_channels}, H, W) image, got {img.shape}")
    feats = {}
    names = cfg.branch_names
    for b in ("high", "mid", "low"):
        if b not in names:
            continue
        k, s, p = EXTRACT[b]
        src = feats["mid"] if b == "low" else img
        feats[b] = _conv(src, params.sub(f"extract.{b}"), s, p)
    return feats.get("high"), feats.get("mid"), feats.get("low")


@lru_cache(maxsize=64)
def _rel_index(window: int) -> np.ndarray:
    return T.relative_position_index(window).reshape(-1)


@lru_cache(maxsize=64)
def _mask(H: int, W: int, window: int, shift: int) -> np.ndarray:
    return T.shifted_window_mask(H, W, window, shift)


def stl_forward(x: Tensor, p, heads: int, window: int, shift: int, eps: float = 1e-5) -> Tensor:
    """Swin transformer layer on a ``(B, H, W, C)`` map.

    ``x + W-MSA(LN(x))`` then ``x + MLP(LN(x))``; windows are cyclically
    shifted by ``shift`` before partitioning when ``shift > 0``.
    """
    B, H, W, C = x.shape
    M = window
    N = M * M
    h = T.layer_norm(x, p["norm1.gamma"], p["norm1.beta"], eps)
    if shift:
        h = T.cyclic_shift(h, -shift, -shift)
    win = T.reshape(T.window_partition(h, M), (-1, N, C))
    bias = T.take(p["attn.rel_table"], _rel_index(M))  # N*N, heads
    bias = T.transpose(T.reshape(bias, (N, N, heads)), (2, 0, 1))
    mask = _mask(H, W, M, shift) if shift else None
    a = T.multi_head_attention(win, p["attn.qkv.weight"], p["attn.qkv.bias"],
                               p["attn.proj.weight"], p["attn.proj.bias"], heads, bias, mask)
    h = T.window_reverse(T.reshape(a, (-1, M, M, C)), M, H, W)
    if shift:
        h = T.cyclic_shift(h, shift, shift)
    x = T.add(x, h)
    h = T.layer_norm(x, p["norm2.gamma"], p["norm2.beta"], eps)
    h = T.linear(T.gelu(T.linear(h, p["mlp.fc1.weight"], p["mlp.fc1.bias"])),
                 p["mlp.fc2.weight"], p["mlp.fc2.bias"])
    return T.add(x, h)


def stl_shift(index: int, H: int, W: int, window: int) -> int:
    """Alternate 0 / M//2; no shift when one window covers the map."""
    if index % 2 == 0 or min(H, W) <= window:
        return 0
    return window // 2


def rstb_forward(f_in: Tensor, p, cfg: HSTConfig) -> Tensor:
    """Residual Swin transformer block: K layers, 3x3 conv, skip."""
    B, C, H, W = f_in.shape
    x = T.transpose(f_in, (0, 2, 3, 1))
    for s in range(cfg.stl_per_rstb):
        x = stl_forward(x, p.sub(f"stl{s}"), cfg.heads, cfg.window,
                        stl_shift(s, H, W, cfg.window), cfg.ln_eps)
    x = T.transpose(x, (0, 3, 1, 2))
    return T.add(_conv(x, p.sub("conv")), f_in)


def fuse_into_branch(f_low: Tensor, f_high: Tensor, p) -> Tensor:
    """Pixel-shuffle the enhanced coarse feature up x2, concatenate, fuse by conv."""
    if f_high.shape[0] != f_low.shape[0] or f_high.shape[2:] != (2 * f_low.shape[2], 2 * f_low.shape[3]):
        raise ShapeError(f"fusion needs the fine map at twice the coarse extent: "
                         f"{f_low.shape} vs {f_high.shape}")
    up = T.pixel_shuffle(_conv(f_low, p.sub("up")), 2)
    cat = T.concat([f_high, up], axis=1)
    return _conv(cat, p.sub("conv"))


def reconstruct_hr(f: Tensor, params: ParamStore) -> Tensor:
    x = T.pixel_shuffle(_conv(f, params.sub("recon.up1")), 2)
    x = T.pixel_shuffle(_conv(x, params.sub("recon.up2")), 2)
    return _conv(x, params.sub("recon.out"))


def enhance(f: Tensor, params: ParamStore, cfg: HSTConfig, branch: str) -> Tensor:
    for r in range(cfg.depth(branch)):
        f = rstb_forward(f, params.sub(f"branch.{branch}.rstb{r}"), cfg)
    return f


@dataclass(frozen=True)
class Stage:
    """One step of the forward pass; owns the parameters under ``prefix``."""

    name: str
    prefix: str
    run: Callable[[dict, ParamStore, HSTConfig], dict]


def _extract_stage(state, params, cfg):
    f_h, f_m, f_l = extract_hierarchical(state["img"], params, cfg)
    return {"high": f_h, "mid": f_m, "low": f_l}


def _fuse_stage(lo, hi):
    def run(state, params, cfg):
        out = dict(state)
        out[hi] = fuse_into_branch(state[lo], state[hi], params.sub(f"fuse.{lo}_{hi}"))
        return out
    return run


def _rstb_stage(branch, r):
    def run(state, params, cfg):
        out = dict(state)
        out[branch] = rstb_forward(state[branch], params.sub(f"branch.{branch}.rstb{r}"), cfg)
        return out
    return run


def _recon_stage(state, params, cfg):
    return {"out": reconstruct_hr(state["high"], params)}


def stage_plan(cfg: HSTConfig) -> list[Stage]:
    """Extraction, then per branch (low -> high): fusion, RSTBs; then reconstruction."""
    plan = [Stage("extract", "extract.", _extract_stage)]
    names = cfg.branch_names
    for i, b in enumerate(names):
        if i:
            lo = names[i - 1]
            plan.append(Stage(f"fuse.{lo}_{b}", f"fuse.{lo}_{b}.", _fuse_stage(lo, b)))
        for r in range(cfg.depth(b)):
            plan.append(Stage(f"branch.{b}.rstb{r}", f"branch.{b}.rstb{r}.", _rstb_stage(b, r)))
    plan.append(Stage("recon", "recon.", _recon_stage))
    return plan


def pad_input(img: Tensor, cfg: HSTConfig) -> Tensor:
    if img.ndim != 4 or img.shape[0] < 1 or img.shape[1] != cfg.in_channels:
        raise ShapeError(f"expected (B>=1, {cfg.in_channels}, H, W) image, got {img.shape}")
    H, W = img.shape[2:]
    m = cfg.pad_multiple
    ph, pw = (-H) % m, (-W) % m
    if not (ph or pw):
        return img
    return T.pad(img, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="reflect")


def crop_output(out: Tensor, H: int, W: int, cfg: HSTConfig) -> Tensor:
    s = cfg.scale
    if out.shape[2:] == (s * H, s * W):
        return out
    return T.crop(out, (slice(None), slice(None), slice(0, s * H), slice(0, s * W)))


def forward(img: Tensor, params: ParamStore, cfg: HSTConfig) -> Tensor:
    """``(B, 3, H, W)`` -> ``(B, 3, 4H, 4W)``.

    Ragged extents are reflect-padded up to ``cfg.pad_multiple`` and the
    output is cropped back.
    """
    H, W = img.shape[2:] if img.ndim == 4 else (0, 0)
    state = {"img": pad_input(img, cfg)}
    for stage in stage_plan(cfg):
        state = stage.run(state, params, cfg)
    return crop_output(state["out"], H, W, cfg)


class SRModel:
    """Config + parameters, callable on ``(B, 3, H, W)`` arrays in [0, 1]."""

    def __init__(self, config: HSTConfig, params: ParamStore):
        self.config = config
        self.params = params

    @classmethod
    def create(cls, config: HSTConfig, seed: int = 0, dtype=np.float32) -> "SRModel":
        return cls(config, build(config, seed, dtype))

    @property
    def scale(self) -> int:
        return self.config.scale

    def forward(self, x: Tensor) -> Tensor:
        return forward(x, self.params, self.config)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        with T.no_grad():
            return forward(Tensor(np.asarray(x, dtype=self.params.dtype)), self.params, self.config).data
