"""Central finite-difference checks of reverse-mode gradients (64-bit)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import core, functional as F
from .core import Tensor, backward, no_grad

STEP = 1e-4
TOLERANCE = 1e-4


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def numeric_grad(fn: Callable[[], Tensor], t: Tensor, h: float = STEP,
                 indices: np.ndarray | None = None) -> np.ndarray:
    """Central differences of scalar ``fn()`` w.r.t. ``t.data`` (in place, restored).

    ``indices`` restricts the check to a subset of flat positions; other
    entries of the result are NaN.
    """
    flat = t.data.reshape(-1)
    out = np.full(flat.shape, np.nan)
    idx = range(flat.size) if indices is None else indices
    with no_grad():
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(fn().data.sum())
            flat[i] = orig - h
            fm = float(fn().data.sum())
            flat[i] = orig
            out[i] = (fp - fm) / (2.0 * h)
    return out.reshape(t.shape)


def check(fn: Callable[[], Tensor], tensors: Sequence[Tensor], h: float = STEP,
          max_entries: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Max relative error over ``tensors`` between autodiff and finite differences.

    ``fn`` builds the scalar from scratch each call and must read the given
    tensors' ``.data`` (perturbed in place).  ``max_entries`` samples at most
    that many positions per tensor.
    """
    for t in tensors:
        if t.dtype != np.float64:
            raise TypeError("finite-difference checks run in 64-bit; cast tensors first")
        t.requires_grad = True
    core.zero_grad(tensors)
    backward(fn(), inputs=tensors)
    worst = 0.0
    for t in tensors:
        idx = None
        if max_entries is not None and t.size > max_entries:
            rng = rng or np.random.default_rng(0)
            idx = rng.choice(t.size, size=max_entries, replace=False)
        num = numeric_grad(fn, t, h, idx)
        ana = t.grad
        if idx is not None:
            num, ana = num.reshape(-1)[idx], ana.reshape(-1)[idx]
        worst = max(worst, relative_error(ana, num))
    core.zero_grad(tensors)
    return worst


# ---------------------------------------------------------------------------
# registry of primitive checks (used by tests and the gradcheck command)


@dataclass
class PrimitiveCheck:
    name: str
    build: Callable[[np.random.Generator], tuple[Callable[[], Tensor], list[Tensor]]]


def _weighted(out: Tensor, w: np.ndarray) -> Tensor:
    # random projection keeps every output element's gradient distinct
    return core.mean(core.mul(out, Tensor(w)))


def _leaf(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _conv(rng):
    B, cin, cout, k = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4), int(rng.choice([1, 3]))
    H, W = rng.integers(k, 7, size=2)
    s, p = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    x, w, b = _leaf(rng, B, cin, H, W), _leaf(rng, cout, cin, k, k), _leaf(rng, cout)
    Ho, Wo = (H + 2 * p - k) // s + 1, (W + 2 * p - k) // s + 1
    proj = rng.standard_normal((B, cout, Ho, Wo))
    return (lambda: _weighted(F.conv2d(x, w, b, s, p), proj)), [x, w, b]


def _linear(rng):
    din, dout = rng.integers(1, 5, size=2)
    x, w, b = _leaf(rng, 2, 3, din), _leaf(rng, dout, din), _leaf(rng, dout)
    proj = rng.standard_normal((2, 3, dout))
    return (lambda: _weighted(F.linear(x, w, b), proj)), [x, w, b]


def _layer_norm(rng):
    D = int(rng.integers(2, 6))
    x = _leaf(rng, 3, D)
    g = Tensor(1.0 + 0.3 * rng.standard_normal(D), requires_grad=True)
    b = _leaf(rng, D)
    proj = rng.standard_normal((3, D))
    return (lambda: _weighted(F.layer_norm(x, g, b, 1e-5), proj)), [x, g, b]


def _gelu(rng):
    x = _leaf(rng, 4, 3, scale=2.0)
    proj = rng.standard_normal((4, 3))
    return (lambda: _weighted(F.gelu(x), proj)), [x]


def _softmax(rng):
    x = _leaf(rng, 3, int(rng.integers(2, 6)))
    proj = rng.standard_normal(x.shape)
    return (lambda: _weighted(F.softmax(x), proj)), [x]


def _window_partition(rng):
    M = int(rng.choice([1, 2]))
    x = _leaf(rng, 1, 2 * M, 2 * M, 2)
    proj = rng.standard_normal((4, M, M, 2))
    return (lambda: _weighted(F.window_partition(x, M), proj)), [x]


def _window_reverse(rng):
    w = _leaf(rng, 4, 2, 2, 3)
    proj = rng.standard_normal((1, 4, 4, 3))
    return (lambda: _weighted(F.window_reverse(w, 2, 4, 4), proj)), [w]


def _cyclic_shift(rng):
    x = _leaf(rng, 1, 3, 4, 2)
    dy, dx = (int(v) for v in rng.integers(-3, 4, size=2))
    proj = rng.standard_normal(x.shape)
    return (lambda: _weighted(F.cyclic_shift(x, dy, dx), proj)), [x]


def _pixel_shuffle(rng):
    r = int(rng.integers(1, 3))
    x = _leaf(rng, 1, 2 * r * r, 2, 3)
    proj = rng.standard_normal((1, 2, 2 * r, 3 * r))
    return (lambda: _weighted(F.pixel_shuffle(x, r), proj)), [x]


def _pixel_unshuffle(rng):
    x = _leaf(rng, 1, 2, 4, 4)
    proj = rng.standard_normal((1, 8, 2, 2))
    return (lambda: _weighted(F.pixel_unshuffle(x, 2), proj)), [x]


def _attention(rng):
    heads = int(rng.choice([1, 2]))
    C, M = 2 * heads, 2
    N = M * M
    nW = 2
    x = _leaf(rng, 2 * nW, N, C)
    qw, qb = _leaf(rng, 3 * C, C, scale=0.5), _leaf(rng, 3 * C, scale=0.1)
    pw, pb = _leaf(rng, C, C, scale=0.5), _leaf(rng, C, scale=0.1)
    rb = _leaf(rng, heads, N, N, scale=0.1)
    mask = np.where(rng.random((nW, N, N)) < 0.3, F.MASK_VALUE, 0.0)
    mask[:, np.arange(N), np.arange(N)] = 0.0
    proj = rng.standard_normal(x.shape)

    def fn():
        return _weighted(F.multi_head_attention(x, qw, qb, pw, pb, heads, rb, mask), proj)

    return fn, [x, qw, qb, pw, pb, rb]


def _elementwise(rng):
    a, b = _leaf(rng, 3, 4), Tensor(rng.uniform(0.5, 2.0, (1, 4)), requires_grad=True)
    proj = rng.standard_normal((3, 4))

    def fn():
        y = core.div(core.mul(core.sub(a, b), core.add(a, b)), b)
        y = core.add(core.sqrt(core.add(core.square(y), 1.0)), core.absolute(a))
        return _weighted(y, proj)

    return fn, [a, b]


def _layout(rng):
    x = _leaf(rng, 2, 3, 4, 5)
    proj = rng.standard_normal((2, 3, 4, 5))

    def fn():
        t = core.pad(x, ((0, 0), (0, 0), (2, 1), (1, 3)), mode="reflect")
        t = core.crop(t, (slice(None), slice(None), slice(1, 5), slice(2, 7)))
        t = core.concat([t, core.roll(t, (1,), (3,))], axis=1)
        t = core.mean(core.reshape(t, (2, 2, 3, 4, 5)), axis=1)
        return _weighted(t, proj)

    return fn, [x]


def _take(rng):
    table = _leaf(rng, 9, 2)
    index = rng.integers(0, 9, size=(4, 4))
    proj = rng.standard_normal((4, 4, 2))
    return (lambda: _weighted(core.take(table, index), proj)), [table]


PRIMITIVES: list[PrimitiveCheck] = [
    PrimitiveCheck("conv2d", _conv),
    PrimitiveCheck("linear", _linear),
    PrimitiveCheck("layer_norm", _layer_norm),
    PrimitiveCheck("gelu", _gelu),
    PrimitiveCheck("softmax", _softmax),
    PrimitiveCheck("window_partition", _window_partition),
    PrimitiveCheck("window_reverse", _window_reverse),
    PrimitiveCheck("cyclic_shift", _cyclic_shift),
    PrimitiveCheck("pixel_shuffle", _pixel_shuffle),
    PrimitiveCheck("pixel_unshuffle", _pixel_unshuffle),
    PrimitiveCheck("multi_head_attention", _attention),
    PrimitiveCheck("elementwise", _elementwise),
    PrimitiveCheck("layout", _layout),
    PrimitiveCheck("take", _take),
]


def run_primitive_checks(instances: int = 5, seed: int = 0) -> list[tuple[str, float]]:
    """Worst relative error per primitive over ``instances`` random cases."""
    results = []
    for pc in PRIMITIVES:
        worst = 0.0
        for k in range(instances):
            rng = np.random.default_rng([seed, k, len(pc.name)])
            fn, leaves = pc.build(rng)
            worst = max(worst, check(fn, leaves))
        results.append((pc.name, worst))
    return results
