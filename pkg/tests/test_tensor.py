from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hstkit import tensor as T
from hstkit.tensor import ConfigError, GraphError, ShapeError, Tensor
from hstkit.tensor import functional as F
from hstkit.tensor.gradcheck import PRIMITIVES, TOLERANCE, check, relative_error, run_primitive_checks


def conv_oracle(x, w, b, stride, pad):
    B, cin, H, W = x.shape
    cout, _, kh, kw = w.shape
    xp = np.zeros((B, cin, H + 2 * pad, W + 2 * pad))
    xp[:, :, pad:pad + H, pad:pad + W] = x
    Ho = (H + 2 * pad - kh) // stride + 1
    Wo = (W + 2 * pad - kw) // stride + 1
    out = np.zeros((B, cout, Ho, Wo))
    for n in range(B):
        for o in range(cout):
            for i in range(Ho):
                for j in range(Wo):
                    acc = b[o]
                    for c in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                acc += w[o, c, u, v] * xp[n, c, i * stride + u, j * stride + v]
                    out[n, o, i, j] = acc
    return out


# ---------------------------------------------------------------- tensor type


def test_tensor_rejects_empty_extent():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 0)))


def test_integer_data_promoted_to_float():
    assert Tensor([1, 2]).dtype == np.float64


# ---------------------------------------------------------------- conv2d


def test_conv_identity_kernel():
    x = np.random.default_rng(0).normal(size=(2, 3, 5, 4))
    w = np.eye(3).reshape(3, 3, 1, 1)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(3)))
    np.testing.assert_array_equal(out.data, x)


def test_conv_constant_field_interior():
    c = 0.7
    out = F.conv2d(Tensor(np.full((1, 1, 6, 6), c)), Tensor(np.ones((1, 1, 3, 3))), padding=1)
    np.testing.assert_allclose(out.data[0, 0, 1:-1, 1:-1], 9 * c, rtol=1e-12)
    assert out.data[0, 0, 0, 0] == pytest.approx(4 * c)


def test_conv_stride2_matches_loop_oracle():
    rng = np.random.default_rng(1)
    x, w, b = rng.normal(size=(1, 1, 5, 5)), rng.normal(size=(1, 1, 3, 3)), rng.normal(size=1)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=2, padding=1)
    assert out.shape == (1, 1, 3, 3)
    np.testing.assert_allclose(out.data, conv_oracle(x, w, b, 2, 1), atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_conv_random_up_to_2x3x9x9(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4)) * 2 - 1
    s, p = int(rng.integers(1, 3)), int(rng.integers(0, 3))
    x, w, b = rng.normal(size=(2, 3, 9, 9)), rng.normal(size=(4, 3, k, k)), rng.normal(size=4)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=s, padding=p)
    np.testing.assert_allclose(out.data, conv_oracle(x, w, b, s, p), atol=1e-5)


def test_conv_output_extent_formula():
    out = F.conv2d(Tensor(np.zeros((1, 2, 7, 10))), Tensor(np.zeros((3, 2, 5, 5))), stride=2, padding=2)
    assert out.shape == (1, 3, (7 + 4 - 5) // 2 + 1, (10 + 4 - 5) // 2 + 1)


def test_conv_shape_errors():
    with pytest.raises(ShapeError, match="channel"):
        F.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 5, 5))), padding=1)


# ---------------------------------------------------------------- linear


def test_linear_identity_and_bias_only():
    x = np.random.default_rng(2).normal(size=(2, 3))
    assert np.array_equal(F.linear(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3))).data, x)
    b = np.array([1.0, -2.0, 3.0, 0.5])
    out = F.linear(Tensor(x), Tensor(np.zeros((4, 3))), Tensor(b)).data
    assert np.array_equal(out, np.tile(b, (2, 1)))


def test_linear_matches_dot_oracle():
    rng = np.random.default_rng(3)
    x, w, b = rng.normal(size=(2, 3)), rng.normal(size=(4, 3)), rng.normal(size=4)
    out = F.linear(Tensor(x), Tensor(w), Tensor(b)).data
    ref = [[sum(x[i, k] * w[j, k] for k in range(3)) + b[j] for j in range(4)] for i in range(2)]
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_linear_din_mismatch():
    with pytest.raises(ShapeError):
        F.linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))


# ---------------------------------------------------------------- layer norm / gelu / softmax


def test_layer_norm_cases():
    one, zero = Tensor(np.ones(4)), Tensor(np.zeros(4))
    assert np.array_equal(F.layer_norm(Tensor(np.full((2, 4), 3.0)), one, zero).data, np.zeros((2, 4)))
    out = F.layer_norm(Tensor(np.array([[1.0, -1.0]])), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12)
    np.testing.assert_allclose(out.data, [[1.0, -1.0]], atol=1e-9)
    x = np.random.default_rng(4).normal(3.0, 5.0, size=(3, 16))
    y = F.layer_norm(Tensor(x), Tensor(np.ones(16)), Tensor(np.zeros(16)), eps=1e-5).data
    assert np.all(np.abs(y.mean(-1)) < 1e-6)
    assert np.all(np.abs(y.var(-1) - 1) < 1e-5)


def test_gelu_values():
    assert F.gelu(Tensor(np.array([0.0]))).data[0] == 0.0
    assert abs(F.gelu(Tensor(np.array([10.0]))).data[0] - 10.0) < 1e-6
    phi1 = 0.5 * (1 + math.erf(1 / math.sqrt(2)))
    assert F.gelu(Tensor(np.array([1.0]))).data[0] == pytest.approx(phi1, abs=1e-15)
    assert phi1 == pytest.approx(0.841345, abs=1e-6)


def test_softmax_values():
    np.testing.assert_allclose(F.softmax(Tensor(np.zeros((1, 5)))).data, 0.2)
    np.testing.assert_allclose(F.softmax(Tensor(np.array([1000.0, 0.0]))).data, [1.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(F.softmax(Tensor(np.array([1.0, 2.0, 3.0]))).data,
                               [0.09003057, 0.24472847, 0.66524096], atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12), st.floats(-100, 100))
def test_softmax_rows_and_shift_invariance(row, c):
    x = np.array(row)
    y = F.softmax(Tensor(x)).data
    assert abs(y.sum() - 1) < 1e-6 and np.all(y >= 0)
    np.testing.assert_allclose(F.softmax(Tensor(x + c)).data, y, atol=1e-6)


# ---------------------------------------------------------------- windows / shifts / shuffle


def test_window_partition_index_example():
    x = Tensor(np.arange(16.0).reshape(1, 4, 4, 1))
    w = F.window_partition(x, 2).data.reshape(4, 4)
    assert w.tolist() == [[0, 1, 4, 5], [2, 3, 6, 7], [8, 9, 12, 13], [10, 11, 14, 15]]
    back = F.window_reverse(Tensor(w.reshape(4, 2, 2, 1)), 2, 4, 4).data
    assert np.array_equal(back, x.data)


def test_window_partition_single_window():
    x = np.random.default_rng(5).normal(size=(2, 4, 4, 3))
    w = F.window_partition(Tensor(x), 4).data
    assert w.shape == (2, 4, 4, 3) and np.array_equal(w, x)
    assert np.array_equal(F.window_reverse(Tensor(w), 4, 4, 4).data, x)


def test_window_partition_round_trip_random():
    x = np.random.default_rng(6).normal(size=(2, 8, 8, 3))
    w = F.window_partition(Tensor(x), 4)
    assert w.shape == (8, 4, 4, 3)
    assert np.array_equal(F.window_reverse(w, 4, 8, 8).data, x)


def test_window_partition_requires_divisible():
    with pytest.raises(ShapeError, match="pad"):
        F.window_partition(Tensor(np.zeros((1, 6, 8, 1))), 4)


def test_cyclic_shift_cases():
    x = np.random.default_rng(7).normal(size=(1, 3, 5, 2))
    assert np.array_equal(F.cyclic_shift(Tensor(x), 0, 0).data, x)
    assert np.array_equal(F.cyclic_shift(Tensor(x), 3, 5).data, x)
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    out = F.cyclic_shift(Tensor(np.array([[a, b], [c, d]]).reshape(1, 2, 2, 1)), 1, 1).data[0, :, :, 0]
    assert out.tolist() == [[d, c], [b, a]]


def test_pixel_shuffle_cases():
    x = np.random.default_rng(8).normal(size=(1, 4, 3, 3))
    assert np.array_equal(F.pixel_shuffle(Tensor(x), 1).data, x)
    out = F.pixel_shuffle(Tensor(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1, 1)), 2).data
    assert out[0, 0].tolist() == [[1, 2], [3, 4]]
    assert np.array_equal(F.pixel_unshuffle(F.pixel_shuffle(Tensor(x), 2), 2).data, x)
    with pytest.raises(ShapeError):
        F.pixel_shuffle(Tensor(np.zeros((1, 3, 2, 2))), 2)


# ---------------------------------------------------------------- attention


def _attn_params(rng, C, zero=False):
    f = (lambda *s: np.zeros(s)) if zero else (lambda *s: rng.normal(size=s))
    return [Tensor(f(3 * C, C)), Tensor(f(3 * C)), Tensor(rng.normal(size=(C, C))), Tensor(rng.normal(size=C))]


def test_attention_single_token():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(3, 1, 4))
    qw, qb, pw, pb = _attn_params(rng, 4)
    out = F.multi_head_attention(Tensor(x), qw, qb, pw, pb, heads=2).data
    v = x @ qw.data[8:].T + qb.data[8:]
    np.testing.assert_allclose(out, v @ pw.data.T + pb.data, atol=1e-12)


def test_attention_uniform_when_qkv_zero_except_values():
    rng = np.random.default_rng(10)
    x = rng.normal(size=(2, 4, 4))
    qw, qb, pw, pb = _attn_params(rng, 4, zero=True)
    qw.data[8:] = rng.normal(size=(4, 4))  # values only; logits are all zero
    out = F.multi_head_attention(Tensor(x), qw, qb, pw, pb, heads=2).data
    v = x @ qw.data[8:].T
    ref = v.mean(axis=1, keepdims=True) @ pw.data.T + pb.data
    np.testing.assert_allclose(out, np.broadcast_to(ref, out.shape), atol=1e-12)


def test_attention_matches_matrix_oracle():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(1, 4, 2))
    qw, qb, pw, pb = _attn_params(rng, 2)
    bias = rng.normal(size=(1, 4, 4))
    out = F.multi_head_attention(Tensor(x), qw, qb, pw, pb, heads=1, rel_bias=Tensor(bias)).data
    X = x[0]
    q = X @ qw.data[0:2].T + qb.data[0:2]
    k = X @ qw.data[2:4].T + qb.data[2:4]
    v = X @ qw.data[4:6].T + qb.data[4:6]
    logits = q @ k.T / math.sqrt(2) + bias[0]
    a = np.exp(logits - logits.max(1, keepdims=True))
    a /= a.sum(1, keepdims=True)
    np.testing.assert_allclose(out[0], (a @ v) @ pw.data.T + pb.data, atol=1e-12)


def test_attention_heads_must_divide():
    rng = np.random.default_rng(12)
    with pytest.raises(ConfigError):
        F.multi_head_attention(Tensor(rng.normal(size=(1, 4, 6))), *_attn_params(rng, 6), heads=4)


def test_shifted_mask_blocks_wrapped_regions():
    m = F.shifted_window_mask(8, 8, 4, 2)
    assert m.shape == (4, 16, 16)
    assert np.all(m[0] == 0)  # top-left window never wraps
    assert set(np.unique(m)) == {0.0, F.MASK_VALUE}
    assert np.all(np.diagonal(m, axis1=1, axis2=2) == 0)


def test_relative_position_index_range():
    idx = F.relative_position_index(3)
    assert idx.shape == (9, 9)
    assert idx.min() == 0 and idx.max() == 24
    assert np.all(np.diag(idx) == 12)  # zero offset sits at the table centre


# ---------------------------------------------------------------- backward semantics


def test_backward_sum_and_square():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    T.backward(T.tsum(x))
    assert np.array_equal(x.grad, np.ones(3))
    x2 = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    T.backward(T.tsum(T.mul(x2, x2)))
    assert np.array_equal(x2.grad, 2 * x2.data)


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(GraphError, match="scalar"):
        T.backward(T.mul(x, 2.0))


def test_backward_twice_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    loss = T.tsum(T.mul(x, x))
    T.backward(loss)
    with pytest.raises(GraphError):
        T.backward(loss)


def test_backward_rejects_stale_leaf_gradient():
    x = Tensor(np.ones(3), requires_grad=True)
    T.backward(T.tsum(x))
    with pytest.raises(GraphError, match="zero_grad"):
        T.backward(T.tsum(T.mul(x, 3.0)))
    T.zero_grad([x])
    T.backward(T.tsum(T.mul(x, 3.0)))
    assert np.array_equal(x.grad, np.full(3, 3.0))


def test_empty_graph_gives_zero_gradients():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    T.backward(Tensor(np.array(1.5)), inputs=[x])
    assert np.array_equal(x.grad, np.zeros((2, 2)))


def test_shared_use_accumulates_once_per_use():
    x = Tensor(np.array([2.0]), requires_grad=True)
    T.backward(T.tsum(T.add(T.mul(x, 3.0), T.mul(x, x))))
    assert x.grad[0] == 3.0 + 4.0


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with T.no_grad():
        y = T.mul(x, 2.0)
    assert y.is_leaf and not y.requires_grad


# ---------------------------------------------------------------- finite differences


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([1e-10])) == pytest.approx(1e-2)
    assert relative_error(np.array([2.0]), np.array([2.0])) == 0.0


def test_check_requires_float64():
    with pytest.raises(TypeError):
        check(lambda: T.tsum(Tensor(np.ones(2, dtype=np.float32))), [Tensor(np.ones(2, dtype=np.float32))])


@pytest.mark.parametrize("prim", PRIMITIVES, ids=lambda p: p.name)
def test_primitive_gradients(prim):
    rng = np.random.default_rng(123)
    for _ in range(5):
        fn, leaves = prim.build(rng)
        assert check(fn, leaves) <= TOLERANCE


def test_primitive_suite_reports_every_op():
    rows = run_primitive_checks(instances=1, seed=3)
    assert {n for n, _ in rows} == {p.name for p in PRIMITIVES}
    assert all(e <= TOLERANCE for _, e in rows)
