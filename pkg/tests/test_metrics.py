from __future__ import annotations

import math

import numpy as np
import pytest
import skimage.data as skd
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from hstkit.degradation import Image
from hstkit.metrics import LossConfig, charbonnier_loss, l1_loss, mse_loss, psnr_rgb, ssim
from hstkit.tensor import ShapeError, Tensor
from hstkit.tensor.gradcheck import TOLERANCE, check


def pair(seed=0, shape=(2, 3, 4, 5)):
    rng = np.random.default_rng(seed)
    return rng.random(shape), rng.random(shape)


# ---------------------------------------------------------------- losses


def test_l1_examples():
    a, _ = pair()
    assert l1_loss(Tensor(a), Tensor(a)).item() == 0.0
    np.testing.assert_allclose(l1_loss(Tensor(a + 0.5), Tensor(a)).item(), 0.5, atol=1e-15)


def test_l1_loop_oracle():
    a, b = pair(1)
    ref = sum(abs(x - y) for x, y in zip(a.ravel(), b.ravel())) / a.size
    np.testing.assert_allclose(l1_loss(Tensor(a), Tensor(b)).item(), ref, rtol=1e-13)


def test_charbonnier_zero_diff_anchor():
    a, _ = pair()
    assert abs(charbonnier_loss(Tensor(a), Tensor(a)).item() - math.sqrt(1e-9)) <= 1e-12
    np.testing.assert_allclose(math.sqrt(1e-9), 3.1623e-5, rtol=1e-4)


def test_charbonnier_loop_oracle():
    a, b = pair(2)
    ref = sum(math.sqrt((x - y) ** 2 + 1e-9) for x, y in zip(a.ravel(), b.ravel())) / a.size
    np.testing.assert_allclose(charbonnier_loss(Tensor(a), Tensor(b)).item(), ref, rtol=1e-13)


def test_charbonnier_tends_to_l1():
    a, b = pair(3)
    l1 = l1_loss(Tensor(a), Tensor(b)).item()
    gaps = [charbonnier_loss(Tensor(a), Tensor(b), eps).item() - l1 for eps in (1e-2, 1e-4, 1e-8, 1e-14)]
    assert all(g >= 0 for g in gaps)
    assert gaps == sorted(gaps, reverse=True) and gaps[-1] < 1e-9


def test_mse_examples():
    a, b = pair(4)
    assert mse_loss(Tensor(a), Tensor(a)).item() == 0.0
    np.testing.assert_allclose(mse_loss(Tensor(a + 0.5), Tensor(a)).item(), 0.25, atol=1e-15)
    ref = sum((x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())) / a.size
    np.testing.assert_allclose(mse_loss(Tensor(a), Tensor(b)).item(), ref, rtol=1e-13)


@pytest.mark.parametrize("kind", ["l1", "charbonnier", "mse"])
def test_losses_symmetric_nonnegative(kind):
    loss = LossConfig(kind)
    a, b = pair(5)
    ab, ba = loss(Tensor(a), Tensor(b)).item(), loss(Tensor(b), Tensor(a)).item()
    assert ab == ba and ab > 0


@pytest.mark.parametrize("fn", [l1_loss, charbonnier_loss, mse_loss])
def test_loss_shape_mismatch(fn):
    with pytest.raises(ShapeError):
        fn(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((1, 3, 4, 5))))


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig("huber")
    with pytest.raises(ValueError):
        LossConfig("charbonnier", 0.0)
    with pytest.raises(ValueError):
        charbonnier_loss(Tensor(np.zeros(2)), Tensor(np.zeros(2)), eps=-1)


@pytest.mark.parametrize("kind", ["l1", "charbonnier", "mse"])
def test_loss_gradients(kind):
    loss = LossConfig(kind)
    a, b = pair(6, (1, 3, 4, 4))
    # keep away from l1's kink
    b = np.where(np.abs(a - b) < 1e-2, b + 0.05, b)
    sr = Tensor(a, requires_grad=True)
    err = check(lambda: loss(sr, Tensor(b)), [sr])
    assert err <= TOLERANCE


def test_l1_subgradient_zero_at_ties():
    from hstkit import tensor as T
    a = Tensor(np.ones(4), requires_grad=True)
    T.backward(l1_loss(a, Tensor(np.ones(4))), [a])
    assert not a.grad.any()


# ---------------------------------------------------------------- PSNR


def test_psnr_identical_is_inf():
    img = Image(np.random.default_rng(0).integers(0, 256, (4, 4, 3), dtype=np.uint8))
    assert psnr_rgb(img, img) == math.inf


def test_psnr_off_by_one():
    a = np.random.default_rng(1).integers(0, 255, (16, 16, 3), dtype=np.uint8)
    assert abs(psnr_rgb(Image(a), Image(a + 1)) - 48.1308) <= 1e-3
    np.testing.assert_allclose(psnr_rgb(Image(a), Image(a + 1)), 20 * math.log10(255), rtol=1e-12)


def test_psnr_scalar_oracle():
    rng = np.random.default_rng(2)
    a, b = (rng.integers(0, 256, (8, 8, 3)) for _ in range(2))
    mse = sum(float(x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())) / a.size
    np.testing.assert_allclose(psnr_rgb(Image(a.astype(np.uint8)), Image(b.astype(np.uint8))),
                               10 * math.log10(255 ** 2 / mse), rtol=1e-12)


def test_psnr_permutation_invariant():
    rng = np.random.default_rng(3)
    a, b = (rng.integers(0, 256, (6, 6, 3), dtype=np.uint8) for _ in range(2))
    perm = rng.permutation(36)
    pa = a.reshape(36, 3)[perm].reshape(6, 6, 3)
    pb = b.reshape(36, 3)[perm].reshape(6, 6, 3)
    np.testing.assert_allclose(psnr_rgb(Image(a), Image(b)), psnr_rgb(Image(pa), Image(pb)), rtol=1e-12)


def test_psnr_geometry_mismatch():
    with pytest.raises(ShapeError):
        psnr_rgb(Image(np.zeros((4, 4, 3), np.uint8)), Image(np.zeros((4, 5, 3), np.uint8)))


# ---------------------------------------------------------------- SSIM


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ssim_self_is_one(seed):
    a = np.random.default_rng(seed).integers(0, 256, (12, 14, 3), dtype=np.uint8)
    assert ssim(Image(a), Image(a)) == 1.0


def test_ssim_symmetric():
    rng = np.random.default_rng(4)
    a, b = (rng.integers(0, 256, (16, 16, 3), dtype=np.uint8) for _ in range(2))
    assert ssim(Image(a), Image(b)) == pytest.approx(ssim(Image(b), Image(a)), abs=1e-14)


def test_ssim_negative_image_low():
    a = skd.astronaut()[100:164, 100:164]
    assert ssim(Image(a), Image(255 - a)) < 0.5


def test_ssim_constant_images_luminance_only():
    for m1, c in ((100.0, 20.0), (30.0, 1.0), (200.0, 55.0)):
        a = np.full((16, 16, 3), m1, np.uint8)
        b = np.full((16, 16, 3), m1 + c, np.uint8)
        C1 = (0.01 * 255) ** 2
        m2 = m1 + c
        ref = (2 * m1 * m2 + C1) / (m1 ** 2 + m2 ** 2 + C1)
        np.testing.assert_allclose(ssim(Image(a), Image(b)), ref, rtol=1e-9)


@pytest.mark.parametrize("name", ["astronaut", "coffee"])
def test_ssim_matches_skimage(name):
    a = getattr(skd, name)()[:96, :80]
    b = np.clip(a.astype(int) + np.random.default_rng(5).integers(-20, 21, a.shape), 0, 255).astype(np.uint8)
    ref = structural_similarity(a, b, data_range=255, channel_axis=-1, gaussian_weights=True,
                                sigma=1.5, use_sample_covariance=False)
    assert abs(ssim(Image(a), Image(b)) - ref) < 1e-12


def test_ssim_too_small():
    with pytest.raises(ShapeError):
        ssim(Image(np.zeros((10, 20, 3), np.uint8)), Image(np.zeros((10, 20, 3), np.uint8)))
