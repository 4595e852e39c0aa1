import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from framelet.errors import CalibrationError, ParameterError, ShapeError
from framelet.metrics import NoiseSpec, SsimParams, add_noise, calibrate_noise, evaluate_pair, mse, psnr, ssim

from oracles import psnr_loops, ssim_global_loops, ssim_windowed_loops


def test_speckle_on_zero_image_is_zero():
    out = add_noise(np.zeros((8, 8)), NoiseSpec("speckle", 0.7, seed=1))
    assert np.all(out == 0)


@pytest.mark.parametrize("model", ["speckle", "additive-gaussian"])
def test_zero_sigma_is_identity(model):
    img = np.random.default_rng(0).uniform(0, 255, (16, 16))
    np.testing.assert_array_equal(add_noise(img, NoiseSpec(model, 0.0, seed=3)), img)


def test_additive_noise_statistics():
    img = np.full((256, 256), 128.0)
    noisy = add_noise(img, NoiseSpec("additive-gaussian", 30.0, seed=11, clip=False))
    assert abs(np.std(noisy - img) - 30) < 1
    # empirical MSE tracks sigma^2
    assert abs(mse(img, noisy) / 900 - 1) < 0.07


def test_speckle_is_unit_mean_multiplier():
    img = np.full((256, 256), 100.0)
    noisy = add_noise(img, NoiseSpec("speckle", 0.2, seed=2, clip=False))
    ratio = noisy / img
    assert abs(ratio.mean() - 1) < 0.01 and abs(ratio.std() - 0.2) < 0.01


def test_noise_is_pure_function_of_spec():
    img = np.random.default_rng(1).uniform(0, 255, (20, 20))
    spec = NoiseSpec("speckle", 0.3, seed=5)
    np.testing.assert_array_equal(add_noise(img, spec), add_noise(img, spec))
    assert not np.array_equal(add_noise(img, spec), add_noise(img, NoiseSpec("speckle", 0.3, seed=6)))


def test_clip_bounds():
    img = np.random.default_rng(1).uniform(0, 255, (20, 20))
    out = add_noise(img, NoiseSpec(sigma=100, seed=0))
    assert out.min() >= 0 and out.max() <= 255


def test_negative_sigma_rejected():
    with pytest.raises(ParameterError):
        NoiseSpec(sigma=-1)
    with pytest.raises(ParameterError):
        NoiseSpec(model="poisson")


def test_psnr_examples():
    img = np.random.default_rng(0).uniform(0, 200, (10, 10))
    assert psnr(img, img) == math.inf
    assert abs(psnr(img, img + 30) - 20 * math.log10(255 / 30)) < 1e-12
    assert round(psnr(img, img + 30), 3) == 18.588
    assert psnr(np.full((4, 4), 255.0), np.zeros((4, 4))) == 0.0
    with pytest.raises(ShapeError):
        psnr(np.zeros((2, 2)), np.zeros((2, 3)))


def test_ssim_examples():
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 255, (24, 24))
    assert ssim(img, img) == 1.0
    assert ssim(img, img, SsimParams(mode="global")) == 1.0
    c1 = (0.01 * 255) ** 2
    expected = (2 * 100 * 200 + c1) / (100**2 + 200**2 + c1)
    got = ssim(np.full((16, 16), 100.0), np.full((16, 16), 200.0), SsimParams(mode="global"))
    assert abs(got - expected) < 1e-12 and abs(got - 0.8001) < 1e-4
    other = rng.uniform(0, 255, (24, 24))
    for mode in ("global", "windowed"):
        p = SsimParams(mode=mode)
        assert abs(ssim(img, other, p) - ssim(other, img, p)) < 1e-12


def test_ssim_params():
    p = SsimParams()
    assert p.c1 == (0.01 * 255) ** 2 and p.c2 == (0.03 * 255) ** 2
    assert p.mode == "windowed" and p.window == 11 and p.window_sigma == 1.5
    with pytest.raises(ShapeError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), h=st.integers(11, 16), w=st.integers(11, 16))
def test_metrics_match_brute_force(seed, h, w):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 255, (h, w))
    b = np.clip(a + rng.normal(0, 25, (h, w)), 0, 255)
    p = SsimParams()
    assert abs(psnr(a, b) - psnr_loops(a, b)) < 1e-9
    assert abs(ssim(a, b, SsimParams(mode="global")) - ssim_global_loops(a, b, p.c1, p.c2)) < 1e-9
    assert abs(ssim(a, b) - ssim_windowed_loops(a, b, p.c1, p.c2)) < 1e-9


def test_psnr_permutation_invariant():
    rng = np.random.default_rng(4)
    a, b = rng.uniform(0, 255, (12, 12)), rng.uniform(0, 255, (12, 12))
    perm = rng.permutation(144)
    assert psnr(a, b) == pytest.approx(psnr(a.ravel()[perm], b.ravel()[perm]), abs=1e-12)


def test_evaluate_pair_consistency():
    rng = np.random.default_rng(4)
    a, b = rng.uniform(0, 255, (16, 16)), rng.uniform(0, 255, (16, 16))
    r = evaluate_pair(a, b)
    assert r.psnr_db == pytest.approx(20 * math.log10(255 / math.sqrt(r.mse)), abs=1e-12)
    assert -1 <= r.ssim <= 1


def test_calibrate_additive_to_analytic_sigma():
    images = [np.full((64, 64), 128.0) for _ in range(3)]
    cal = calibrate_noise(images, 18.59, "additive-gaussian", clip=False)
    assert abs(cal.sigma - 30) < 0.5
    assert abs(cal.psnr_db - 18.59) <= 0.05
    # larger sigma never gives a higher PSNR along the bisection trace
    trace = sorted(cal.trace)
    assert all(p1 >= p2 for (_, p1), (_, p2) in zip(trace, trace[1:]))


def test_calibrate_speckle():
    images = [np.random.default_rng(i).uniform(50, 200, (32, 32)) for i in range(2)]
    cal = calibrate_noise(images, 22.0, "speckle")
    assert abs(cal.psnr_db - 22.0) <= 0.05 and cal.sigma > 0


def test_calibrate_errors():
    images = [np.full((16, 16), 128.0)]
    with pytest.raises(CalibrationError):
        calibrate_noise(images, math.inf)
    with pytest.raises(CalibrationError):
        calibrate_noise(images, -5.0)  # clipping caps the error, so this is never reached
    with pytest.raises(CalibrationError):
        calibrate_noise([], 20.0)
