"""Noise injection and image-quality metrics (MSE, PSNR, SSIM)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CalibrationError, ParameterError, ShapeError

NOISE_MODELS = ("speckle", "additive-gaussian")
_ALIASES = {"gaussian": "additive-gaussian", "additive": "additive-gaussian"}


def normalize_model(model: str) -> str:
    model = _ALIASES.get(model, model)
    if model not in NOISE_MODELS:
        raise ParameterError(f"unknown noise model {model!r}; expected one of {NOISE_MODELS}")
    return model


@dataclass(frozen=True)
class NoiseSpec:
    """``sigma`` is in gray levels for additive noise and a unit-mean multiplier std for speckle."""

    model: str = "additive-gaussian"
    sigma: float = 30.0
    seed: int = 0
    clip: bool = True

    def __post_init__(self):
        object.__setattr__(self, "model", normalize_model(self.model))
        if not self.sigma >= 0:
            raise ParameterError(f"noise sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class SsimParams:
    L: float = 255.0
    k1: float = 0.01
    k2: float = 0.03
    mode: str = "windowed"
    window: int = 11
    window_sigma: float = 1.5

    def __post_init__(self):
        if self.mode not in ("global", "windowed"):
            raise ParameterError(f"unknown SSIM mode {self.mode!r}")

    @property
    def c1(self) -> float:
        return (self.k1 * self.L) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.L) ** 2


@dataclass(frozen=True)
class MetricResult:
    psnr_db: float
    ssim: float
    mse: float


def add_noise(img, spec: NoiseSpec) -> np.ndarray:
    """Speckle ``S * N`` with ``N ~ N(1, sigma^2)``, or additive ``S + N(0, sigma^2)``."""
    img = np.asarray(img, dtype=np.float64)
    if spec.sigma < 0:
        raise ParameterError(f"noise sigma must be non-negative, got {spec.sigma}")
    z = np.random.default_rng(spec.seed).standard_normal(img.shape)
    if spec.model == "speckle":
        out = img * (1.0 + spec.sigma * z)
    else:
        out = img + spec.sigma * z
    if spec.clip:
        out = np.clip(out, 0.0, 255.0)
    return out


def _check_pair(ref, test) -> tuple[np.ndarray, np.ndarray]:
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ShapeError(f"image shapes differ: {ref.shape} vs {test.shape}")
    return ref, test


def mse(ref, test) -> float:
    ref, test = _check_pair(ref, test)
    return float(np.mean((ref - test) ** 2))


def psnr(ref, test, max_val: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    if max_val <= 0:
        raise ParameterError("max_val must be positive")
    err = mse(ref, test)
    if err == 0:
        return math.inf
    return 20.0 * math.log10(max_val / math.sqrt(err))


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_formula(mu_x, mu_y, var_x, var_y, cov, c1, c2):
    return ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2))


def ssim(ref, test, params: SsimParams | None = None) -> float:
    """Structural similarity.

    ``global`` mode evaluates the formula once with whole-image statistics
    (sample variances, ``N - 1`` denominator).  ``windowed`` mode averages
    the local index over every fully contained Gaussian window.
    """
    params = params or SsimParams()
    ref, test = _check_pair(ref, test)
    c1, c2 = params.c1, params.c2
    if params.mode == "global":
        n = ref.size
        mu_x, mu_y = ref.mean(), test.mean()
        dx, dy = ref - mu_x, test - mu_y
        ddof = 1 if n > 1 else 0
        var_x = np.sum(dx * dx) / (n - ddof)
        var_y = np.sum(dy * dy) / (n - ddof)
        cov = np.sum(dx * dy) / (n - ddof)
        return float(_ssim_formula(mu_x, mu_y, var_x, var_y, cov, c1, c2))

    k = params.window
    if ref.ndim != 2 or min(ref.shape) < k:
        raise ShapeError(f"windowed SSIM needs a 2-D image of at least {k}x{k}, got {ref.shape}")
    w = gaussian_window(k, params.window_sigma)

    def local_mean(a):
        return np.tensordot(sliding_window_view(a, (k, k)), w, axes=([2, 3], [0, 1]))

    mu_x, mu_y = local_mean(ref), local_mean(test)
    var_x = local_mean(ref * ref) - mu_x * mu_x
    var_y = local_mean(test * test) - mu_y * mu_y
    cov = local_mean(ref * test) - mu_x * mu_y
    return float(np.mean(_ssim_formula(mu_x, mu_y, var_x, var_y, cov, c1, c2)))


def evaluate_pair(ref, test, max_val: float = 255.0, params: SsimParams | None = None) -> MetricResult:
    return MetricResult(psnr(ref, test, max_val), ssim(ref, test, params), mse(ref, test))


@dataclass
class Calibration:
    sigma: float
    psnr_db: float
    trace: list[tuple[float, float]] = field(default_factory=list)


def mean_noisy_psnr(images, spec: NoiseSpec) -> float:
    vals = [psnr(img, add_noise(img, replace(spec, seed=spec.seed + i))) for i, img in enumerate(images)]
    return float(np.mean(vals))


def calibrate_noise(
    images,
    target_psnr: float,
    model: str = "additive-gaussian",
    *,
    seed: int = 0,
    clip: bool = True,
    tol: float = 0.05,
    sigma_max: float | None = None,
    max_iter: int = 200,
) -> Calibration:
    """Bisect ``sigma`` until the mean noisy-input PSNR is within ``tol`` dB of the target.

    Noise fields are drawn with the same seeds at every probe, so the PSNR is
    a deterministic, decreasing function of sigma.
    """
    images = [np.asarray(im, dtype=np.float64) for im in images]
    if not images:
        raise CalibrationError("calibration needs at least one image")
    if not math.isfinite(target_psnr):
        raise CalibrationError(f"target PSNR {target_psnr} is not achievable")
    model = normalize_model(model)
    if sigma_max is None:
        sigma_max = 255.0 if model == "additive-gaussian" else 10.0
    spec = NoiseSpec(model, 0.0, seed, clip)
    trace: list[tuple[float, float]] = []

    def probe(sigma: float) -> float:
        val = mean_noisy_psnr(images, replace(spec, sigma=sigma))
        trace.append((sigma, val))
        return val

    lo, hi = 0.0, sigma_max
    p_hi = probe(hi)
    if p_hi > target_psnr + tol:
        raise CalibrationError(
            f"target {target_psnr:.3f} dB not reachable: sigma={sigma_max} still gives {p_hi:.3f} dB"
        )
    if abs(p_hi - target_psnr) <= tol:
        return Calibration(hi, p_hi, trace)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = probe(mid)
        if abs(val - target_psnr) <= tol:
            return Calibration(mid, val, trace)
        if val > target_psnr:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"bisection did not converge to {target_psnr:.3f} dB")
