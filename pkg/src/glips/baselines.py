"""Classical and feature-based comparison metrics plus error statistics.

Structural metrics run on the BT.601 luma plane with the canonical
constants (11x11 Gaussian window, sigma 1.5, k1 = 0.01, k2 = 0.03, five
dyadic scales weighted 0.0448/0.2856/0.3001/0.2363/0.1333). The
distribution distances (FID-style Gaussian distance, polynomial-kernel
MMD) consume whatever feature sets the configured backend produces.

Everything here is a pure function; thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .backend import FeatureSet
from .errors import (
    DimensionMismatchError,
    EigenFailureError,
    EmptyInputError,
    InsufficientSamplesError,
    InvalidSpecError,
    LengthMismatchError,
    TooSmallForScalesError,
    ZeroHumanScoreError,
)
from .imagery import ImageTensor, luminance
from .scoring import KernelSpec, mmd

MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

MIN_MSSSIM_SIZE = 176  # window 11 must survive four dyadic halvings


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    msssim_weights: tuple[float, ...] = MSSSIM_WEIGHTS

    def __post_init__(self) -> None:
        if self.window < 3 or self.window % 2 == 0:
            raise InvalidSpecError("window must be odd and >= 3")
        if self.sigma <= 0 or self.dynamic_range <= 0:
            raise InvalidSpecError("sigma and dynamic_range must be positive")
        # the canonical published weights sum to 1.0001, so allow that slack
        if abs(sum(self.msssim_weights) - 1.0) > 1e-3:
            raise InvalidSpecError("msssim_weights must sum to 1")


@dataclass(frozen=True)
class GaussianSummary:
    """Sample mean and covariance of a feature cloud."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.ascontiguousarray(self.mean, dtype=np.float64).ravel()
        cov = np.ascontiguousarray(self.covariance, dtype=np.float64)
        cov = np.atleast_2d(cov)
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatchError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        if not np.allclose(cov, cov.T, atol=1e-9):
            raise InvalidSpecError("covariance must be symmetric")
        if float(np.diag(cov).min()) < -1e-12:
            raise InvalidSpecError("covariance diagonal must be non-negative")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_maps(x: np.ndarray, y: np.ndarray, p: SsimParams) -> tuple[np.ndarray, np.ndarray]:
    """Local SSIM and contrast-structure maps over valid window positions."""
    if min(x.shape) < p.window:
        raise DimensionMismatchError(
            f"image {x.shape} smaller than the {p.window}x{p.window} window"
        )
    w = _gaussian_window(p.window, p.sigma)
    c1 = (p.k1 * p.dynamic_range) ** 2
    c2 = (p.k2 * p.dynamic_range) ** 2
    mu_x = convolve2d(x, w, mode="valid")
    mu_y = convolve2d(y, w, mode="valid")
    sigma_xx = convolve2d(x * x, w, mode="valid") - mu_x * mu_x
    sigma_yy = convolve2d(y * y, w, mode="valid") - mu_y * mu_y
    sigma_xy = convolve2d(x * y, w, mode="valid") - mu_x * mu_y
    cs = (2.0 * sigma_xy + c2) / (sigma_xx + sigma_yy + c2)
    lum = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    return lum * cs, cs


def ssim(a: ImageTensor, b: ImageTensor, p: SsimParams | None = None) -> float:
    """Mean local structural similarity over sliding Gaussian windows."""
    p = p or SsimParams()
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatchError(
            f"image sizes differ: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
    ssim_map, _ = _ssim_maps(luminance(a), luminance(b), p)
    return float(ssim_map.mean())


def _halve(z: np.ndarray) -> np.ndarray:
    h, w = (z.shape[0] // 2) * 2, (z.shape[1] // 2) * 2
    z = z[:h, :w]
    return (z[0::2, 0::2] + z[0::2, 1::2] + z[1::2, 0::2] + z[1::2, 1::2]) / 4.0


def ms_ssim(a: ImageTensor, b: ImageTensor, p: SsimParams | None = None) -> float:
    """Multi-scale structural similarity: weighted product across 5 scales.

    Contrast-structure terms of the four coarser-to-finer intermediate
    scales multiply the full SSIM of the coarsest scale, each raised to
    its weight. Negative local means are clipped at zero before the
    fractional powers.
    """
    p = p or SsimParams()
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatchError(
            f"image sizes differ: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
    levels = len(p.msssim_weights)
    min_dim = min(a.height, a.width)
    if min_dim < p.window * 2 ** (levels - 1):
        raise TooSmallForScalesError(
            f"need at least {p.window * 2 ** (levels - 1)} pixels per side "
            f"for {levels} scales, got {min_dim}"
        )
    x, y = luminance(a), luminance(b)
    result = 1.0
    for level, weight in enumerate(p.msssim_weights):
        ssim_map, cs_map = _ssim_maps(x, y, p)
        term = ssim_map.mean() if level == levels - 1 else cs_map.mean()
        result *= max(float(term), 0.0) ** weight
        if level < levels - 1:
            x, y = _halve(x), _halve(y)
    return result


def psnr(a: ImageTensor, b: ImageTensor) -> float:
    """Peak signal-to-noise ratio in dB for dynamic range 1.

    Identical images yield the infinite sentinel ``math.inf``; callers
    rescaling onto the Likert scale must exclude it.
    """
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatchError(
            f"image sizes differ: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def fit_gaussian(features: FeatureSet | np.ndarray) -> GaussianSummary:
    """Sample mean and unbiased sample covariance of a feature cloud."""
    arr = features.tokens if isinstance(features, FeatureSet) else np.asarray(features, dtype=np.float64)
    arr = np.atleast_2d(arr)
    if arr.shape[0] < 2:
        raise InsufficientSamplesError(
            f"need at least 2 feature vectors, got {arr.shape[0]}"
        )
    cov = np.atleast_2d(np.cov(arr, rowvar=False, ddof=1))
    return GaussianSummary(mean=arr.mean(axis=0), covariance=cov)


def fid(g1: GaussianSummary, g2: GaussianSummary) -> float:
    """Frechet distance between two Gaussian feature summaries.

    ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), with the trace of
    the matrix square root taken from the eigenvalues of the symmetrized
    product S1^(1/2) S2 S1^(1/2); eigenvalues below 1e-8 truncate to 0.
    """
    if g1.dim != g2.dim:
        raise DimensionMismatchError(f"summary dims differ: {g1.dim} vs {g2.dim}")
    try:
        evals1, evecs1 = np.linalg.eigh(g1.covariance)
        root1 = (evecs1 * np.sqrt(np.clip(evals1, 0.0, None))) @ evecs1.T
        inner = root1 @ g2.covariance @ root1
        cross = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError(f"eigendecomposition failed: {exc}") from exc
    cross = np.where(cross < 1e-8, 0.0, cross)
    diff = g1.mean - g2.mean
    value = (
        float(diff @ diff)
        + float(np.trace(g1.covariance) + np.trace(g2.covariance))
        - 2.0 * float(np.sqrt(cross).sum())
    )
    return max(value, 0.0)


def kid(f_o: FeatureSet, f_g: FeatureSet) -> float:
    """Polynomial-kernel squared MMD with the conventional parameters.

    alpha = 1/feature_dim, c = 1, d = 3, evaluated with the same biased
    estimator as the global score term.
    """
    spec = KernelSpec(family="polynomial", alpha=1.0 / f_o.dim, c=1.0, d=3)
    return mmd(f_o, f_g, spec)


def _paired(human, metric) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(human, dtype=np.float64).ravel()
    y = np.asarray(metric, dtype=np.float64).ravel()
    if x.size != y.size:
        raise LengthMismatchError(f"vector lengths differ: {x.size} vs {y.size}")
    if x.size == 0:
        raise EmptyInputError("need at least one observation")
    return x, y


def mad(human, metric) -> float:
    """Mean absolute difference between paired score vectors."""
    x, y = _paired(human, metric)
    return float(np.mean(np.abs(x - y)))


def mape(human, metric) -> float:
    """Mean absolute percentage error with the human score as denominator."""
    x, y = _paired(human, metric)
    if np.any(x == 0.0):
        raise ZeroHumanScoreError("percentage error undefined for zero human scores")
    return float(100.0 * np.mean(np.abs((x - y) / x)))
