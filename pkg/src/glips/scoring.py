"""Global-local perceptual score: salient-patch Dice plus feature-set MMD.

The score couples two views of an image pair. The local term S1 inverts
the mean modified Dice similarity over the top-k attention patches; the
global term S2 is the squared maximum mean discrepancy between the two
images' deep-feature token sets. They combine as

    score = S2 * (1 - lambda * S1)

so that lower is better on both axes, with ``lambda`` balancing how much
local disagreement discounts the global distance. The result is clamped
to [0, 1], the range the shipped bin tables cover.

All functions are pure given a backend handle; scoring different image
pairs concurrently is safe.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .backend import AttentionMap, Backend, FeatureSet
from .errors import (
    DimensionMismatchError,
    EmptyAttentionError,
    EmptyPairingError,
    InvalidSpecError,
    LengthMismatchError,
    SelectionLengthMismatchError,
    UnresolvedHyperparameterError,
    ValueOutOfRangeError,
)
from .imagery import ImageTensor, PatchGrid, extract_pixel_patch

MEDIAN_HEURISTIC = "median-heuristic"

KERNEL_FAMILIES = ("rbf", "polynomial", "exponential")

PAIRINGS = ("attention_rank", "spatial_index")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters for the MMD term.

    ``gamma`` (rbf) and ``sigma`` (exponential) may carry the
    ``median-heuristic`` placeholder until resolved against a concrete
    pair of feature sets; ``alpha``, ``c`` and ``d`` parameterize the
    polynomial family.
    """

    family: str = "rbf"
    gamma: float | str = MEDIAN_HEURISTIC
    alpha: float = 1.0
    c: float = 1.0
    d: int = 3
    sigma: float | str = MEDIAN_HEURISTIC

    def __post_init__(self) -> None:
        if self.family not in KERNEL_FAMILIES:
            raise InvalidSpecError(f"unknown kernel family {self.family!r}")
        if self.d < 1:
            raise InvalidSpecError("polynomial degree d must be >= 1")
        for name in ("gamma", "sigma"):
            value = getattr(self, name)
            if isinstance(value, str):
                if value != MEDIAN_HEURISTIC:
                    raise InvalidSpecError(f"{name} must be a number or {MEDIAN_HEURISTIC!r}")
            elif value <= 0:
                raise InvalidSpecError(f"{name} must be strictly positive")

    @property
    def is_resolved(self) -> bool:
        if self.family == "rbf":
            return not isinstance(self.gamma, str)
        if self.family == "exponential":
            return not isinstance(self.sigma, str)
        return True


@dataclass(frozen=True)
class SalientSelection:
    """Patch indices ordered by descending attention."""

    indices: tuple[int, ...]
    k: int

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class GlipsConfig:
    """Hyperparameters of the combined score."""

    lambda_: float = 0.62
    k: int = 16
    kernel: KernelSpec = field(default_factory=KernelSpec)
    pairing: str = "attention_rank"

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_ <= 1.0:
            raise InvalidSpecError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if self.k < 1:
            raise InvalidSpecError("k must be >= 1")
        if self.pairing not in PAIRINGS:
            raise InvalidSpecError(f"pairing must be one of {PAIRINGS}")


@dataclass(frozen=True)
class GlipsResult:
    s1: float
    s2: float
    score: float


def select_salient(att: AttentionMap, k: int) -> SalientSelection:
    """Pick the min(k, patch_count) highest-attention patch indices.

    Order is descending by score; ties break toward the lower index, so
    the output is reproducible for uniform maps.
    """
    if k < 1:
        raise InvalidSpecError("k must be >= 1")
    scores = att.scores
    if scores.size == 0:
        raise EmptyAttentionError("attention map holds no scores")
    order = np.argsort(-scores, kind="stable")
    take = min(k, scores.size)
    return SalientSelection(indices=tuple(int(i) for i in order[:take]), k=k)


def dice_patch(a: np.ndarray, b: np.ndarray) -> float:
    """Modified Dice coefficient for continuous patches in [0, 1].

    Computes 2*sum(a*b) / (sum(a) + sum(b)). Two all-zero patches count
    as identical empty content and return 1. Note self-similarity is
    sum(p**2)/sum(p), strictly below 1 for non-binary patches.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise LengthMismatchError(f"patch lengths differ: {a.size} vs {b.size}")
    for name, v in (("a", a), ("b", b)):
        if v.size and (float(v.min()) < 0.0 or float(v.max()) > 1.0):
            raise ValueOutOfRangeError(f"patch {name} has values outside [0, 1]")
    denominator = float(a.sum() + b.sum())
    if denominator == 0.0:
        return 1.0
    return float(2.0 * np.dot(a, b) / denominator)


def local_similarity(
    orig: ImageTensor,
    gen: ImageTensor,
    sel_o: SalientSelection,
    sel_g: SalientSelection,
    grid: PatchGrid,
    pairing: str = "attention_rank",
) -> tuple[float, float]:
    """Mean Dice over paired salient patches and its inversion S1.

    ``attention_rank`` pairs the j-th most salient patch of each image;
    ``spatial_index`` intersects the two selections and pairs equal
    indices, failing with EmptyPairingError when disjoint. Returns
    (dice_mean, s1) with s1 = 1 - dice_mean.
    """
    if pairing not in PAIRINGS:
        raise InvalidSpecError(f"pairing must be one of {PAIRINGS}")
    if pairing == "attention_rank":
        if len(sel_o) != len(sel_g):
            raise SelectionLengthMismatchError(
                f"selection lengths differ: {len(sel_o)} vs {len(sel_g)}"
            )
        pairs = list(zip(sel_o.indices, sel_g.indices))
    else:
        common = sorted(set(sel_o.indices) & set(sel_g.indices))
        if not common:
            raise EmptyPairingError("selections share no patch index")
        pairs = [(i, i) for i in common]
    values = [
        dice_patch(extract_pixel_patch(orig, grid, i), extract_pixel_patch(gen, grid, j))
        for i, j in pairs
    ]
    dice_mean = float(np.mean(values))
    return dice_mean, 1.0 - dice_mean


def kernel_eval(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Evaluate the kernel on a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise LengthMismatchError(f"vector lengths differ: {x.size} vs {y.size}")
    return float(_kernel_matrix(spec, x[None, :], y[None, :])[0, 0])


def _kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if not spec.is_resolved:
        raise UnresolvedHyperparameterError(
            f"kernel {spec.family!r} still carries a {MEDIAN_HEURISTIC!r} placeholder"
        )
    if spec.family == "polynomial":
        return (spec.alpha * (a @ b.T) + spec.c) ** spec.d
    if spec.family == "rbf":
        return np.exp(-spec.gamma * cdist(a, b, "sqeuclidean"))
    return np.exp(-cdist(a, b, "euclidean") / spec.sigma)


def resolve_median_heuristic(
    spec: KernelSpec, f_o: FeatureSet, f_g: FeatureSet
) -> KernelSpec:
    """Fill bandwidth placeholders from the pooled token set.

    sigma becomes the median pairwise Euclidean distance over the union
    of both token sets (self-distances excluded), falling back to 1 when
    the median is zero; for the rbf family gamma = 1 / (2 * sigma**2).
    Specs without placeholders are returned unchanged.
    """
    if spec.is_resolved:
        return spec
    pooled = np.vstack([f_o.tokens, f_g.tokens])
    if pooled.shape[0] < 2:
        sigma = 1.0
    else:
        median = float(np.median(pdist(pooled)))
        sigma = median if median > 0.0 else 1.0
    if spec.family == "rbf":
        return dataclasses.replace(spec, gamma=1.0 / (2.0 * sigma * sigma))
    return dataclasses.replace(spec, sigma=sigma)


def mmd(f_o: FeatureSet, f_g: FeatureSet, spec: KernelSpec) -> float:
    """Squared maximum mean discrepancy between two token sets (S2).

    Uses the biased V-statistic including i = j diagonal terms:
    mean(K_oo) + mean(K_gg) - 2 * mean(K_og), clamped from below at zero
    to absorb floating-point negatives. Identical sets give exactly 0.
    """
    a, b = f_o.tokens, f_g.tokens
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"feature dims differ: {a.shape[1]} vs {b.shape[1]}"
        )
    value = (
        float(_kernel_matrix(spec, a, a).mean())
        + float(_kernel_matrix(spec, b, b).mean())
        - 2.0 * float(_kernel_matrix(spec, a, b).mean())
    )
    return max(value, 0.0)


def combine_scores(s1: float, s2: float, lambda_: float) -> float:
    """Blend the local and global terms: s2 * (1 - lambda * s1), unclamped."""
    return s2 * (1.0 - lambda_ * s1)


def glips_score(
    orig: ImageTensor, gen: ImageTensor, backend: Backend, cfg: GlipsConfig
) -> GlipsResult:
    """Full pipeline on a preprocessed image pair. Lower is better.

    Both images must already be resized to the backend's input size.
    The kernel's median heuristic, when requested, is resolved per pair
    from the two feature sets. The combined score is clamped to [0, 1]
    so downstream Likert binning stays total.
    """
    att_o = backend.attention_map(orig)
    att_g = backend.attention_map(gen)
    sel_o = select_salient(att_o, cfg.k)
    sel_g = select_salient(att_g, cfg.k)
    grid = backend.manifest.grid
    _, s1 = local_similarity(orig, gen, sel_o, sel_g, grid, cfg.pairing)
    f_o = backend.deep_features(orig)
    f_g = backend.deep_features(gen)
    kernel = resolve_median_heuristic(cfg.kernel, f_o, f_g)
    s2 = mmd(f_o, f_g, kernel)
    score = min(max(combine_scores(s1, s2, cfg.lambda_), 0.0), 1.0)
    return GlipsResult(s1=s1, s2=s2, score=score)
