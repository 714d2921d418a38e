"""Attention-map and deep-feature providers behind one abstraction.

Two implementations share the ``Backend`` protocol: ``OnnxBackend`` runs
an exported transformer graph through onnxruntime, and ``FixtureBackend``
is a deterministic, model-free stand-in that lets the whole scoring
pipeline (and its test suite) run without any model file.

Fixture semantics, fixed so tests can predict them exactly:

* attention = per-patch mean luminance divided by its sum over patches
  (uniform when the image is all black), hence non-negative and summing
  to one;
* feature token i = P @ p_i where p_i is the raw pixel vector of patch i
  and P is a fixed projection generated from the manifest seed.

Both backends are safe for concurrent calls: the fixture is pure, and
onnxruntime sessions support concurrent ``run``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    InferenceError,
    InvalidSpecError,
    MissingOutputError,
    ModelLoadError,
    ShapeMismatchError,
)
from .imagery import ImageTensor, PatchGrid, luminance, patch_matrix

FIXTURE_PREFIX = "fixture:"


@dataclass(frozen=True)
class BackendManifest:
    """Description of a model file and how to read its outputs."""

    model_path: str
    input_name: str = "pixel_values"
    attention_output_name: str = "attention"
    feature_output_name: str = "hidden_states"
    patch_size: int = 16
    input_size: int = 224
    feature_dim: int = 768
    channel_mean: tuple[float, float, float] = (0.5, 0.5, 0.5)
    channel_std: tuple[float, float, float] = (0.5, 0.5, 0.5)
    attention_layer: int = -1
    attention_reduction: str = "mean_over_heads"

    def __post_init__(self) -> None:
        if self.patch_size < 1 or self.input_size < 1 or self.input_size % self.patch_size:
            raise InvalidSpecError(
                f"input_size {self.input_size} not divisible by patch_size {self.patch_size}"
            )
        if self.feature_dim < 1:
            raise InvalidSpecError("feature_dim must be positive")
        if len(self.channel_mean) != 3 or len(self.channel_std) != 3:
            raise InvalidSpecError("channel_mean and channel_std must each hold 3 values")
        if any(s <= 0 for s in self.channel_std):
            raise InvalidSpecError("channel_std entries must be strictly positive")
        if self.attention_reduction != "mean_over_heads":
            raise InvalidSpecError(
                f"unsupported attention reduction {self.attention_reduction!r}"
            )
        object.__setattr__(self, "channel_mean", tuple(float(v) for v in self.channel_mean))
        object.__setattr__(self, "channel_std", tuple(float(v) for v in self.channel_std))

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid.for_image_size(self.input_size, self.patch_size)

    @property
    def patch_count(self) -> int:
        return self.grid.patch_count

    @property
    def is_fixture(self) -> bool:
        return self.model_path.startswith(FIXTURE_PREFIX)

    def to_dict(self) -> dict:
        return {
            "model_path": self.model_path,
            "input_name": self.input_name,
            "attention_output_name": self.attention_output_name,
            "feature_output_name": self.feature_output_name,
            "patch_size": self.patch_size,
            "input_size": self.input_size,
            "feature_dim": self.feature_dim,
            "channel_mean": list(self.channel_mean),
            "channel_std": list(self.channel_std),
            "attention_layer": self.attention_layer,
            "attention_reduction": self.attention_reduction,
        }


@dataclass(frozen=True)
class AttentionMap:
    """Per-patch importance scores from the classification-token row."""

    scores: np.ndarray
    source: str = "cls_to_patch"

    def __post_init__(self) -> None:
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        if scores.ndim != 1 or scores.size == 0:
            raise ValueError(f"attention scores must be a nonempty vector, got {scores.shape}")
        if not np.isfinite(scores).all() or float(scores.min()) < 0.0:
            raise ValueError("attention scores must be finite and non-negative")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return self.scores.size


@dataclass(frozen=True)
class FeatureSet:
    """Per-token deep feature vectors, one row per token."""

    tokens: np.ndarray

    def __post_init__(self) -> None:
        tokens = np.ascontiguousarray(self.tokens, dtype=np.float64)
        if tokens.ndim != 2 or tokens.shape[0] < 1:
            raise ValueError(f"expected (count, dim) token matrix, got {tokens.shape}")
        if not np.isfinite(tokens).all():
            raise ValueError("feature values must be finite")
        tokens.setflags(write=False)
        object.__setattr__(self, "tokens", tokens)

    @property
    def count(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


def load_manifest(path: str) -> BackendManifest:
    """Read a manifest JSON file; relative model paths resolve beside it."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidSpecError(f"{path}: manifest is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "model_path" not in raw:
        raise InvalidSpecError(f"{path}: manifest must be an object with a model_path")
    known = set(BackendManifest.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise InvalidSpecError(f"{path}: unknown manifest fields {sorted(unknown)}")
    for key in ("channel_mean", "channel_std"):
        if key in raw:
            raw[key] = tuple(raw[key])
    manifest = BackendManifest(**raw)
    model_path = manifest.model_path
    if not manifest.is_fixture and not os.path.isabs(model_path):
        resolved = os.path.join(os.path.dirname(os.path.abspath(path)), model_path)
        manifest = BackendManifest(**{**manifest.to_dict(), "model_path": resolved,
                                      "channel_mean": manifest.channel_mean,
                                      "channel_std": manifest.channel_std})
    return manifest


def resolve_backend_spec(spec: str) -> BackendManifest:
    """Turn a CLI model spec into a manifest.

    ``fixture:<seed>`` yields the default fixture manifest; anything else
    is treated as a path to a manifest JSON file.
    """
    if spec.startswith(FIXTURE_PREFIX):
        return BackendManifest(model_path=spec)
    if not os.path.exists(spec):
        raise ModelLoadError(f"model manifest not found: {spec}")
    return load_manifest(spec)


class FixtureBackend:
    """Deterministic stand-in backend derived purely from pixel content."""

    def __init__(self, manifest: BackendManifest):
        self.manifest = manifest
        seed_text = manifest.model_path[len(FIXTURE_PREFIX):]
        try:
            seed = int(seed_text)
        except ValueError:
            raise ModelLoadError(
                f"fixture spec must look like 'fixture:<seed>', got {manifest.model_path!r}"
            ) from None
        patch_dim = manifest.patch_size ** 2 * 3
        rng = np.random.default_rng(seed)
        # scaled so token magnitudes stay O(1) regardless of patch size
        self._projection = rng.standard_normal((manifest.feature_dim, patch_dim))
        self._projection /= math.sqrt(patch_dim)
        self._projection.setflags(write=False)

    def _check_input(self, img: ImageTensor) -> None:
        size = self.manifest.input_size
        if img.height != size or img.width != size:
            raise InferenceError(
                f"image is {img.height}x{img.width}; backend expects {size}x{size}"
            )

    def attention_map(self, img: ImageTensor) -> AttentionMap:
        """Normalized per-patch mean luminance; uniform for all-black input."""
        self._check_input(img)
        grid = self.manifest.grid
        n, ps = grid.patches_per_side, grid.patch_size
        patch_means = luminance(img).reshape(n, ps, n, ps).mean(axis=(1, 3)).ravel()
        total = patch_means.sum()
        if total <= 0.0:
            scores = np.full(grid.patch_count, 1.0 / grid.patch_count)
        else:
            scores = patch_means / total
        return AttentionMap(scores=scores)

    def deep_features(self, img: ImageTensor) -> FeatureSet:
        """Project each raw pixel patch through the seeded fixed matrix."""
        self._check_input(img)
        patches = patch_matrix(img, self.manifest.grid)
        return FeatureSet(tokens=patches @ self._projection.T)


class OnnxBackend:
    """Backend over an exported graph with named attention/feature outputs."""

    def __init__(self, manifest: BackendManifest):
        try:
            import onnxruntime
        except ImportError as exc:
            raise ModelLoadError(
                "onnxruntime is required for ONNX backends; install the 'onnx' extra"
            ) from exc
        if not os.path.exists(manifest.model_path):
            raise ModelLoadError(f"model file not found: {manifest.model_path}")
        self.manifest = manifest
        try:
            self._session = onnxruntime.InferenceSession(
                manifest.model_path, providers=["CPUExecutionProvider"]
            )
        except Exception as exc:
            raise ModelLoadError(f"cannot load {manifest.model_path}: {exc}") from exc
        outputs = {o.name: o for o in self._session.get_outputs()}
        for name in (manifest.attention_output_name, manifest.feature_output_name):
            if name not in outputs:
                raise MissingOutputError(
                    f"graph does not expose output {name!r}; found {sorted(outputs)}"
                )
        inputs = [i.name for i in self._session.get_inputs()]
        if manifest.input_name not in inputs:
            raise ModelLoadError(
                f"graph does not expose input {manifest.input_name!r}; found {inputs}"
            )
        self._check_static_shapes(outputs[manifest.feature_output_name].shape)

    def _check_static_shapes(self, feature_shape) -> None:
        dims = [d for d in (feature_shape or []) if isinstance(d, int)]
        expected_tokens = (self.manifest.patch_count, self.manifest.patch_count + 1)
        for d in dims:
            if d in (self.manifest.feature_dim,) + expected_tokens or d == 1:
                continue
            raise ShapeMismatchError(
                f"feature output dim {d} matches neither feature_dim "
                f"{self.manifest.feature_dim} nor token counts {expected_tokens}"
            )

    def _check_input(self, img: ImageTensor) -> None:
        size = self.manifest.input_size
        if img.height != size or img.width != size:
            raise InferenceError(
                f"image is {img.height}x{img.width}; backend expects {size}x{size}"
            )

    def _run(self, img: ImageTensor, output_name: str) -> np.ndarray:
        self._check_input(img)
        mean = np.asarray(self.manifest.channel_mean)
        std = np.asarray(self.manifest.channel_std)
        pixels = ((img.data - mean) / std).transpose(2, 0, 1)[None].astype(np.float32)
        try:
            (value,) = self._session.run([output_name], {self.manifest.input_name: pixels})
        except Exception as exc:
            raise InferenceError(f"inference failed: {exc}") from exc
        return np.asarray(value, dtype=np.float64)

    def attention_map(self, img: ImageTensor) -> AttentionMap:
        """CLS-token-to-patch row of the exported layer, averaged over heads."""
        raw = self._run(img, self.manifest.attention_output_name)
        n = self.manifest.patch_count
        squeezed = np.squeeze(raw)
        if squeezed.ndim == 3:  # (heads, tokens, tokens)
            row = squeezed[:, 0, 1:].mean(axis=0)
        elif squeezed.ndim == 2:  # (tokens, tokens), already head-reduced
            row = squeezed[0, 1:]
        elif squeezed.ndim == 1:  # pre-reduced CLS row
            row = squeezed[1:] if squeezed.size == n + 1 else squeezed
        else:
            raise InferenceError(f"attention output has unexpected shape {raw.shape}")
        if row.size != n:
            raise InferenceError(f"attention row has {row.size} entries, expected {n}")
        return AttentionMap(scores=np.maximum(row, 0.0))

    def deep_features(self, img: ImageTensor) -> FeatureSet:
        """Patch-token hidden states of the exported layer, CLS excluded."""
        raw = self._run(img, self.manifest.feature_output_name)
        n = self.manifest.patch_count
        tokens = np.squeeze(raw, axis=0) if raw.ndim == 3 and raw.shape[0] == 1 else raw
        if tokens.ndim != 2:
            raise InferenceError(f"feature output has unexpected shape {raw.shape}")
        if tokens.shape[0] == n + 1:
            tokens = tokens[1:]
        if tokens.shape[0] != n:
            raise InferenceError(f"got {tokens.shape[0]} tokens, expected {n} (or {n + 1})")
        if tokens.shape[1] != self.manifest.feature_dim:
            raise InferenceError(
                f"token length {tokens.shape[1]} != feature_dim {self.manifest.feature_dim}"
            )
        return FeatureSet(tokens=tokens)


Backend = FixtureBackend | OnnxBackend


def load_backend(manifest: BackendManifest) -> Backend:
    """Instantiate the backend a manifest describes.

    Calls on the returned handle are deterministic for identical inputs:
    bitwise for the fixture, within runtime tolerance for ONNX sessions.
    """
    if manifest.is_fixture:
        return FixtureBackend(manifest)
    return OnnxBackend(manifest)
