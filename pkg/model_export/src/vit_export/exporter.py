"""Export a ViT-Base/16 image model to ONNX with two named outputs.

The exported graph exposes exactly what the scoring toolkit's backend
contract consumes: the raw per-head attention tensor of the last encoder
layer (``attention``, shaped batch x heads x tokens x tokens, reduced on
the consumer side) and the final hidden states (``hidden_states``, batch
x tokens x dim). Alongside the model file the tool writes a manifest JSON
matching the backend schema field-for-field, plus an ``export_info.json``
sidecar recording which checkpoint was used.

Model sources: a pretrained checkpoint id (downloaded via transformers)
or ``random``/``random:<seed>`` for a deterministic, freshly initialized
ViT-Base/16 — useful for offline shape and interoperability testing.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import torch
from torch import nn

ATTENTION_OUTPUT = "attention"
FEATURE_OUTPUT = "hidden_states"
INPUT_NAME = "pixel_values"

DEFAULT_SOURCE = "google/vit-base-patch16-224"
RANDOM_PREFIX = "random"

# normalization the default checkpoint family was trained with
DEFAULT_MEAN = (0.5, 0.5, 0.5)
DEFAULT_STD = (0.5, 0.5, 0.5)


class ExportError(Exception):
    """Base class for export tool failures."""


class DownloadError(ExportError):
    """Checkpoint could not be fetched or instantiated."""


class ExportShapeError(ExportError):
    """The assembled model does not produce the declared tensor shapes."""


class ExportEnvironmentError(ExportError):
    """The ONNX serialization toolchain is not installed."""


@dataclass(frozen=True)
class ExportSpec:
    source_model_id: str = DEFAULT_SOURCE
    opset: int = 17
    output_dir: str = "export"

    def __post_init__(self) -> None:
        if self.opset < 11:
            raise ExportError(f"opset {self.opset} is too old for attention graphs")


class ViTWithNamedOutputs(nn.Module):
    """Forward wrapper returning (last-layer attention, final hidden states)."""

    def __init__(self, vit: nn.Module):
        super().__init__()
        self.vit = vit

    def forward(self, pixel_values: torch.Tensor):
        out = self.vit(pixel_values, output_attentions=True)
        return out.attentions[-1], out.last_hidden_state


def _random_seed(source: str) -> int | None:
    if source == RANDOM_PREFIX:
        return 0
    if source.startswith(RANDOM_PREFIX + ":"):
        try:
            return int(source.split(":", 1)[1])
        except ValueError:
            raise DownloadError(f"bad random spec {source!r}; use random:<seed>") from None
    return None


def build_model(spec: ExportSpec) -> tuple[ViTWithNamedOutputs, dict]:
    """Instantiate the wrapped model and collect manifest-relevant facts.

    Attention must come from the eager implementation so the weights are
    materialized as graph tensors rather than fused kernels.
    """
    from transformers import ViTConfig, ViTModel

    seed = _random_seed(spec.source_model_id)
    mean, std = DEFAULT_MEAN, DEFAULT_STD
    if seed is not None:
        config = ViTConfig()
        config._attn_implementation = "eager"
        torch.manual_seed(seed)
        vit = ViTModel(config, add_pooling_layer=False)
    else:
        try:
            vit = ViTModel.from_pretrained(
                spec.source_model_id, add_pooling_layer=False,
                attn_implementation="eager",
            )
        except Exception as exc:
            raise DownloadError(
                f"cannot obtain checkpoint {spec.source_model_id!r}: {exc}"
            ) from exc
        config = vit.config
        mean, std = _normalization_for(spec.source_model_id)
    if config.image_size % config.patch_size:
        raise ExportShapeError(
            f"image size {config.image_size} not divisible by patch {config.patch_size}"
        )
    facts = {
        "input_size": int(config.image_size),
        "patch_size": int(config.patch_size),
        "feature_dim": int(config.hidden_size),
        "attention_layer": int(config.num_hidden_layers) - 1,
        "num_heads": int(config.num_attention_heads),
        "channel_mean": list(mean),
        "channel_std": list(std),
    }
    return ViTWithNamedOutputs(vit.eval()), facts


def _normalization_for(model_id: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    try:
        from transformers import AutoImageProcessor

        proc = AutoImageProcessor.from_pretrained(model_id)
        return tuple(proc.image_mean), tuple(proc.image_std)
    except Exception:
        return DEFAULT_MEAN, DEFAULT_STD


def check_wrapper_shapes(model: ViTWithNamedOutputs, facts: dict) -> None:
    """Run one in-process forward and require the declared geometry."""
    tokens = (facts["input_size"] // facts["patch_size"]) ** 2 + 1
    probe = torch.zeros(1, 3, facts["input_size"], facts["input_size"])
    with torch.no_grad():
        attention, hidden = model(probe)
    expected_attention = (1, facts["num_heads"], tokens, tokens)
    expected_hidden = (1, tokens, facts["feature_dim"])
    if tuple(attention.shape) != expected_attention:
        raise ExportShapeError(
            f"attention shape {tuple(attention.shape)} != {expected_attention}"
        )
    if tuple(hidden.shape) != expected_hidden:
        raise ExportShapeError(f"hidden shape {tuple(hidden.shape)} != {expected_hidden}")


def build_manifest(facts: dict, model_filename: str) -> dict:
    """Manifest matching the scoring backend's schema field-for-field."""
    return {
        "model_path": model_filename,
        "input_name": INPUT_NAME,
        "attention_output_name": ATTENTION_OUTPUT,
        "feature_output_name": FEATURE_OUTPUT,
        "patch_size": facts["patch_size"],
        "input_size": facts["input_size"],
        "feature_dim": facts["feature_dim"],
        "channel_mean": facts["channel_mean"],
        "channel_std": facts["channel_std"],
        "attention_layer": facts["attention_layer"],
        "attention_reduction": "mean_over_heads",
    }


def _dump_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def export_model(spec: ExportSpec) -> tuple[str, str]:
    """Produce model.onnx + manifest.json (+ export_info.json sidecar).

    Returns (model path, manifest path). The manifest bytes depend only on
    the spec, so re-exports are byte-stable even when the model file
    differs in serialization metadata.
    """
    model, facts = build_model(spec)
    check_wrapper_shapes(model, facts)
    os.makedirs(spec.output_dir, exist_ok=True)
    model_path = os.path.join(spec.output_dir, "model.onnx")
    probe = torch.zeros(1, 3, facts["input_size"], facts["input_size"])
    try:
        torch.onnx.export(
            model,
            (probe,),
            model_path,
            input_names=[INPUT_NAME],
            output_names=[ATTENTION_OUTPUT, FEATURE_OUTPUT],
            opset_version=spec.opset,
            dynamo=False,
        )
    except ImportError as exc:
        raise ExportEnvironmentError(f"ONNX toolchain unavailable: {exc}") from exc
    except Exception as exc:
        if "onnx" in str(exc).lower() and "not installed" in str(exc).lower():
            raise ExportEnvironmentError(f"ONNX toolchain unavailable: {exc}") from exc
        raise ExportError(f"export failed: {exc}") from exc

    manifest_path = os.path.join(spec.output_dir, "manifest.json")
    _dump_json(build_manifest(facts, "model.onnx"), manifest_path)
    _dump_json(
        {
            "source_model_id": spec.source_model_id,
            "opset": spec.opset,
            "outputs": [ATTENTION_OUTPUT, FEATURE_OUTPUT],
            "num_heads": facts["num_heads"],
        },
        os.path.join(spec.output_dir, "export_info.json"),
    )
    return model_path, manifest_path
