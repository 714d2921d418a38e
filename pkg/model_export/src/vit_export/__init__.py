"""One-shot ViT-to-ONNX export tooling for the scoring toolkit."""

from .exporter import (
    ATTENTION_OUTPUT,
    DEFAULT_SOURCE,
    FEATURE_OUTPUT,
    INPUT_NAME,
    DownloadError,
    ExportEnvironmentError,
    ExportError,
    ExportShapeError,
    ExportSpec,
    ViTWithNamedOutputs,
    build_manifest,
    build_model,
    check_wrapper_shapes,
    export_model,
)
from .verify import VerificationFailure, VerificationReport, verify_export

__version__ = "0.1.0"

__all__ = [
    "ATTENTION_OUTPUT",
    "DEFAULT_SOURCE",
    "DownloadError",
    "ExportEnvironmentError",
    "ExportError",
    "ExportShapeError",
    "ExportSpec",
    "FEATURE_OUTPUT",
    "INPUT_NAME",
    "VerificationFailure",
    "VerificationReport",
    "ViTWithNamedOutputs",
    "build_manifest",
    "build_model",
    "check_wrapper_shapes",
    "export_model",
    "verify_export",
]
