"""Post-export verification: the checks a consumer re-asserts at load.

Runs one inference on a fixed deterministic test image and validates
output names, shapes, finiteness, and repeat-inference drift. A passing
report means the scoring toolkit's ONNX backend will accept the files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DRIFT_LIMIT = 1e-4


class VerificationFailure(Exception):
    """Raised when a named check cannot even be attempted."""


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(Check(name=name, passed=passed, detail=detail))
        return passed

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
        }

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def probe_image(size: int) -> np.ndarray:
    """Fixed gradient probe image, NCHW float32 in the raw [0, 1] range."""
    ramp = np.linspace(0.0, 1.0, size, dtype=np.float32)
    plane = np.outer(ramp, ramp[::-1])
    pixels = np.stack([plane, plane.T, np.full_like(plane, 0.25)])
    return pixels[None]


def verify_export(model_path: str, manifest_path: str,
                  report_path: str | None = None) -> VerificationReport:
    """Check the exported files against the manifest's declarations.

    Never raises on a failed check; inspect ``report.passed``. Raises
    VerificationFailure only when the runtime itself is unavailable.
    """
    report = VerificationReport()
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        report.add("manifest-parses", True)
    except (OSError, json.JSONDecodeError) as exc:
        report.add("manifest-parses", False, str(exc))
        if report_path:
            report.write(report_path)
        return report

    required = (
        "model_path", "input_name", "attention_output_name", "feature_output_name",
        "patch_size", "input_size", "feature_dim", "channel_mean", "channel_std",
    )
    missing = [key for key in required if key not in manifest]
    report.add("manifest-fields", not missing, f"missing: {missing}" if missing else "")
    if missing:
        if report_path:
            report.write(report_path)
        return report

    try:
        import onnxruntime
    except ImportError as exc:
        raise VerificationFailure(
            "onnxruntime is required to verify an export"
        ) from exc

    try:
        session = onnxruntime.InferenceSession(
            model_path, providers=["CPUExecutionProvider"]
        )
        report.add("model-loads", True)
    except Exception as exc:
        report.add("model-loads", False, str(exc))
        if report_path:
            report.write(report_path)
        return report

    outputs = {o.name for o in session.get_outputs()}
    for key in ("attention_output_name", "feature_output_name"):
        name = manifest[key]
        report.add(
            f"output-present:{name}",
            name in outputs,
            "" if name in outputs else f"MissingOutput: graph exposes {sorted(outputs)}",
        )
    inputs = {i.name for i in session.get_inputs()}
    report.add(
        f"input-present:{manifest['input_name']}",
        manifest["input_name"] in inputs,
        "" if manifest["input_name"] in inputs else f"graph exposes {sorted(inputs)}",
    )
    if not report.passed:
        if report_path:
            report.write(report_path)
        return report

    size = int(manifest["input_size"])
    tokens = (size // int(manifest["patch_size"])) ** 2 + 1
    dim = int(manifest["feature_dim"])
    mean = np.asarray(manifest["channel_mean"], dtype=np.float32).reshape(3, 1, 1)
    std = np.asarray(manifest["channel_std"], dtype=np.float32).reshape(3, 1, 1)
    pixels = (probe_image(size) - mean) / std
    names = [manifest["attention_output_name"], manifest["feature_output_name"]]

    try:
        attention, hidden = session.run(names, {manifest["input_name"]: pixels})
        report.add("inference-runs", True)
    except Exception as exc:
        report.add("inference-runs", False, str(exc))
        if report_path:
            report.write(report_path)
        return report

    att_shape = tuple(np.squeeze(attention).shape)
    att_ok = att_shape[-2:] == (tokens, tokens) or att_shape == (tokens - 1,)
    report.add(
        "attention-shape", att_ok,
        "" if att_ok else f"ShapeMismatch: got {attention.shape}, tokens {tokens}",
    )
    hid = np.squeeze(hidden, axis=0) if hidden.ndim == 3 else hidden
    hid_ok = hid.ndim == 2 and hid.shape[0] in (tokens, tokens - 1) and hid.shape[1] == dim
    report.add(
        "feature-shape", hid_ok,
        "" if hid_ok else f"ShapeMismatch: got {hidden.shape}, want ({tokens}, {dim})",
    )
    finite = bool(np.isfinite(attention).all() and np.isfinite(hidden).all())
    report.add("outputs-finite", finite)

    attention2, hidden2 = session.run(names, {manifest["input_name"]: pixels})
    drift = max(
        float(np.abs(attention - attention2).max()),
        float(np.abs(hidden - hidden2).max()),
    )
    report.add(
        "repeat-drift", drift <= DRIFT_LIMIT, f"max abs drift {drift:.2e}"
    )

    if report_path:
        report.write(report_path)
    return report
