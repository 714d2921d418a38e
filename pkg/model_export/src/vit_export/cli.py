"""Command-line wrapper: one command to export, one to verify."""

from __future__ import annotations

import sys

import click

from .exporter import DEFAULT_SOURCE, ExportError, ExportSpec, export_model
from .verify import VerificationFailure, verify_export


@click.group()
def cli():
    """Export a ViT-Base/16 to ONNX for the scoring toolkit and verify it."""


@cli.command()
@click.option("--source", default=DEFAULT_SOURCE, show_default=True,
              help="Checkpoint id, or random / random:<seed> for offline use.")
@click.option("--opset", type=int, default=17, show_default=True)
@click.option("--out-dir", default="export", show_default=True)
def export(source, opset, out_dir):
    """Write model.onnx, manifest.json, and export_info.json."""
    try:
        model_path, manifest_path = export_model(
            ExportSpec(source_model_id=source, opset=opset, output_dir=out_dir)
        )
    except ExportError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {model_path}")
    click.echo(f"wrote {manifest_path}")


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--report", "report_path", default=None, type=click.Path(),
              help="Optional JSON file for the verification report.")
def verify(model_path, manifest_path, report_path):
    """Run the load-time checks and print per-check results."""
    try:
        report = verify_export(model_path, manifest_path, report_path)
    except VerificationFailure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for check in report.checks:
        status = "ok" if check.passed else "FAIL"
        suffix = f" ({check.detail})" if check.detail else ""
        click.echo(f"{status:4s} {check.name}{suffix}")
    if not report.passed:
        click.echo("verification failed", err=True)
        sys.exit(1)
    click.echo("verification passed")


def main() -> None:
    cli(prog_name="vit-export")


if __name__ == "__main__":
    main()
