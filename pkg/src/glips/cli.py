"""Command-line surface: score pairs, rescale values, run evaluations.

Exit codes are part of the contract so scripts can branch: 0 success,
2 invalid input (files, values, configuration), 3 backend failure
(model loading or inference). Error details go to standard error.

Every hyperparameter is a flag with a config-file fallback (TOML or
JSON via ``--config``); the model spec additionally falls back to the
``GLIPS_MODEL`` environment variable, then to the seed-0 fixture, so
the tool runs out of the box with no model file.
"""

from __future__ import annotations

import json
import math
import sys

import click

from . import harness
from .backend import load_backend, resolve_backend_spec
from .baselines import fid, fit_gaussian, kid, ms_ssim, psnr, ssim
from .errors import BackendError, InputError
from .ibs import get_table, load_bin_tables
from .imagery import PreprocessSpec, decode_image, resize
from .scoring import (
    MEDIAN_HEURISTIC,
    GlipsConfig,
    KernelSpec,
    glips_score,
    select_salient,
)

DEFAULT_MODEL = "fixture:0"

_pass_config = click.make_pass_decorator(dict, ensure=True)


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(body):
    """Run a command body under the exit-code contract."""
    try:
        return body()
    except BackendError as exc:
        _fail(3, str(exc))
    except (InputError, FileNotFoundError, OSError) as exc:
        _fail(2, str(exc))


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        blob = fh.read()
    if path.endswith(".toml"):
        if sys.version_info >= (3, 11):
            import tomllib as toml_reader
        else:
            import tomli as toml_reader
        return toml_reader.loads(blob.decode("utf-8"))
    return json.loads(blob.decode("utf-8"))


def _bandwidth(value, fallback):
    if value is None:
        return fallback
    if isinstance(value, str):
        if value == MEDIAN_HEURISTIC or value == "median":
            return MEDIAN_HEURISTIC
        return float(value)
    return value


def _glips_config(config: dict, lambda_, k, kernel, gamma, sigma, alpha, c, degree) -> GlipsConfig:
    """Merge flag values over config-file values over defaults."""
    kcfg = config.get("kernel", {})
    spec = KernelSpec(
        family=kernel or kcfg.get("family", "rbf"),
        gamma=_bandwidth(gamma, _bandwidth(kcfg.get("gamma"), MEDIAN_HEURISTIC)),
        sigma=_bandwidth(sigma, _bandwidth(kcfg.get("sigma"), MEDIAN_HEURISTIC)),
        alpha=alpha if alpha is not None else kcfg.get("alpha", 1.0),
        c=c if c is not None else kcfg.get("c", 1.0),
        d=degree if degree is not None else kcfg.get("d", 3),
    )
    return GlipsConfig(
        lambda_=lambda_ if lambda_ is not None else config.get("lambda", 0.62),
        k=k if k is not None else config.get("k", 16),
        kernel=spec,
        pairing=config.get("pairing", "attention_rank"),
    )


def _resolve_model(model: str | None, config: dict) -> str:
    return model or config.get("model") or DEFAULT_MODEL


def _resolve_bins(bins: str | None, config: dict):
    return load_bin_tables(bins or config.get("bins"))


def _format_float(value: float | None) -> str:
    if value is None:
        return "n/a"
    if math.isinf(value):
        return "inf"
    return f"{value:.6g}"


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML or JSON file with default flag values.")
@click.pass_context
def cli(ctx, config_path):
    """Perceptual quality scoring and Likert rescaling for image pairs."""
    ctx.obj = _guarded(lambda: _load_config_file(config_path))


def _kernel_options(fn):
    for option in reversed(
        [
            click.option("--kernel", type=click.Choice(["rbf", "polynomial", "exponential"]),
                         default=None, help="Kernel family for the global term."),
            click.option("--gamma", default=None,
                         help="RBF width, a number or 'median-heuristic'."),
            click.option("--sigma", default=None,
                         help="Exponential decay, a number or 'median-heuristic'."),
            click.option("--alpha", type=float, default=None, help="Polynomial slope."),
            click.option("--c", type=float, default=None, help="Polynomial constant."),
            click.option("--degree", type=int, default=None, help="Polynomial degree."),
        ]
    ):
        fn = option(fn)
    return fn


@cli.command()
@click.argument("original", type=click.Path())
@click.argument("generated", type=click.Path())
@click.option("--metric", default="glips",
              type=click.Choice(list(harness.ALL_METRICS)), show_default=True)
@click.option("--lambda", "lambda_", type=click.FloatRange(0.0, 1.0), default=None,
              help="Balance between local and global terms.")
@click.option("--k", type=click.IntRange(min=1), default=None,
              help="Number of top attention patches.")
@_kernel_options
@click.option("--model", envvar="GLIPS_MODEL", default=None,
              help="Backend manifest path or fixture:<seed>.")
@click.option("--bins", type=click.Path(), default=None,
              help="Bin-table file overriding the shipped defaults.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@_pass_config
def score(config, original, generated, metric, lambda_, k, kernel, gamma, sigma,
          alpha, c, degree, model, bins, fmt):
    """Score one original/generated pair and rescale onto the Likert range."""

    def body():
        manifest = resolve_backend_spec(_resolve_model(model, config))
        tables = _resolve_bins(bins, config)
        spec = PreprocessSpec(target_size=manifest.input_size)
        orig = resize(decode_image(original), spec)
        gen = resize(decode_image(generated), spec)
        extra = {}
        if metric == "glips":
            cfg = _glips_config(config, lambda_, k, kernel, gamma, sigma, alpha, c, degree)
            result = glips_score(orig, gen, load_backend(manifest), cfg)
            actual = result.score
            extra = {"s1": result.s1, "s2": result.s2}
        elif metric == "ssim":
            actual = ssim(orig, gen)
        elif metric == "ms_ssim":
            actual = ms_ssim(orig, gen)
        elif metric == "psnr":
            actual = psnr(orig, gen)
        else:
            backend = load_backend(manifest)
            f_o = backend.deep_features(orig)
            f_g = backend.deep_features(gen)
            if metric == "fid":
                actual = fid(fit_gaussian(f_o), fit_gaussian(f_g))
            else:
                actual = kid(f_o, f_g)
        if math.isinf(actual):
            rescaled, label = None, None
        else:
            table = get_table(tables, metric)
            rescaled = table.score(actual)
            label = table.classify(actual).label
        if fmt == "json":
            click.echo(json.dumps(
                {"metric": metric, "actual": actual, "rescaled": rescaled,
                 "likert": label, **extra},
                sort_keys=True,
            ))
        else:
            for key, value in extra.items():
                click.echo(f"{key}: {_format_float(value)}")
            click.echo(f"metric: {metric}")
            click.echo(f"actual: {_format_float(actual)}")
            click.echo(f"rescaled: {_format_float(rescaled)}")
            click.echo(f"likert: {label if label is not None else 'n/a'}")

    _guarded(body)


@cli.command()
@click.option("--metric", required=True, help="Metric name present in the bin tables.")
@click.option("--value", type=float, required=True, help="Raw metric value to rescale.")
@click.option("--bins", type=click.Path(), default=None)
@click.option("--explain", is_flag=True,
              help="Show the published range and both interpolation conventions.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@_pass_config
def rescale(config, metric, value, bins, explain, fmt):
    """Classify a raw metric value and interpolate its Likert score."""

    def body():
        table = get_table(_resolve_bins(bins, config), metric)
        detail = table.explain(value)
        if fmt == "json":
            payload = detail if explain else {
                "metric": metric, "value": value,
                "label": detail["label"], "score": detail["score"],
            }
            click.echo(json.dumps(payload, sort_keys=True))
            return
        click.echo(f"label: {detail['label']}")
        click.echo(f"score: {_format_float(detail['score'])}")
        if explain:
            lo, hi = detail["published_range"]
            click.echo(f"published range: {lo} to {hi}")
            click.echo(f"score span: {detail['score_span'][0]} to {detail['score_span'][1]}")
            click.echo(
                "unit-slope variant: "
                f"{_format_float(detail['unit_slope_score'])} "
                "(one Likert point per bin width; can leave the span)"
            )

    _guarded(body)


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--human", "human_path", type=click.Path(), required=True)
@click.option("--metrics", default=",".join(harness.ALL_METRICS), show_default=True,
              help="Comma-separated metric names.")
@click.option("--lambda", "lambda_", type=click.FloatRange(0.0, 1.0), default=None)
@click.option("--k", type=click.IntRange(min=1), default=None)
@_kernel_options
@click.option("--model", envvar="GLIPS_MODEL", default=None)
@click.option("--bins", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), default="glips-report",
              show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "markdown"]),
              default="csv", show_default=True)
@_pass_config
def evaluate(config, manifest_path, human_path, metrics, lambda_, k, kernel, gamma,
             sigma, alpha, c, degree, model, bins, out_dir, fmt):
    """Evaluate all metrics over a dataset and write report artifacts."""

    def body():
        dataset = harness.load_dataset_manifest(manifest_path)
        humans = harness.load_human_scores(human_path)
        backend = load_backend(resolve_backend_spec(_resolve_model(model, config)))
        cfg = _glips_config(config, lambda_, k, kernel, gamma, sigma, alpha, c, degree)
        tables = _resolve_bins(bins, config)
        metric_list = [m.strip() for m in metrics.split(",") if m.strip()]
        report = harness.evaluate(dataset, humans, metric_list, backend, cfg, tables)
        paths = harness.emit_report(report, fmt, out_dir)
        for metric, value in report.mean_mape_by_metric().items():
            click.echo(f"mean MAPE {metric}: {value:.2f}%")
        for path in paths:
            click.echo(f"wrote {path}")

    _guarded(body)


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--human", "human_path", type=click.Path(), required=True)
@click.option("--lambdas", default="0,0.25,0.5,0.54,0.62,0.75,1", show_default=True,
              help="Comma-separated balance values in [0, 1].")
@click.option("--k", type=click.IntRange(min=1), default=None)
@_kernel_options
@click.option("--model", envvar="GLIPS_MODEL", default=None)
@click.option("--bins", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Optional CSV file for the sweep table.")
@_pass_config
def sweep(config, manifest_path, human_path, lambdas, k, kernel, gamma, sigma,
          alpha, c, degree, model, bins, out_path):
    """Sweep the balance parameter and report mean MAPE per value."""

    def body():
        dataset = harness.load_dataset_manifest(manifest_path)
        humans = harness.load_human_scores(human_path)
        backend = load_backend(resolve_backend_spec(_resolve_model(model, config)))
        cfg = _glips_config(config, None, k, kernel, gamma, sigma, alpha, c, degree)
        tables = _resolve_bins(bins, config)
        try:
            values = [float(v) for v in lambdas.split(",") if v.strip()]
        except ValueError as exc:
            raise InputError(f"bad --lambdas value: {exc}") from exc
        result = harness.lambda_sweep(dataset, humans, backend, values, cfg, tables)
        click.echo("lambda,mean_mape")
        lines = ["lambda,mean_mape"]
        for lam, value in result.rows:
            line = f"{lam!r},{value!r}"
            lines.append(line)
            click.echo(f"{lam:.4g},{value:.4f}")
        click.echo(f"best lambda: {result.best_lambda:.4g}")
        if out_path is not None:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
            click.echo(f"wrote {out_path}")

    _guarded(body)


@cli.command("inspect-attention")
@click.option("--image", "image_path", type=click.Path(), required=True)
@click.option("--model", envvar="GLIPS_MODEL", default=None)
@click.option("--top-k", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--heatmap", type=click.Path(), default=None,
              help="Optional grayscale heatmap image to write.")
@_pass_config
def inspect_attention(config, image_path, model, top_k, heatmap):
    """Dump per-patch attention scores and the top-k selection as JSON."""

    def body():
        manifest = resolve_backend_spec(_resolve_model(model, config))
        backend = load_backend(manifest)
        img = resize(decode_image(image_path), PreprocessSpec(target_size=manifest.input_size))
        att = backend.attention_map(img)
        selection = select_salient(att, top_k)
        payload = {
            "patch_count": len(att),
            "patches_per_side": manifest.grid.patches_per_side,
            "scores": [float(s) for s in att.scores],
            "top": [
                {"index": i, "score": float(att.scores[i])} for i in selection.indices
            ],
        }
        if heatmap is not None:
            from .plotting import render_attention_heatmap

            render_attention_heatmap(
                att.scores, manifest.grid.patches_per_side, manifest.patch_size, heatmap
            )
            payload["heatmap"] = heatmap
        click.echo(json.dumps(payload, sort_keys=True))

    _guarded(body)


def main() -> None:
    cli(prog_name="glips")


if __name__ == "__main__":
    main()
