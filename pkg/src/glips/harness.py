"""Batch evaluation: datasets in, Likert-aligned comparison tables out.

Feeds every original/generated pair through the configured metrics,
rescales each model's aggregate value onto the Likert range, and tabulates
the deviation from the human averages (per-row absolute difference and
percentage error). Pairwise metrics (glips, ssim, ms_ssim, psnr) average
over dataset entries; set-level metrics (fid, kid) pool deep-feature
tokens across each model's images before one distance computation.

All images are resized to the backend's input size before any metric, so
every consumer sees identical pixel data. Entries may be scored in
parallel in principle; this implementation is a single-threaded reduction
with deterministic (model, then metric) row ordering, which also makes
repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import baselines
from .backend import Backend, FeatureSet
from .errors import (
    EmptyLambdaListError,
    InvalidSpecError,
    MalformedCsvError,
    MissingHumanScoreError,
    ScoreOutOfRangeError,
    UnknownMetricError,
)
from .ibs import BinTable, get_table, likert_label, load_bin_tables
from .imagery import ImageTensor, PreprocessSpec, decode_image, resize
from .scoring import GlipsConfig, combine_scores, glips_score

PAIRWISE_METRICS = ("glips", "ssim", "ms_ssim", "psnr")
SET_METRICS = ("fid", "kid")
ALL_METRICS = PAIRWISE_METRICS + SET_METRICS

CSV_HEADER = (
    "model,metric,actual,rescaled,human,likert_metric,likert_human,mad,mape"
)


@dataclass(frozen=True)
class ManifestEntry:
    caption_id: str
    original_path: str
    generated: tuple[tuple[str, str], ...]  # (model name, file path) pairs

    def generated_map(self) -> dict[str, str]:
        return dict(self.generated)


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]

    def models(self) -> list[str]:
        names: set[str] = set()
        for entry in self.entries:
            names.update(dict(entry.generated))
        return sorted(names)


@dataclass(frozen=True)
class HumanScores:
    """Per-model, per-question mean ratings on the 1-5 scale."""

    rows: tuple[tuple[str, int, float], ...]

    def averages(self) -> dict[str, float]:
        by_model: dict[str, list[float]] = {}
        for model, _, score in self.rows:
            by_model.setdefault(model, []).append(score)
        return {model: float(np.mean(scores)) for model, scores in by_model.items()}


@dataclass(frozen=True)
class ReportRow:
    model: str
    metric: str
    actual: float
    rescaled: float | None
    human: float
    likert_metric: str | None
    likert_human: str
    mad: float | None
    mape_percent: float | None


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[ReportRow, ...]

    def mean_mape_by_metric(self) -> dict[str, float]:
        grouped: dict[str, list[float]] = {}
        for row in self.rows:
            if row.mape_percent is not None:
                grouped.setdefault(row.metric, []).append(row.mape_percent)
        return {metric: float(np.mean(v)) for metric, v in sorted(grouped.items())}


def load_dataset_manifest(path: str) -> DatasetManifest:
    """Read a dataset manifest JSON file.

    Schema: {"entries": [{"caption_id": str, "original_path": str,
    "generated": {model name: file path}}, ...]}. Relative image paths
    resolve against the manifest's directory.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidSpecError(f"{path}: manifest is not valid JSON: {exc}") from exc
    entries_raw = raw.get("entries") if isinstance(raw, dict) else None
    if not entries_raw:
        raise InvalidSpecError(f"{path}: manifest must hold a nonempty 'entries' list")
    base = os.path.dirname(os.path.abspath(path))

    def _resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    entries = []
    for i, e in enumerate(entries_raw):
        generated = e.get("generated") or {}
        if not generated:
            raise InvalidSpecError(f"{path}: entry {i} has no generated images")
        entries.append(
            ManifestEntry(
                caption_id=str(e.get("caption_id", i)),
                original_path=_resolve(e["original_path"]),
                generated=tuple(sorted((m, _resolve(p)) for m, p in generated.items())),
            )
        )
    return DatasetManifest(entries=tuple(entries))


def load_human_scores(path: str) -> HumanScores:
    """Read the human-score CSV: header model,question_id,mean_score."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsvError(f"{path}: file is empty") from None
        if [h.strip() for h in header] != ["model", "question_id", "mean_score"]:
            raise MalformedCsvError(
                f"{path}: expected header model,question_id,mean_score, got {header}"
            )
        rows = []
        for lineno, fields in enumerate(reader, start=2):
            if not fields or fields == [""]:
                continue
            if len(fields) != 3:
                raise MalformedCsvError(f"{path}:{lineno}: expected 3 fields, got {fields}")
            model, qid_text, score_text = (f.strip() for f in fields)
            try:
                qid = int(qid_text)
                score = float(score_text)
            except ValueError as exc:
                raise MalformedCsvError(f"{path}:{lineno}: {exc}") from exc
            if not 1 <= qid <= 5:
                raise MalformedCsvError(f"{path}:{lineno}: question_id must be 1-5")
            if not 1.0 <= score <= 5.0:
                raise ScoreOutOfRangeError(
                    f"{path}:{lineno}: mean_score {score} outside [1, 5]"
                )
            rows.append((model, qid, score))
    if not rows:
        raise MalformedCsvError(f"{path}: no score rows")
    seen = set()
    for model, qid, _ in rows:
        if (model, qid) in seen:
            raise MalformedCsvError(f"{path}: duplicate row for {model} question {qid}")
        seen.add((model, qid))
    return HumanScores(rows=tuple(rows))


def shipped_human_scores_path() -> str:
    """Path of the packaged human-study averages (five questions per model)."""
    from importlib import resources

    return str(resources.files("glips.data").joinpath("human_scores.csv"))


class _ImageCache:
    """Decode + resize each path once; everyone sees identical pixels."""

    def __init__(self, spec: PreprocessSpec):
        self._spec = spec
        self._images: dict[str, ImageTensor] = {}

    def get(self, path: str) -> ImageTensor:
        if path not in self._images:
            self._images[path] = resize(decode_image(path), self._spec)
        return self._images[path]


def _pooled_features(backend: Backend, cache: _ImageCache, paths: list[str]) -> FeatureSet:
    tokens = [backend.deep_features(cache.get(p)).tokens for p in paths]
    return FeatureSet(tokens=np.vstack(tokens))


def _rescale_row(
    model: str,
    metric: str,
    actual: float,
    human: float,
    table: BinTable,
) -> ReportRow:
    if math.isinf(actual):
        # infinite sentinel (identical images under psnr): no finite bin
        return ReportRow(
            model=model, metric=metric, actual=actual, rescaled=None, human=human,
            likert_metric=None, likert_human=likert_label(human), mad=None,
            mape_percent=None,
        )
    rescaled = table.score(actual)
    return ReportRow(
        model=model,
        metric=metric,
        actual=actual,
        rescaled=rescaled,
        human=human,
        likert_metric=table.classify(actual).label,
        likert_human=likert_label(human),
        mad=baselines.mad([human], [rescaled]),
        mape_percent=baselines.mape([human], [rescaled]),
    )


def evaluate(
    manifest: DatasetManifest,
    humans: HumanScores,
    metrics: list[str],
    backend: Backend,
    cfg: GlipsConfig | None = None,
    tables: dict[str, BinTable] | None = None,
) -> EvaluationReport:
    """Score every model under every requested metric against the humans.

    Raises MissingHumanScoreError when a manifest model has no human
    average, and UnknownMetricError for unsupported metric names. An
    empty metrics list yields an empty report.
    """
    cfg = cfg or GlipsConfig()
    tables = tables if tables is not None else load_bin_tables()
    for metric in metrics:
        if metric not in ALL_METRICS:
            raise UnknownMetricError(
                f"cannot compute metric {metric!r}; supported: {ALL_METRICS}"
            )
    averages = humans.averages()
    models = manifest.models()
    missing = [m for m in models if m not in averages]
    if missing:
        raise MissingHumanScoreError(f"no human average for models: {missing}")

    cache = _ImageCache(PreprocessSpec(target_size=backend.manifest.input_size))
    rows: list[ReportRow] = []
    original_paths = [e.original_path for e in manifest.entries]
    pooled_originals: FeatureSet | None = None

    for model in models:
        pair_paths = [
            (e.original_path, e.generated_map()[model])
            for e in manifest.entries
            if model in e.generated_map()
        ]
        for metric in sorted(set(metrics)):
            if metric in SET_METRICS:
                if pooled_originals is None:
                    pooled_originals = _pooled_features(backend, cache, original_paths)
                pooled_generated = _pooled_features(
                    backend, cache, [g for _, g in pair_paths]
                )
                if metric == "fid":
                    actual = baselines.fid(
                        baselines.fit_gaussian(pooled_originals),
                        baselines.fit_gaussian(pooled_generated),
                    )
                else:
                    actual = baselines.kid(pooled_originals, pooled_generated)
            else:
                values = []
                for orig_path, gen_path in pair_paths:
                    orig, gen = cache.get(orig_path), cache.get(gen_path)
                    if metric == "glips":
                        values.append(glips_score(orig, gen, backend, cfg).score)
                    elif metric == "ssim":
                        values.append(baselines.ssim(orig, gen))
                    elif metric == "ms_ssim":
                        values.append(baselines.ms_ssim(orig, gen))
                    else:
                        values.append(baselines.psnr(orig, gen))
                actual = float(np.mean(values))
            rows.append(
                _rescale_row(model, metric, actual, averages[model], get_table(tables, metric))
            )
    return EvaluationReport(rows=tuple(rows))


@dataclass(frozen=True)
class LambdaSweepResult:
    """Mean percentage error of the combined score per balance value."""

    rows: tuple[tuple[float, float], ...]
    best_lambda: float


def lambda_sweep(
    manifest: DatasetManifest,
    humans: HumanScores,
    backend: Backend,
    lambdas: list[float],
    cfg: GlipsConfig | None = None,
    tables: dict[str, BinTable] | None = None,
) -> LambdaSweepResult:
    """Evaluate the combined score across balance values.

    The local and global terms are computed once per image pair and
    recombined per lambda, so one sweep costs barely more than one
    evaluation. Ties in mean MAPE break toward the larger lambda.
    """
    if not lambdas:
        raise EmptyLambdaListError("no lambda values to sweep")
    for lam in lambdas:
        if not 0.0 <= lam <= 1.0:
            raise InvalidSpecError(f"lambda must lie in [0, 1], got {lam}")
    cfg = cfg or GlipsConfig()
    tables = tables if tables is not None else load_bin_tables()
    table = get_table(tables, "glips")
    averages = humans.averages()
    models = manifest.models()
    missing = [m for m in models if m not in averages]
    if missing:
        raise MissingHumanScoreError(f"no human average for models: {missing}")

    cache = _ImageCache(PreprocessSpec(target_size=backend.manifest.input_size))
    components: dict[str, list[tuple[float, float]]] = {}
    for model in models:
        pairs = []
        for entry in manifest.entries:
            gen_path = entry.generated_map().get(model)
            if gen_path is None:
                continue
            result = glips_score(cache.get(entry.original_path), cache.get(gen_path), backend, cfg)
            pairs.append((result.s1, result.s2))
        components[model] = pairs

    rows = []
    for lam in sorted(set(lambdas)):
        mapes = []
        for model in models:
            scores = [
                min(max(combine_scores(s1, s2, lam), 0.0), 1.0)
                for s1, s2 in components[model]
            ]
            actual = float(np.mean(scores))
            rescaled = table.score(actual)
            mapes.append(baselines.mape([averages[model]], [rescaled]))
        rows.append((lam, float(np.mean(mapes))))
    best = min(rows, key=lambda r: (r[1], -r[0]))[0]
    return LambdaSweepResult(rows=tuple(rows), best_lambda=best)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def report_to_csv(report: EvaluationReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for r in report.rows:
        writer.writerow(
            [
                r.model, r.metric, _cell(r.actual), _cell(r.rescaled), _cell(r.human),
                _cell(r.likert_metric), _cell(r.likert_human), _cell(r.mad),
                _cell(r.mape_percent),
            ]
        )
    return buffer.getvalue()


def report_to_json(report: EvaluationReport) -> str:
    records = [
        {
            "model": r.model,
            "metric": r.metric,
            "actual": r.actual,
            "rescaled": r.rescaled,
            "human": r.human,
            "likert_metric": r.likert_metric,
            "likert_human": r.likert_human,
            "mad": r.mad,
            "mape": r.mape_percent,
        }
        for r in report.rows
    ]
    return json.dumps(records, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> EvaluationReport:
    rows = tuple(
        ReportRow(
            model=rec["model"],
            metric=rec["metric"],
            actual=rec["actual"],
            rescaled=rec["rescaled"],
            human=rec["human"],
            likert_metric=rec["likert_metric"],
            likert_human=rec["likert_human"],
            mad=rec["mad"],
            mape_percent=rec["mape"],
        )
        for rec in json.loads(text)
    )
    return EvaluationReport(rows=rows)


def report_to_markdown(report: EvaluationReport) -> str:
    def fmt(value, digits=4):
        if value is None:
            return "-"
        if isinstance(value, float):
            return "inf" if math.isinf(value) else f"{value:.{digits}f}"
        return str(value)

    lines = [
        "| model | metric | actual | rescaled | human | likert (metric) | likert (human) | MAD | MAPE % |",
        "| --- | --- | --- | --- | --- | --- | --- | --- | --- |",
    ]
    for r in report.rows:
        lines.append(
            "| "
            + " | ".join(
                [
                    r.model, r.metric, fmt(r.actual), fmt(r.rescaled), fmt(r.human),
                    fmt(r.likert_metric), fmt(r.likert_human), fmt(r.mad),
                    fmt(r.mape_percent, 2),
                ]
            )
            + " |"
        )
    return "\n".join(lines) + "\n"


def plot_data(report: EvaluationReport) -> dict:
    """Grouped-bar values (one group per model) in plain numeric form."""
    models = sorted({r.model for r in report.rows})
    metrics = sorted({r.metric for r in report.rows})
    by_key = {(r.model, r.metric): r for r in report.rows}
    series = [
        {
            "label": metric,
            "values": [
                (by_key[(m, metric)].rescaled if (m, metric) in by_key else None)
                for m in models
            ],
        }
        for metric in metrics
    ]
    human = {r.model: r.human for r in report.rows}
    series.append({"label": "human", "values": [human.get(m) for m in models]})
    return {"models": models, "score_max": 5.0, "series": series}


def emit_report(report: EvaluationReport, format: str, out_dir: str) -> list[str]:
    """Write the report table, its plot data, and a rendered figure.

    Returns the created file paths: the table (report.csv/.json/.md by
    format), plot_data.json, and report.svg.
    """
    from .plotting import render_report_figure

    renderers = {
        "csv": ("report.csv", report_to_csv),
        "json": ("report.json", report_to_json),
        "markdown": ("report.md", report_to_markdown),
    }
    if format not in renderers:
        raise InvalidSpecError(f"format must be one of {sorted(renderers)}, got {format!r}")
    os.makedirs(out_dir, exist_ok=True)
    filename, renderer = renderers[format]
    table_path = os.path.join(out_dir, filename)
    with open(table_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(renderer(report))
    data_path = os.path.join(out_dir, "plot_data.json")
    with open(data_path, "w", encoding="utf-8") as fh:
        json.dump(plot_data(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    figure_path = os.path.join(out_dir, "report.svg")
    render_report_figure(report, figure_path)
    return [table_path, data_path, figure_path]
