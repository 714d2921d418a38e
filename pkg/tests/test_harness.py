import json
import math

import pytest

from glips import (
    BackendManifest,
    load_backend,
    load_dataset_manifest,
    load_human_scores,
    shipped_human_scores_path,
)
from glips.errors import (
    EmptyLambdaListError,
    InvalidSpecError,
    MalformedCsvError,
    MissingHumanScoreError,
    ScoreOutOfRangeError,
    UnknownMetricError,
)
from glips.harness import (
    CSV_HEADER,
    emit_report,
    evaluate,
    lambda_sweep,
    report_from_json,
    report_to_csv,
    report_to_json,
    report_to_markdown,
)
from glips.scoring import GlipsConfig

from conftest import make_dataset

PUBLISHED_AVERAGES = {
    "camera": 4.06,
    "dalle2": 3.63,
    "glide": 2.04,
    "stable_diffusion": 3.30,
    "dalle3": 2.75,
}


@pytest.fixture
def backend():
    return load_backend(BackendManifest(model_path="fixture:5", input_size=64, feature_dim=16))


class TestHumanScores:
    def test_shipped_averages_match_published(self):
        humans = load_human_scores(shipped_human_scores_path())
        averages = humans.averages()
        for model, expected in PUBLISHED_AVERAGES.items():
            assert averages[model] == pytest.approx(expected, abs=5e-3)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(MalformedCsvError):
            load_human_scores(str(path))

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("model,score\nx,3\n")
        with pytest.raises(MalformedCsvError):
            load_human_scores(str(path))

    def test_score_out_of_range(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("model,question_id,mean_score\nx,1,5.5\n")
        with pytest.raises(ScoreOutOfRangeError):
            load_human_scores(str(path))

    def test_duplicate_question_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("model,question_id,mean_score\nx,1,3.0\nx,1,3.1\n")
        with pytest.raises(MalformedCsvError):
            load_human_scores(str(path))


class TestDatasetManifest:
    def test_loads_and_sorts_models(self, tmp_path, rng):
        manifest_path, _ = make_dataset(tmp_path, rng, models=("zeta", "alpha"))
        manifest = load_dataset_manifest(manifest_path)
        assert manifest.models() == ["alpha", "zeta"]
        assert len(manifest.entries) == 2

    def test_entry_without_generated_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"entries": [{"caption_id": "a", "original_path": "x.png", "generated": {}}]}))
        with pytest.raises(InvalidSpecError):
            load_dataset_manifest(str(path))

    def test_relative_paths_resolve(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(
            json.dumps({"entries": [{"caption_id": "a", "original_path": "img/x.png",
                                     "generated": {"m": "img/y.png"}}]})
        )
        manifest = load_dataset_manifest(str(path))
        assert manifest.entries[0].original_path == str(tmp_path / "img/x.png")


class TestEvaluate:
    def test_identity_dataset_pins_glips_row(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(
            tmp_path, rng, models=("alpha",), identity=True, size=64,
            human_scores={"alpha": 3.3},
        )
        report = evaluate(
            load_dataset_manifest(manifest_path),
            load_human_scores(human_path),
            ["glips", "psnr"],
            backend,
            GlipsConfig(k=4),
        )
        rows = {r.metric: r for r in report.rows}
        glips_row = rows["glips"]
        assert glips_row.actual == 0.0
        assert glips_row.rescaled == pytest.approx(5.0, abs=1e-12)
        assert glips_row.mad == pytest.approx(abs(3.3 - 5.0), abs=1e-9)
        # identical pixels push psnr to the infinite sentinel, excluded from IBS
        psnr_row = rows["psnr"]
        assert math.isinf(psnr_row.actual)
        assert psnr_row.rescaled is None and psnr_row.mad is None
        assert psnr_row.likert_metric is None

    def test_published_pair_arithmetic(self, tmp_path, rng, backend):
        # rescaled 4.52 vs human 3.30 must reproduce the published row stats
        from glips.baselines import mad, mape

        assert mad([3.30], [4.52]) == pytest.approx(1.22, abs=1e-9)
        assert mape([3.30], [4.52]) == pytest.approx(36.97, abs=0.05)

    def test_missing_human_score(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng, models=("alpha", "beta"))
        humans_text = "model,question_id,mean_score\nalpha,1,3.0\n"
        human_path2 = tmp_path / "partial.csv"
        human_path2.write_text(humans_text)
        with pytest.raises(MissingHumanScoreError):
            evaluate(
                load_dataset_manifest(manifest_path),
                load_human_scores(str(human_path2)),
                ["ssim"],
                backend,
            )

    def test_empty_metrics_empty_report(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        report = evaluate(
            load_dataset_manifest(manifest_path),
            load_human_scores(human_path),
            [],
            backend,
        )
        assert report.rows == ()

    def test_unknown_metric_rejected(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        with pytest.raises(UnknownMetricError):
            evaluate(
                load_dataset_manifest(manifest_path),
                load_human_scores(human_path),
                ["lpips"],
                backend,
            )

    def test_rows_cover_all_models_and_metrics_in_order(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng, models=("beta", "alpha"))
        metrics = ["ssim", "glips", "kid"]
        report = evaluate(
            load_dataset_manifest(manifest_path),
            load_human_scores(human_path),
            metrics,
            backend,
            GlipsConfig(k=4),
        )
        keys = [(r.model, r.metric) for r in report.rows]
        assert keys == [
            ("alpha", "glips"), ("alpha", "kid"), ("alpha", "ssim"),
            ("beta", "glips"), ("beta", "kid"), ("beta", "ssim"),
        ]

    def test_row_arithmetic_recomputes(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        report = evaluate(
            load_dataset_manifest(manifest_path),
            load_human_scores(human_path),
            ["glips", "ssim", "fid", "kid"],
            backend,
            GlipsConfig(k=4),
        )
        for row in report.rows:
            assert row.mad == pytest.approx(abs(row.human - row.rescaled), abs=1e-9)
            assert row.mape_percent == pytest.approx(100 * row.mad / row.human, abs=1e-9)


class TestReports:
    @pytest.fixture
    def report(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        return evaluate(
            load_dataset_manifest(manifest_path),
            load_human_scores(human_path),
            ["glips", "ssim", "psnr"],
            backend,
            GlipsConfig(k=4),
        )

    def test_csv_header_exact(self, report):
        text = report_to_csv(report)
        assert text.splitlines()[0] == CSV_HEADER
        assert len(text.splitlines()) == 1 + len(report.rows)

    def test_json_round_trip(self, report):
        assert report_from_json(report_to_json(report)) == report

    def test_markdown_table_shape(self, report):
        lines = report_to_markdown(report).splitlines()
        assert lines[0].startswith("| model | metric |")
        assert len(lines) == 2 + len(report.rows)

    def test_emit_writes_table_plot_data_and_figure(self, report, tmp_path):
        out = tmp_path / "out"
        paths = emit_report(report, "csv", str(out))
        assert [p.rsplit("/", 1)[1] for p in paths] == ["report.csv", "plot_data.json", "report.svg"]
        for p in paths:
            assert (out / p.rsplit("/", 1)[1]).exists()
        data = json.loads((out / "plot_data.json").read_text())
        assert data["models"] == sorted({r.model for r in report.rows})
        labels = [s["label"] for s in data["series"]]
        assert labels[-1] == "human"
        for series in data["series"]:
            assert len(series["values"]) == len(data["models"])

    def test_emit_markdown_and_json_formats(self, report, tmp_path):
        assert emit_report(report, "json", str(tmp_path / "j"))
        assert emit_report(report, "markdown", str(tmp_path / "m"))
        with pytest.raises(InvalidSpecError):
            emit_report(report, "yaml", str(tmp_path / "y"))

    def test_two_runs_byte_identical(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        def run():
            return report_to_csv(
                evaluate(
                    load_dataset_manifest(manifest_path),
                    load_human_scores(human_path),
                    ["glips", "ssim", "psnr", "fid", "kid"],
                    backend,
                    GlipsConfig(k=4),
                )
            )
        assert run() == run()


class TestLambdaSweep:
    def test_single_lambda_matches_evaluate(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        manifest = load_dataset_manifest(manifest_path)
        humans = load_human_scores(human_path)
        cfg = GlipsConfig(k=4, lambda_=0.62)
        sweep = lambda_sweep(manifest, humans, backend, [0.62], cfg)
        report = evaluate(manifest, humans, ["glips"], backend, cfg)
        assert sweep.rows[0][1] == pytest.approx(
            report.mean_mape_by_metric()["glips"], abs=1e-12
        )
        assert sweep.best_lambda == 0.62

    def test_identity_dataset_lambda_degenerate(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng, identity=True, size=64)
        result = lambda_sweep(
            load_dataset_manifest(manifest_path),
            load_human_scores(human_path),
            backend,
            [0.0, 1.0],
            GlipsConfig(k=4),
        )
        # zero global distance forces score 0 at every lambda
        assert result.rows[0][1] == pytest.approx(result.rows[1][1], abs=1e-12)
        assert result.best_lambda == 1.0  # tie breaks toward the larger value

    def test_published_grid_gives_two_rows(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        result = lambda_sweep(
            load_dataset_manifest(manifest_path),
            load_human_scores(human_path),
            backend,
            [0.54, 0.62],
            GlipsConfig(k=4),
        )
        assert [lam for lam, _ in result.rows] == [0.54, 0.62]
        assert all(m >= 0 for _, m in result.rows)

    def test_empty_lambda_list(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        with pytest.raises(EmptyLambdaListError):
            lambda_sweep(
                load_dataset_manifest(manifest_path),
                load_human_scores(human_path),
                backend,
                [],
            )

    def test_out_of_range_lambda(self, tmp_path, rng, backend):
        manifest_path, human_path = make_dataset(tmp_path, rng)
        with pytest.raises(InvalidSpecError):
            lambda_sweep(
                load_dataset_manifest(manifest_path),
                load_human_scores(human_path),
                backend,
                [1.5],
            )
