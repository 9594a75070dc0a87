"""CLI commands: gen-synth, run, sweep; exit codes and file outputs."""

import csv
import json

import pytest
from click.testing import CliRunner

from mnid.cli import main
from mnid.evaluation import REPORT_SCHEMA

SPEC = {
    "n_classes": 6, "n_known": 2, "points_per_class": 20, "dim": 6,
    "center_scale": 1.0, "cluster_std": 0.05, "seed": 7, "init_per_class": 4,
}


@pytest.fixture
def data_dir(tmp_path):
    runner = CliRunner()
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(SPEC))
    result = runner.invoke(main, ["gen-synth", "--spec", str(spec_path),
                                  "--out", str(tmp_path / "data")])
    assert result.exit_code == 0, result.output
    return tmp_path


def config_file(tmp_path, **overrides):
    cfg = {"seed": 7, "kappa": 10}
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestGenSynth:
    def test_writes_corpus_and_embeddings(self, data_dir):
        assert (data_dir / "data" / "corpus.jsonl").exists()
        assert (data_dir / "data" / "embeddings.bin").exists()

    def test_invalid_spec_exits_2(self, tmp_path):
        bad = dict(SPEC, n_known=6)
        spec_path = tmp_path / "bad.json"
        spec_path.write_text(json.dumps(bad))
        result = CliRunner().invoke(main, ["gen-synth", "--spec", str(spec_path),
                                           "--out", str(tmp_path / "o")])
        assert result.exit_code == 2


class TestRun:
    def _run(self, data_dir, cfg_path, report_name="report.json", extra=()):
        return CliRunner().invoke(main, [
            "run",
            "--config", str(cfg_path),
            "--corpus", str(data_dir / "data" / "corpus.jsonl"),
            "--embeddings", str(data_dir / "data" / "embeddings.bin"),
            "--report", str(data_dir / report_name),
            *extra,
        ])

    def test_report_written_and_schema_valid(self, data_dir):
        import jsonschema

        result = self._run(data_dir, config_file(data_dir))
        assert result.exit_code == 0, result.output
        report = json.loads((data_dir / "report.json").read_text())
        jsonschema.validate(report, REPORT_SCHEMA)
        assert report["budget"]["total"] == 10 * 6
        csv_lines = (data_dir / "report.json.csv").read_text().splitlines()
        assert csv_lines[0] == "metric,value"
        assert any(line.startswith("discovery.found,") for line in csv_lines)

    def test_same_seed_byte_identical_reports(self, data_dir):
        cfg = config_file(data_dir)
        assert self._run(data_dir, cfg, "r1.json").exit_code == 0
        assert self._run(data_dir, cfg, "r2.json").exit_code == 0
        a = json.loads((data_dir / "r1.json").read_text())
        b = json.loads((data_dir / "r2.json").read_text())
        a.pop("runtime"), b.pop("runtime")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_budget_infeasible_exits_3(self, data_dir):
        # kappa 1 gives B = 6 < |D_init| = 8
        result = self._run(data_dir, config_file(data_dir, kappa=1))
        assert result.exit_code == 3

    def test_baseline_flag_tags_report(self, data_dir):
        result = self._run(data_dir, config_file(data_dir), "rb.json",
                           extra=["--baseline", "random-few"])
        assert result.exit_code == 0, result.output
        report = json.loads((data_dir / "rb.json").read_text())
        assert report["baseline"] == "random_few"
        assert report["metrics"] is not None

    def test_early_exit_recorded_for_tiny_budget(self, data_dir):
        # kappa 2 gives B = 12, only 4 beyond D_init: NCD stops on budget guard
        result = self._run(data_dir, config_file(data_dir, kappa=2), "tiny.json")
        assert result.exit_code == 0, result.output
        report = json.loads((data_dir / "tiny.json").read_text())
        assert report["ncd"]["exit_reason"] in ("budget", "converged")
        assert report["budget"]["spent"] <= report["budget"]["total"]


class TestSweep:
    def _sweep_config(self, data_dir, **overrides):
        cfg = {
            "seed": 7,
            "kappa": 10,
            "data": {
                "corpus": str(data_dir / "data" / "corpus.jsonl"),
                "embeddings": str(data_dir / "data" / "embeddings.bin"),
            },
        }
        cfg.update(overrides)
        path = data_dir / "sweep.json"
        path.write_text(json.dumps(cfg))
        return path

    def _rows(self, path):
        with open(path, newline="") as handle:
            return list(csv.DictReader(handle))

    def test_variant_range_gives_nine_rows(self, data_dir):
        out = data_dir / "sweep.csv"
        result = CliRunner().invoke(main, [
            "sweep", "--config", str(self._sweep_config(data_dir)),
            "--variants", "1..9", "--seeds", "1", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        rows = self._rows(out)
        assert len(rows) == 9
        assert [r["variant"] for r in rows] == [str(v) for v in range(1, 10)]
        assert all(r["status"] == "ok" for r in rows)

    def test_variant_vs_baseline_rows(self, data_dir):
        out = data_dir / "pair.csv"
        result = CliRunner().invoke(main, [
            "sweep", "--config", str(self._sweep_config(data_dir)),
            "--variants", "9,random-few", "--seeds", "10", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        rows = self._rows(out)
        assert len(rows) == 20
        labels = {r["label"] for r in rows}
        assert labels == {"9", "random-few"}

    def test_pq_grid_reproduces_table_shape(self, data_dir):
        out = data_dir / "pq.csv"
        tokens = "p2q1,p2q2,p2q3,p3q0,p3q1,p3q2,p4q1"
        result = CliRunner().invoke(main, [
            "sweep", "--config", str(self._sweep_config(data_dir)),
            "--variants", tokens, "--seeds", "1", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        rows = self._rows(out)
        assert [(r["p"], r["q"]) for r in rows] == [
            ("2", "1"), ("2", "2"), ("2", "3"), ("3", "0"),
            ("3", "1"), ("3", "2"), ("4", "1"),
        ]

    def test_failed_run_recorded_and_sweep_continues(self, data_dir):
        out = data_dir / "fail.csv"
        result = CliRunner().invoke(main, [
            "sweep", "--config", str(self._sweep_config(data_dir, kappa=1)),
            "--variants", "9,3", "--seeds", "1", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        rows = self._rows(out)
        assert len(rows) == 2
        assert all(r["status"] == "error" for r in rows)
        assert all("budget" in r["message"] for r in rows)
