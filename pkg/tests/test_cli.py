from __future__ import annotations

import json

import jsonschema
import pytest

from nfrgen.cli import (EXIT_CAPACITY, EXIT_IO, EXIT_OK, EXIT_VALIDATION,
                        demo_frs_path, main)

from importlib import resources


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def cli_json(capsys, *argv) -> tuple[int, dict]:
    code, out, _ = run_cli(capsys, *argv)
    return code, json.loads(out)


def load_schemas() -> dict:
    text = resources.files("nfrgen").joinpath("schemas/cli_output.json").read_text()
    return json.loads(text)


@pytest.fixture
def demo_records(tmp_path, capsys):
    out = tmp_path / "records.json"
    code, _, _ = run_cli(capsys, "ingest", "--input", str(demo_frs_path()),
                         "--out", str(out))
    assert code == EXIT_OK
    return out


class TestIngestSelect:
    def test_ingest_counts(self, tmp_path, capsys):
        out = tmp_path / "records.json"
        code, doc = cli_json(capsys, "ingest", "--input", str(demo_frs_path()),
                             "--out", str(out), "--output", "json")
        assert code == EXIT_OK
        assert doc["frs"] == 34 and doc["nfrs"] == 4
        jsonschema.validate(doc, load_schemas()["ingest"])

    def test_select_deterministic(self, tmp_path, capsys, demo_records):
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (out_a, out_b):
            code, doc = cli_json(capsys, "select", "--records", str(demo_records),
                                 "--count", "10", "--seed", "7",
                                 "--out", str(out), "--output", "json")
            assert code == EXIT_OK
            jsonschema.validate(doc, load_schemas()["select"])
        assert out_a.read_text() == out_b.read_text()

    def test_select_capacity_exit_code(self, tmp_path, capsys, demo_records):
        code, _, err = run_cli(capsys, "select", "--records", str(demo_records),
                               "--count", "99", "--out", str(tmp_path / "s.json"))
        assert code == EXIT_CAPACITY
        assert "99" in err

    def test_usage_error_exit_code(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["ingest", "--no-such-flag"])
        assert exc.value.code == 2


class TestGenerate:
    def test_mock_generate_writes_eight_artifacts(self, tmp_path, capsys):
        out_dir = tmp_path / "run1"
        code, doc = cli_json(capsys, "generate", "--mock",
                             "--frs", str(demo_frs_path()),
                             "--out", str(out_dir), "--output", "json")
        assert code == EXIT_OK
        assert len(doc["artifacts"]) == 8
        assert doc["total"] == 34 * 8 * 5
        assert all(status == "complete" for status in doc["statuses"].values())
        jsonschema.validate(doc, load_schemas()["generate"])

    def test_existing_run_refused_without_force(self, tmp_path, capsys):
        out_dir = tmp_path / "run1"
        run_cli(capsys, "generate", "--mock", "--frs", str(demo_frs_path()),
                "--out", str(out_dir))
        code, _, err = run_cli(capsys, "generate", "--mock",
                               "--frs", str(demo_frs_path()), "--out", str(out_dir))
        assert code == EXIT_IO
        assert "--resume" in err or "--force" in err

    def test_resume_flag_on_complete_run(self, tmp_path, capsys):
        out_dir = tmp_path / "run1"
        run_cli(capsys, "generate", "--mock", "--frs", str(demo_frs_path()),
                "--out", str(out_dir))
        code, doc = cli_json(capsys, "generate", "--mock",
                             "--frs", str(demo_frs_path()), "--out", str(out_dir),
                             "--resume", "--output", "json")
        assert code == EXIT_OK
        assert doc["total"] == 34 * 8 * 5


def build_run_and_store(tmp_path, capsys) -> tuple:
    run_dir = tmp_path / "run1"
    store = tmp_path / "eval.db"
    run_cli(capsys, "generate", "--mock", "--frs", str(demo_frs_path()),
            "--out", str(run_dir), "--mock-nfrs", "2")
    evaluators = [{"evaluator_id": f"E{i + 1:02d}", "display_name": f"Expert {i + 1}",
                   "years_experience": 10 + i, "role_title": "Quality Engineer"}
                  for i in range(10)]
    roster = tmp_path / "evaluators.json"
    roster.write_text(json.dumps(evaluators))
    return run_dir, store, roster


class TestStudyWorkflow:
    def test_sample_twice_identical_files(self, tmp_path, capsys):
        run_dir, store, _ = build_run_and_store(tmp_path, capsys)
        out_a, out_b = tmp_path / "sample-a.json", tmp_path / "sample-b.json"
        args = ["sample", "--task", "scoring", "--n", "40", "--seed", "1",
                "--store", str(store), "--run", str(run_dir), "--fr-pool", "3"]
        code, doc = cli_json(capsys, *args, "--out", str(out_a), "--output", "json")
        assert code == EXIT_OK, doc
        jsonschema.validate(doc, load_schemas()["sample"])
        code, _ = cli_json(capsys, *args, "--out", str(out_b), "--output", "json")
        assert code == EXIT_OK
        assert out_a.read_text() == out_b.read_text()

    def test_full_workflow(self, tmp_path, capsys):
        run_dir, store, roster = build_run_and_store(tmp_path, capsys)
        code, _, err = run_cli(capsys, "sample", "--task", "scoring", "--n", "40",
                               "--seed", "1", "--store", str(store),
                               "--run", str(run_dir), "--fr-pool", "3")
        assert code == EXIT_OK, err
        code, _, err = run_cli(capsys, "sample", "--task", "selection", "--n", "40",
                               "--seed", "2", "--store", str(store),
                               "--fr-pool", "3")
        assert code == EXIT_OK, err

        code, doc = cli_json(capsys, "assign", "--store", str(store),
                             "--evaluators", str(roster), "--per-fr", "3",
                             "--seed", "3", "--output", "json")
        assert code == EXIT_OK, doc
        jsonschema.validate(doc, load_schemas()["assign"])
        assert len(doc["tokens"]) == 10

        # Submit through the service like the API would, then analyze + export.
        from nfrgen.evalsvc import EvalService, EvalStore, SCORING, SELECTION
        with EvalStore(store) as s:
            service = EvalService(s)
            for evaluator_id in sorted(doc["tokens"]):
                for task, submit in ((SCORING, lambda e, n: service.record_score(
                        e, n, 5, 4)),
                        (SELECTION, lambda e, n: service.record_selection(
                            e, n, "Reliability"))):
                    assignment = s.assignment_for(evaluator_id, task)
                    if assignment:
                        for nfr_id in assignment.nfr_ids[:2]:
                            submit(evaluator_id, nfr_id)

        report_path = tmp_path / "report.json"
        code, doc = cli_json(capsys, "analyze", "--store", str(store),
                             "--run", str(run_dir), "--report", str(report_path),
                             "--output", "json")
        assert code == EXIT_OK, doc
        jsonschema.validate(doc, load_schemas()["analyze"])
        report = json.loads(report_path.read_text())
        assert report["score_distributions"]["validity"]["total"] > 0

        export_dir = tmp_path / "export"
        code, doc = cli_json(capsys, "export", "--store", str(store),
                             "--out", str(export_dir), "--format", "csv",
                             "--output", "json")
        assert code == EXIT_OK
        jsonschema.validate(doc, load_schemas()["export"])
        assert (export_dir / "scores.csv").exists()


class TestAnalyzeFixture:
    def test_fixture_report_values(self, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        code, doc = cli_json(capsys, "analyze", "--fixture",
                             "--report", str(report_path), "--output", "json")
        assert code == EXIT_OK
        assert doc["mean_validity"] == 4.63
        assert doc["exact_rate_pct"] == 80.4
        report = json.loads(report_path.read_text())
        assert report["score_distributions"]["applicability"]["mean"] == 4.59

    def test_identical_rerun_is_ok_without_force(self, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        assert run_cli(capsys, "analyze", "--fixture",
                       "--report", str(report_path))[0] == EXIT_OK
        assert run_cli(capsys, "analyze", "--fixture",
                       "--report", str(report_path))[0] == EXIT_OK

    def test_conflicting_output_refused_then_forced(self, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        report_path.write_text("{} // something else")
        code, _, err = run_cli(capsys, "analyze", "--fixture",
                               "--report", str(report_path))
        assert code == EXIT_IO
        assert "--force" in err
        code, _, _ = run_cli(capsys, "analyze", "--fixture",
                             "--report", str(report_path), "--force")
        assert code == EXIT_OK

    def test_analyze_requires_a_source(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "analyze",
                               "--report", str(tmp_path / "r.json"))
        assert code == EXIT_VALIDATION

    def test_text_output_with_bars(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "analyze", "--fixture", "--bars",
                               "--report", str(tmp_path / "r.json"))
        assert code == EXIT_OK
        assert "validity" in out and "#" in out
