import json

from typer.testing import CliRunner

import flowdiag.io
from flowdiag.cli import app

runner = CliRunner()


def test_cli_help() -> None:
    r = runner.invoke(app, ["--help"])
    assert r.exit_code == 0
    for command in ("run", "sweep", "selftest", "show-report"):
        assert command in r.stdout


def test_run_ok(write_scenario, tmp_path):
    report_path = tmp_path / "out" / "report.json"
    path = write_scenario(
        {
            "model": "quadratic",
            "f0": 1.0,
            "g0": 0.6,
            "integrator": {"abs_tol": 1e-14, "rel_tol": 1e-12},
            "outputs": {"report_json": str(report_path)},
        }
    )

    r = runner.invoke(app, ["run", str(path)])

    assert r.exit_code == 0
    assert "Exit status: 0" in r.stdout
    assert json.loads(report_path.read_text())["exit_status"] == 0


def test_run_residual_failure_exits_1(write_scenario):
    path = write_scenario({"model": "quadratic", "f0": 1.0, "g0": 0.6, "thresholds": {"final_abs_g": 0.0}})

    r = runner.invoke(app, ["run", str(path)])

    assert r.exit_code == 1
    assert "above_threshold" in r.stdout


def test_run_model_error_exits_2(write_scenario):
    path = write_scenario({"model": "eph", "omega": 1, "delta": 1, "m0": 0.2, "method": "both"})

    r = runner.invoke(app, ["run", str(path)])

    assert r.exit_code == 2
    assert "resonance" in r.stdout


def test_run_missing_file_exits_3(tmp_path):
    r = runner.invoke(app, ["run", str(tmp_path / "absent.json")])

    assert r.exit_code == 3
    assert "I/O Error" in r.stdout


def test_run_unwritable_output_exits_3(write_scenario, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("a file, not a directory")
    path = write_scenario(
        {"model": "quadratic", "f0": 1.0, "g0": 0.2, "outputs": {"report_json": str(blocker / "report.json")}}
    )

    r = runner.invoke(app, ["run", str(path)])

    assert r.exit_code == 3


def test_run_validation_error_exits_4(write_scenario):
    path = write_scenario({"model": "quadratic", "f0": 1.0, "g0": 0.2, "colour": "blue"})

    r = runner.invoke(app, ["run", str(path)])

    assert r.exit_code == 4
    assert "colour" in r.stdout


def test_run_malformed_json_exits_4(write_scenario):
    r = runner.invoke(app, ["run", str(write_scenario('{"model": '))])

    assert r.exit_code == 4
    assert "malformed JSON" in r.stdout


def test_sweep_command(write_scenario, tmp_path):
    summary = tmp_path / "summary.csv"
    path = write_scenario(
        {
            "model": "threeboson",
            "beta1": [1.0, 2.0],
            "beta2": 1.0,
            "psi1": [0.1, 0.0],
            "psi2": [0.0, 0.1],
            "outputs": {"summary_csv": str(summary)},
        }
    )

    r = runner.invoke(app, ["sweep", str(path), "--jobs", "1"])

    assert r.exit_code == 0
    assert "fe_cut_vertex_ratio: PASS" in r.stdout
    assert summary.exists()


def test_sweep_cap_exits_4(write_scenario):
    path = write_scenario({"model": "quadratic", "f0": [1.0, 2.0], "g0": [0.1, 0.2], "max_channels": 2})

    r = runner.invoke(app, ["sweep", str(path)])

    assert r.exit_code == 4
    assert "cap" in r.stdout


def test_selftest_single_check():
    r = runner.invoke(app, ["selftest", "--check", "one_step_cut_equivalence"])

    assert r.exit_code == 0
    assert "1/1 checks passed" in r.stdout


def test_selftest_unknown_check_exits_4():
    r = runner.invoke(app, ["selftest", "--check", "nope"])

    assert r.exit_code == 4


def test_show_report(write_scenario, tmp_path):
    report_path = tmp_path / "report.json"
    path = write_scenario(
        {"model": "eph", "omega": 1, "delta": 0.5, "m0": 0.2, "outputs": {"report_json": str(report_path)}}
    )
    runner.invoke(app, ["run", str(path)])

    r = runner.invoke(app, ["show-report", str(report_path)])

    assert r.exit_code == 0
    assert '"model": "eph"' in r.stdout


def test_show_report_missing_exits_3(tmp_path):
    r = runner.invoke(app, ["show-report", str(tmp_path / "none.json")])

    assert r.exit_code == 3


def test_run_parquet_without_pyarrow_exits_3(write_scenario, tmp_path, monkeypatch):
    monkeypatch.setattr(flowdiag.io, "parquet_supported", lambda: False)
    path = write_scenario(
        {"model": "quadratic", "f0": 1.0, "g0": 0.2, "outputs": {"trajectory_csv": str(tmp_path / "t.parquet")}}
    )

    r = runner.invoke(app, ["run", str(path)])

    assert r.exit_code == 3
    assert "pyarrow" in r.stdout
    assert not (tmp_path / "t.parquet").exists()
