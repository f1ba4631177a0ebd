"""CLI tests: subcommand behavior, exit codes, reproducibility."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dpmask.cli import EXIT_AUDIT, EXIT_IO, EXIT_OK, EXIT_PRECONDITION, main

REFERENCE_CSV = Path(__file__).parent / "data" / "table1_reference.csv"


@pytest.fixture()
def raw_csv(tmp_path):
    path = tmp_path / "raw.csv"
    path.write_text("a,b\n0,1\n5,2\n10,3\n2,4\n")
    return path


@pytest.fixture()
def scaled_csv(tmp_path, raw_csv):
    out = tmp_path / "scaled.csv"
    assert main(["ingest", str(raw_csv), "--output", str(out)]) == EXIT_OK
    return out


def test_ingest_writes_scaling_record(tmp_path, raw_csv, scaled_csv):
    record = json.loads((tmp_path / "scaled.csv.scaling.json").read_text())
    assert record["offsets"] == [5.0, 2.5]
    assert record["scales"] == [5.0, 1.5]
    values = np.loadtxt(scaled_csv, delimiter=",")
    assert np.max(np.abs(values)) <= 1.0


def test_ingest_missing_file_is_io_error(tmp_path, capsys):
    assert main(["ingest", str(tmp_path / "nope.csv"), "--output", "x.csv"]) == EXIT_IO
    assert "error" in capsys.readouterr().err


def test_calibrate_json(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main([
        "calibrate", "--epsilon", "0.1", "--delta", "0.01", "--n", "100", "--p", "1",
        "--output", str(out),
    ])
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["sigma_joint_BC"] == pytest.approx(6.2, abs=0.05)
    assert payload["sigma_sufficient_A"] == pytest.approx(25.4, abs=0.05)


def test_calibrate_regime_exit_code(capsys):
    assert main(["calibrate", "--epsilon", "2", "--delta", "0.01", "--n", "100", "--p", "1"]) \
        == EXIT_PRECONDITION
    err = capsys.readouterr().err
    assert "epsilon < 1" in err


def test_calibrate_shape_guard(capsys):
    assert main(["calibrate", "--epsilon", "0.1", "--delta", "0.01", "--n", "5", "--p", "5"]) \
        == EXIT_PRECONDITION
    assert "n > p" in capsys.readouterr().err


def test_release_auto_sigma_sidecars(tmp_path, scaled_csv):
    out_b = tmp_path / "pseudo_b.csv"
    code = main([
        "release", "--input", str(scaled_csv), "--setting", "B", "--auto-sigma",
        "--epsilon", "0.5", "--delta", "0.05", "--seed", "3", "--output", str(out_b),
    ])
    assert code == EXIT_OK
    sidecar = json.loads((tmp_path / "pseudo_b.json").read_text())
    assert sidecar["setting"] == "B"
    assert sidecar["n"] == 4 and sidecar["p"] == 2
    assert sidecar["seed"] == 3

    out_a = tmp_path / "pseudo_a.csv"
    code = main([
        "release", "--input", str(scaled_csv), "--setting", "A", "--auto-sigma",
        "--epsilon", "0.5", "--delta", "0.05", "--seed", "3", "--output", str(out_a),
    ])
    assert code == EXIT_OK
    sidecar_a = json.loads((tmp_path / "pseudo_a.json").read_text())
    assert sidecar_a["sigma"] >= sidecar["sigma"]  # A bound is never tighter


def test_release_replay_byte_identical(tmp_path, scaled_csv):
    args = [
        "release", "--input", str(scaled_csv), "--setting", "B", "--sigma", "2.0",
        "--seed", "17",
    ]
    first = tmp_path / "one.csv"
    second = tmp_path / "two.csv"
    assert main(args + ["--output", str(first)]) == EXIT_OK
    assert main(args + ["--output", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_release_seed_env_default(tmp_path, scaled_csv, monkeypatch):
    monkeypatch.setenv("DPMASK_SEED", "123")
    out = tmp_path / "env.csv"
    assert main([
        "release", "--input", str(scaled_csv), "--setting", "A", "--sigma", "1.0",
        "--output", str(out),
    ]) == EXIT_OK
    assert json.loads((tmp_path / "env.json").read_text())["seed"] == 123


def test_release_report_gram(tmp_path, scaled_csv, capsys):
    out = tmp_path / "g.csv"
    assert main([
        "release", "--input", str(scaled_csv), "--setting", "B", "--sigma", "0.5",
        "--seed", "1", "--output", str(out), "--report-gram",
    ]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["gram_residual_max"] < payload["allowance"]


def test_release_rejects_unscaled_input(tmp_path, capsys):
    path = tmp_path / "big.csv"
    path.write_text("5.0\n-3.0\n")
    assert main([
        "release", "--input", str(path), "--setting", "A", "--sigma", "1.0",
        "--output", str(tmp_path / "y.csv"),
    ]) == EXIT_PRECONDITION
    assert "ingest" in capsys.readouterr().err


def test_table1_default_row_count(capsys):
    assert main(["table1"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 55
    assert lines[0] == "epsilon,delta,p,n,sigma_nec_A,sigma_suf_A,sigma_BC,ratio"


def test_table1_grid_restriction(capsys):
    assert main(["table1", "--grid", "epsilon=0.1", "delta=0.01"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 10


def test_table1_diff_against_reference(tmp_path, capsys):
    assert main([
        "table1", "--output", str(tmp_path / "mine.csv"),
        "--diff", str(REFERENCE_CSV), "--tol-sigma", "0.05", "--tol-ratio", "0.005",
    ]) == EXIT_OK


def test_table1_diff_detects_mismatch(tmp_path, capsys):
    corrupted = tmp_path / "ref.csv"
    text = REFERENCE_CSV.read_text().replace("6.2,0.242", "7.2,0.242")
    corrupted.write_text(text)
    assert main([
        "table1", "--output", str(tmp_path / "mine.csv"), "--diff", str(corrupted),
    ]) == EXIT_AUDIT
    assert "sigma_BC" in capsys.readouterr().err


def test_audit_quantile_brackets(capsys):
    assert main(["audit", "--check", "quantile-brackets"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["verdict"] == "consistent"


def test_audit_birge(capsys):
    assert main(["audit", "--check", "birge"]) == EXIT_OK


def test_audit_g_ratio(capsys):
    assert main(["audit", "--check", "g-ratio", "--q", "5", "--t1", "1", "--t2", "3"]) == EXIT_OK


def test_audit_sphere(capsys):
    assert main(["audit", "--check", "sphere", "--n", "8", "--q", "4", "--seed", "2"]) == EXIT_OK
    assert main(["audit", "--check", "sphere"]) == EXIT_OK  # defaults are coherent


def test_audit_ratio_bound_small(capsys):
    assert main([
        "audit", "--check", "ratio-bound", "--n", "4", "--p", "1", "--sigma", "4",
        "--samples", "5", "--inner-samples", "2000", "--seed", "3",
    ]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["bound_reference"] == 0.0


def test_release_auto_sigma_matches_reference_table(tmp_path):
    # 100x1 bounded data: auto-sigma picks 6.2 for the masked settings, 25.4 unmasked
    rng = np.random.default_rng(0)
    data = tmp_path / "scaled100.csv"
    data.write_text("\n".join(repr(float(v)) for v in rng.uniform(-1, 1, 100)) + "\n")
    out = tmp_path / "b.csv"
    assert main([
        "release", "--input", str(data), "--setting", "B", "--auto-sigma",
        "--epsilon", "0.1", "--delta", "0.01", "--output", str(out),
    ]) == EXIT_OK
    assert json.loads((tmp_path / "b.json").read_text())["sigma"] == pytest.approx(6.2, abs=0.05)
    assert main([
        "release", "--input", str(data), "--setting", "A", "--auto-sigma",
        "--epsilon", "0.1", "--delta", "0.01", "--output", str(tmp_path / "a.csv"),
    ]) == EXIT_OK
    assert json.loads((tmp_path / "a.json").read_text())["sigma"] == pytest.approx(25.4, abs=0.05)


def test_audit_violation_A(capsys):
    assert main([
        "audit", "--check", "violation-A", "--epsilon", "0.5", "--delta", "0.01",
        "--samples", "200000", "--seed", "1",
    ]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["verdict"] == "consistent"
    assert payload["samples"] == 200000


def test_audit_violation_BC_small(capsys):
    assert main([
        "audit", "--check", "violation-BC", "--n", "4", "--p", "1",
        "--epsilon", "0.5", "--delta", "0.05", "--samples", "20",
        "--inner-samples", "10000", "--seed", "2",
    ]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["estimate"] <= payload["bound_reference"] + 3 * payload["std_error"]


def test_audit_scale_refusal_exit_code(capsys):
    assert main([
        "audit", "--check", "violation-BC", "--n", "32", "--p", "1", "--samples", "2",
    ]) == EXIT_PRECONDITION
    assert "n <= 8" in capsys.readouterr().err


def test_console_entry_point_runs():
    result = subprocess.run(
        [sys.executable, "-m", "dpmask.cli", "calibrate", "--epsilon", "0.1",
         "--delta", "0.01", "--n", "100", "--p", "1"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert json.loads(result.stdout)["binding_formula"] == "BC_theorem2"
