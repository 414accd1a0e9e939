"""CLI behaviour: subcommands, exit codes, output formats."""

import json

import numpy as np
import pytest

from nhflat import families
from nhflat.cli import main


@pytest.fixture
def nk_record(tmp_path):
    path = tmp_path / "nk.json"
    path.write_text(json.dumps(families.nearly_kahler(4.0).to_record()))
    return str(path)


@pytest.fixture
def bad_record(tmp_path):
    rec = families.nearly_kahler(4.0).to_record()
    rec["Q"][0][1] = 0.05  # breaks Q^T P symmetry
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(rec))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCheck:
    def test_nearly_kahler_passes(self, capsys, nk_record):
        code, out, _ = run(capsys, ["check", nk_record])
        payload = json.loads(out)
        assert code == 0
        assert payload["valid"] is True
        assert payload["class"] == "W1-"
        assert payload["s"] == pytest.approx(30.0, abs=1e-8)

    def test_broken_record_exit1_named_residual(self, capsys, bad_record):
        code, out, _ = run(capsys, ["check", bad_record])
        payload = json.loads(out)
        assert code == 1
        assert payload["valid"] is False
        assert "qtp_symmetry" in payload["failing"]

    def test_missing_file_exit2(self, capsys):
        code, _, err = run(capsys, ["check", "/nonexistent/x.json"])
        assert code == 2

    def test_malformed_json_exit2(self, capsys, tmp_path):
        path = tmp_path / "x.json"
        path.write_text("{not json")
        code, _, _ = run(capsys, ["check", str(path)])
        assert code == 2

    def test_nhf_tol_env(self, capsys, nk_record, monkeypatch):
        monkeypatch.setenv("NHF_TOL", "1e-3")
        code, out, _ = run(capsys, ["check", nk_record])
        assert code == 0
        assert json.loads(out)["tolerance"] == 1e-3


class TestClassify:
    def test_w1_member(self, capsys, tmp_path):
        rec = families.w1_family(1.0, 0.5).to_record()
        path = tmp_path / "w1.json"
        path.write_text(json.dumps(rec))
        code, out, _ = run(capsys, ["classify", str(path)])
        assert code == 0
        assert json.loads(out)["class"] == "W1"


class TestFamily:
    def test_nk_record(self, capsys):
        code, out, _ = run(capsys, ["family", "--name", "nk", "--lambda", "4"])
        assert code == 0
        rec = json.loads(out)
        assert rec["a"] == pytest.approx(1.0 / 108.0)
        assert rec["P"][0][0] == pytest.approx(np.sqrt(3.0) / 36.0)

    def test_w1_record(self, capsys):
        code, out, _ = run(
            capsys, ["family", "--name", "w1", "--lambda", "1", "--p", "0.5"]
        )
        assert code == 0
        rec = json.loads(out)
        assert rec["lambda"] == 1.0

    def test_zero_scalar_branch(self, capsys):
        code, out, _ = run(
            capsys, ["family", "--name", "zero-scalar", "--branch", "minus"]
        )
        assert code == 0
        records = json.loads(out)
        if isinstance(records, dict):
            records = [records]
        assert len(records) == 1  # measured root count (see test_families)

    def test_out_of_range_exit2(self, capsys):
        code, _, err = run(capsys, ["family", "--name", "w1w3", "--a", "0.001"])
        assert code == 2
        assert "1/256" in err

    def test_missing_param_exit2(self, capsys):
        code, _, _ = run(capsys, ["family", "--name", "w1"])
        assert code == 2


class TestFlow:
    def test_short_run_csv(self, capsys, nk_record, tmp_path):
        out_csv = tmp_path / "traj.csv"
        code, _, err = run(
            capsys,
            [
                "flow",
                nk_record,
                "--t-end",
                "0.05",
                "--record-every",
                "10",
                "--out",
                str(out_csv),
            ],
        )
        assert code == 0
        lines = out_csv.read_text().strip().split("\n")
        assert lines[0].startswith("t,a,b,Q1_11")
        summary = json.loads(err.strip().split("\n")[-1])
        assert summary["terminated"] == "completed"
        assert summary["max_g2_resid"] < 1e-6

    def test_singularity_exit3(self, capsys, nk_record, tmp_path):
        code, _, err = run(
            capsys,
            ["flow", nk_record, "--t-end", "1.2", "--record-every", "100",
             "--out", str(tmp_path / "t.csv")],
        )
        assert code == 3
        assert "singular" in err

    def test_invalid_initial_exit1(self, capsys, bad_record):
        code, _, _ = run(capsys, ["flow", bad_record, "--t-end", "0.05"])
        assert code == 1

    def test_batch(self, capsys, nk_record, tmp_path):
        out_csv = tmp_path / "b.csv"
        code, _, err = run(
            capsys,
            ["flow", nk_record, nk_record, "--t-end", "0.02",
             "--record-every", "10", "--out", str(out_csv)],
        )
        assert code == 0
        assert (tmp_path / "b_0.csv").exists()
        assert (tmp_path / "b_1.csv").exists()


class TestRotate:
    def test_w1_member_rotates(self, capsys, tmp_path):
        rec = families.w1_family(1.0, 0.5).to_record()
        path = tmp_path / "w1.json"
        path.write_text(json.dumps(rec))
        code, out, _ = run(capsys, ["rotate", str(path)])
        assert code == 0
        payload = json.loads(out)
        assert payload["dgamma_theta_max"] < 1e-9


class TestVerifyG2:
    def test_sine_cone_passes(self, capsys):
        code, out, _ = run(
            capsys,
            ["verify-g2", "--family", "sine-cone", "--t-start", "-0.25",
             "--t-end", "0.25"],
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["passed"] is True
        assert payload["max_g2_resid"] < 1e-6

    def test_berger_fails_as_documented(self, capsys):
        # the published Berger data does not satisfy the equations; the
        # CLI reports this honestly with exit code 1
        code, out, _ = run(
            capsys,
            ["verify-g2", "--family", "berger", "--t-start", "0.1",
             "--t-end", "0.9"],
        )
        assert code == 1
        payload = json.loads(out)
        assert payload["passed"] is False
        assert payload["max_ode_resid"] > 1.0


class TestUsage:
    def test_no_subcommand_exit2(self, capsys):
        assert main([]) == 2

    def test_unknown_subcommand_exit2(self, capsys):
        assert main(["frobnicate"]) == 2
