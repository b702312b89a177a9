import json
import sys

import pytest

from src.main import EXIT_ERROR, EXIT_OK, EXIT_RESOURCE_CAP, EXIT_VALIDATION, main

QUARTIC = "x0^4 + x1^4 - x2^4 - x3^4"


@pytest.fixture
def cli(isolated_settings, tmp_path, monkeypatch):
    """日志和结果库写到临时目录"""
    monkeypatch.setattr(sys, "excepthook", sys.excepthook)
    isolated_settings.LOG_FILE = str(tmp_path / "logs" / "census.log")
    isolated_settings.DATABASE_PATH = str(tmp_path / "census.db")
    return isolated_settings


def run_json(capsys, *argv):
    code = main(["--json", *argv])
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


class TestCounting:
    def test_projective_count(self, cli, capsys):
        code, payload = run_json(capsys, "count", "--poly", QUARTIC, "--bound", "1", "--projective")
        assert code == EXIT_OK
        assert payload["count"] == 32
        assert payload["polynomial"] == QUARTIC

    def test_affine_count_with_points(self, cli, capsys, tmp_path):
        points = tmp_path / "points.csv"
        code, payload = run_json(
            capsys, "count", "--poly", "t1^2 + t2^2 + t3^2 - 3", "--bound", "2", "--points", str(points)
        )
        assert code == EXIT_OK
        assert payload["count"] == 8
        lines = points.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# tool=census"
        assert lines[3] == "x0,x1,x2,primitive,on_line"
        assert len(lines) == 4 + 8

    def test_polynomial_from_file(self, cli, capsys, tmp_path):
        source = tmp_path / "quartic.txt"
        source.write_text(QUARTIC, encoding="utf-8")
        code, payload = run_json(capsys, "count", "--poly", f"@{source}", "--bound", "1", "--projective")
        assert code == EXIT_OK
        assert payload["count"] == 32

    def test_non_homogeneous_is_validation_error(self, cli, capsys):
        code = main(["count", "--poly", "t1^2 + t2^2 + t3^2 - 3", "--bound", "3", "--projective"])
        assert code == EXIT_VALIDATION
        assert "-3" in capsys.readouterr().err

    def test_parse_error(self, cli, capsys):
        assert main(["count", "--poly", "x0 + # 1", "--bound", "3"]) == EXIT_VALIDATION

    def test_memory_cap(self, cli, capsys):
        code = main(
            [
                "--mem-cap", "1000",
                "count", "--poly", "t1^2 + t2^2 + t3^2 - 3", "--bound", "10",
                "--engine", "sieve", "--prime", "101",
            ]
        )
        assert code == EXIT_RESOURCE_CAP

    def test_invalid_shards(self, cli):
        assert main(["--shards", "0", "r3", "--N", "36"]) == EXIT_VALIDATION

    def test_shared_flags_after_subcommand(self, cli, capsys):
        code, payload = run_json(
            capsys, "count", "--poly", QUARTIC, "--bound", "1", "--projective", "--shards", "2"
        )
        assert code == EXIT_OK
        assert payload["count"] == 32
        assert payload["shards"] == 2

    def test_shared_flags_before_subcommand(self, cli, capsys):
        code, payload = run_json(capsys, "--shards", "3", "count", "--poly", "t1 t2 - 6", "--bound", "6")
        assert code == EXIT_OK
        assert payload["shards"] == 3

    def test_seed_and_mem_cap_after_subcommand(self, cli, capsys):
        code = main(["lines", "--poly", QUARTIC, "--bound", "1", "--seed", "5", "--mem-cap", "100000000"])
        assert code == EXIT_OK
        assert cli.SEED == 5
        assert cli.MEM_CAP_BYTES == 100000000

    def test_reports_resolved_engine(self, cli, capsys):
        _, payload = run_json(capsys, "count", "--poly", QUARTIC, "--bound", "1", "--projective")
        assert payload["engine"] == "split"
        _, payload = run_json(capsys, "count", "--poly", "t1 t2 - 6", "--bound", "6")
        assert payload["engine"] == "slice"
        assert payload["count"] == 8

    def test_prime_needs_sieve_engine(self, cli, capsys):
        assert main(["count", "--poly", "t1 t2 - 6", "--bound", "6", "--prime", "7"]) == EXIT_VALIDATION
        assert "sieve" in capsys.readouterr().err

    def test_projective_sieve_uses_prime(self, cli, capsys):
        _, default = run_json(capsys, "count", "--poly", QUARTIC, "--bound", "2", "--projective")
        code, sieved = run_json(
            capsys,
            "count", "--poly", QUARTIC, "--bound", "2", "--projective",
            "--engine", "sieve", "--prime", "7",
        )
        assert code == EXIT_OK
        assert sieved["engine"] == "sieve"
        assert sieved["count"] == default["count"]

    def test_modp(self, cli, capsys):
        code, payload = run_json(capsys, "modp", "--poly", QUARTIC, "--prime", "5")
        assert code == EXIT_OK
        assert payload["projective_count"] == 80
        assert payload["affine_zero_count"] == 321


class TestGeometry:
    def test_smooth(self, cli, capsys):
        code, payload = run_json(capsys, "smooth", "x0^5 + x1^5 - x2^5 - x3^5")
        assert code == EXIT_OK
        assert payload["status"] == "certified-smooth-diagonal"

    def test_bad_slices(self, cli, capsys):
        code, payload = run_json(
            capsys, "slice-scan", "t1^4 + t2^4 + t3^4 - 1", "--direction", "1,0,0", "--bound", "3"
        )
        assert code == EXIT_OK
        assert payload["bad_values"] == [[-1, "singular"], [1, "singular"]]

    def test_exhausted_search(self, cli):
        code = main(
            ["slice-scan", "t1^2 + 2 t1 t2 + t2^2", "--radius", "1", "--max-radius", "2", "--assume-smooth"]
        )
        assert code == EXIT_ERROR

    def test_lines(self, cli, capsys):
        code, payload = run_json(capsys, "lines", "--poly", QUARTIC, "--bound", "1")
        assert code == EXIT_OK
        assert payload["total"] == 32
        assert payload["off_lines"] == 0


class TestDiophantine:
    def test_r3(self, cli, capsys):
        code, payload = run_json(capsys, "r3", "--N", "36")
        assert code == EXIT_OK
        assert payload == {"N": 36, "d": 3, "r": 6}

    def test_r3_batch_csv(self, cli, capsys):
        assert main(["--csv", "r3-batch", "--max", "40"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "N,r"
        assert "36,6" in lines

    def test_equal_sums(self, cli, capsys):
        code, payload = run_json(capsys, "equal-sums", "--poly", "t1^3", "--bound", "12")
        assert code == EXIT_OK
        assert payload["nontrivial"] == 8
        assert payload["nontrivial_density"] == pytest.approx(8 / 144)


class TestExponents:
    def test_formula_value(self, cli, capsys):
        code, payload = run_json(capsys, "exponents", "--formula", "theorem1", "--d", "4", "--n", "3")
        assert code == EXIT_OK
        assert payload["value"] == pytest.approx(2.0833, abs=1e-4)
        assert payload["symbolic"] == "25/12"

    def test_formula_list(self, cli, capsys):
        code, payload = run_json(capsys, "exponents")
        assert code == EXIT_OK
        assert payload["formulas"]["theorem1"] == "d,n"

    def test_missing_parameter(self, cli):
        assert main(["exponents", "--formula", "theorem1", "--d", "4"]) == EXIT_VALIDATION

    def test_fit_and_verify(self, cli, capsys, tmp_path):
        series = tmp_path / "series.csv"
        series.write_text("B,count\n" + "".join(f"{b},{b ** 3}\n" for b in (10, 20, 40, 80)))

        code, payload = run_json(capsys, "fit", "--in", str(series))
        assert code == EXIT_OK
        assert payload["slope"] == pytest.approx(3.0)

        code, payload = run_json(
            capsys, "verify", "--in", str(series), "--formula", "trivial", "--n", "2", "--eps", "0.01"
        )
        assert code == EXIT_OK
        assert payload["compliant"] is False
        assert payload["message"].startswith("not consistent with")

    def test_missing_series_file(self, cli, tmp_path):
        assert main(["fit", "--in", str(tmp_path / "missing.csv")]) == EXIT_VALIDATION


class TestExperiment:
    def test_run_and_status(self, cli, capsys, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(
            json.dumps(
                {
                    "mode": "curve",
                    "polynomial": "t2 - t1^3",
                    "grid": {"start": 100, "factor": 10, "steps": 2},
                    "output": str(tmp_path / "curve.csv"),
                }
            )
        )
        code, payload = run_json(capsys, "experiment", "--spec", str(spec))
        assert code == EXIT_OK
        assert payload["points"] == [[100, 9], [1000, 21]]
        assert (tmp_path / "curve.csv").exists()

        code, payload = run_json(capsys, "experiment", "--status")
        assert code == EXIT_OK
        assert payload["experiments"][0]["points"] == 2

    def test_invalid_spec(self, cli, capsys, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"mode": "projective", "polynomial": "t1 - 1", "grid": {"start": 1, "factor": 2, "steps": 2}}))
        assert main(["experiment", "--spec", str(spec)]) == EXIT_VALIDATION

    def test_config_file_overrides(self, cli, tmp_path):
        config = tmp_path / "census.cfg"
        config.write_text("CENSUS_SEED = 7\nSHARDS = 1\n")
        assert main(["--config", str(config), "r3", "--N", "3"]) == EXIT_OK
        assert cli.SEED == 7
