import json

import pytest

from src.core.census import count_projective
from src.core.errors import SpecValidationError
from src.core.runner import ExperimentRunner, ExperimentSpec
from src.data.database import ResultStore
from src.utils.utils import ResultExporter, read_series_csv

QUINTIC = "x0^5 + x1^5 - x2^5 - x3^5"


@pytest.fixture
def runner(tmp_path):
    store = ResultStore(str(tmp_path / "t.db"))
    return ExperimentRunner(store, ResultExporter(tmp_path / "exports"))


def projective_spec(**overrides):
    payload = {
        "name": "quintic",
        "mode": "projective",
        "polynomial": QUINTIC,
        "grid": {"start": 5, "factor": 2, "steps": 3},
        "output": "quintic.csv",
    }
    payload.update(overrides)
    return ExperimentSpec.load(payload)


class TestExperimentSpec:
    def test_grid_bounds(self):
        assert projective_spec().bounds() == [5, 10, 20]

    def test_hash_ignores_shards_and_outputs(self):
        base = projective_spec()
        assert projective_spec(shards=4).experiment_id == base.experiment_id
        assert projective_spec(output="other.csv", name="x").experiment_id == base.experiment_id
        assert projective_spec(engine="brute").experiment_id != base.experiment_id

    def test_hash_follows_polynomial_not_spelling(self):
        spaced = projective_spec(polynomial="x0**5 + x1**5 - x2**5 - x3**5")
        assert spaced.experiment_id == projective_spec().experiment_id

    def test_non_homogeneous_names_term(self):
        with pytest.raises(SpecValidationError) as info:
            projective_spec(polynomial="x0^5 + x1^5 - x2^5 - x3^5 + 2")
        assert "2" in str(info.value)
        assert "齐次" in str(info.value)

    @pytest.mark.parametrize(
        "overrides",
        [
            {"mode": "curve"},
            {"mode": "equal-sums"},
            {"mode": "census"},
            {"grid": {"start": 1, "factor": 1.1, "steps": 3}},
            {"grid": {"start": 0, "factor": 2, "steps": 3}},
            {"shards": 0},
            {"polynomial": None},
            {"polynomial": "x0 + # 1"},
        ],
    )
    def test_rejected_specs(self, overrides):
        with pytest.raises(SpecValidationError):
            projective_spec(**overrides)

    def test_modp_grid_maps_to_primes(self):
        spec = projective_spec(mode="modp", grid={"start": 2, "factor": 2, "steps": 4})
        assert spec.bounds() == [2, 5, 11, 17]
        spec = projective_spec(mode="modp", grid={"start": 8, "factor": 1.2, "steps": 3})
        assert spec.bounds() == [11, 13]

    def test_polynomial_file(self, tmp_path):
        path = tmp_path / "quintic.txt"
        path.write_text(QUINTIC + "\n", encoding="utf-8")
        spec = projective_spec(polynomial=None, polynomial_file=str(path))
        assert spec.experiment_id == projective_spec().experiment_id

    def test_from_file(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"mode": "r3", "grid": {"start": 10, "factor": 2, "steps": 2}}))
        spec = ExperimentSpec.from_file(str(path))
        assert spec.mode == "r3"
        assert spec.load_polynomial() is None


class TestExperimentRunner:
    def test_projective_series(self, runner, fermat_quintic):
        result = runner.run(projective_spec())
        expected = [(b, count_projective(fermat_quintic, b)) for b in (5, 10, 20)]
        assert result.series.points == expected
        assert result.resumed_points == 0

        lines = open(result.csv_path, encoding="utf-8").read().splitlines()
        assert lines[:4] == [
            "# tool=census",
            "# version=0.3.0",
            f"# spec_hash={result.experiment_id}",
            "B,count",
        ]
        assert lines[4:] == [f"{b},{c}" for b, c in expected]
        assert read_series_csv(result.csv_path).points == expected

    def test_rerun_is_resumed_and_identical(self, runner):
        first = runner.run(projective_spec())
        content = open(first.csv_path, "rb").read()
        second = runner.run(projective_spec(shards=2))
        assert second.experiment_id == first.experiment_id
        assert second.resumed_points == 3
        assert open(second.csv_path, "rb").read() == content

    def test_partial_resume(self, runner):
        short = projective_spec(grid={"start": 5, "factor": 2, "steps": 2})
        runner.run(short)
        store = runner.store
        full = projective_spec()
        assert store.completed_bounds(short.experiment_id) == {5, 10}
        assert full.experiment_id != short.experiment_id

    def test_r3_mode(self, runner):
        spec = ExperimentSpec.load({"mode": "r3", "grid": {"start": 10, "factor": 2, "steps": 3}})
        assert runner.run(spec).series.points == [(10, 3), (20, 3), (40, 6)]

    def test_curve_mode(self, runner):
        spec = ExperimentSpec.load(
            {"mode": "curve", "polynomial": "t2 - t1^3", "grid": {"start": 100, "factor": 10, "steps": 3}}
        )
        assert runner.run(spec).series.points == [(100, 9), (1000, 21), (10000, 43)]

    def test_equal_sums_mode(self, runner):
        spec = ExperimentSpec.load(
            {"mode": "equal-sums", "polynomial": "t1^3", "grid": {"start": 9, "factor": 1.34, "steps": 2}}
        )
        assert runner.run(spec).series.points == [(9, 0), (12, 8)]

    def test_lines_mode(self, runner):
        spec = ExperimentSpec.load(
            {"mode": "lines", "polynomial": QUINTIC, "grid": {"start": 2, "factor": 2, "steps": 2}}
        )
        assert runner.run(spec).series.points == [(2, 0), (4, 0)]

    def test_json_output_and_status(self, runner, tmp_path):
        spec = projective_spec(grid={"start": 1, "factor": 2, "steps": 2}, json_output="quintic.json")
        result = runner.run(spec)
        document = json.loads((tmp_path / "exports" / "quintic.json").read_text(encoding="utf-8"))
        assert document["meta"]["spec_hash"] == result.experiment_id
        assert document["points"] == [list(p) for p in result.series.points]

        status = runner.get_status()
        assert status == [
            {
                "experiment_id": result.experiment_id,
                "mode": "projective",
                "points": 2,
                "tool_version": "0.3.0",
            }
        ]

    @pytest.mark.slow
    def test_quintic_grid(self, runner):
        spec = projective_spec(grid={"start": 20, "factor": 2, "steps": 5}, shards=4)
        result = runner.run(spec)
        assert result.series.bounds == [20, 40, 80, 160, 320]
        assert result.series.counts == sorted(result.series.counts)
