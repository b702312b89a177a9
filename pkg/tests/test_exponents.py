import math

import pytest

from src.core.census import CountSeries
from src.core.errors import ParameterRangeError, SeriesError
from src.core.exponents import (
    FORMULAS,
    bound_exponent,
    bound_report,
    cor1_theta,
    exponent_report,
    exponent_value,
    fit_exponent,
    hb_theta,
    pila_exponent,
    proposition1_exponent,
    proposition2_exponent,
    sand_exponent,
    symbolic_exponent,
    theorem1_exponent,
    theorem2_exponent,
)


def series_of(func, bounds, name="s"):
    return CountSeries(name, [(b, func(b)) for b in bounds])


class TestClosedForms:
    def test_theorem1_values(self):
        assert theorem1_exponent(4, 3) == pytest.approx(2.0833, abs=1e-4)
        assert theorem1_exponent(5, 3) == pytest.approx(1.9954, abs=1e-4)

    def test_identities(self):
        for d in range(4, 51):
            assert theorem2_exponent(d) == pytest.approx(proposition1_exponent(d, d - 2), abs=1e-12)
            for n in range(3, 11):
                assert theorem1_exponent(d, n) == pytest.approx(theorem2_exponent(d) + n - 2, abs=1e-12)
        for n in range(3, 11):
            assert sand_exponent(4, n) == pytest.approx(theorem1_exponent(4, n), abs=1e-12)

    def test_corollary_improves_heath_brown(self):
        for d in range(4, 101):
            assert cor1_theta(d) < hb_theta(d)
        assert cor1_theta(4) > 1
        assert all(cor1_theta(d) < 1 for d in range(5, 101))

    def test_sand_cubic_branch(self):
        assert sand_exponent(3, 3) == pytest.approx(3 - 7 / 4 + 5 / (3 * math.sqrt(3)))

    def test_small_values(self):
        assert pila_exponent(3) == pytest.approx(1 / 3)
        assert proposition2_exponent(4, 3) == pytest.approx(max(1, theorem2_exponent(4)))
        assert exponent_value("trivial", {"n": 2}) == 2.0

    @pytest.mark.parametrize(
        "call",
        [
            lambda: theorem1_exponent(3, 3),
            lambda: theorem1_exponent(4, 2),
            lambda: proposition1_exponent(5, 5),
            lambda: proposition1_exponent(5, 1),
            lambda: cor1_theta(2),
            lambda: exponent_value("unknown", {}),
            lambda: exponent_value("theorem1", {"d": 4}),
        ],
    )
    def test_parameter_range(self, call):
        with pytest.raises(ParameterRangeError):
            call()

    def test_every_formula_has_symbolic_form(self):
        params = {"d": 5, "n": 3, "k": 3, "e": 3, "s": 2, "delta": 5, "nu": 3}
        for name in FORMULAS:
            value = exponent_value(name, params)
            symbolic = symbolic_exponent(name, {k: params[k] for k in FORMULAS[name][1]})
            assert float(symbolic) == pytest.approx(value, abs=1e-12)

    def test_symbolic_text(self):
        assert str(symbolic_exponent("pila", {"delta": 3})) == "1/3"
        assert str(symbolic_exponent("theorem1", {"d": 4, "n": 3})) == "25/12"

    def test_bound_exponent_keeps_dominant_term(self):
        assert bound_exponent("theorem1", {"d": 9, "n": 3}) == 2
        assert bound_exponent("theorem1", {"d": 4, "n": 3}) == pytest.approx(theorem1_exponent(4, 3))
        assert bound_exponent("theorem2", {"delta": 9}) == 1.0
        assert bound_exponent("hb_theta", {"d": 3}) == pytest.approx(hb_theta(3) / 3)


class TestFit:
    def test_quadratic_growth(self):
        fit = fit_exponent(series_of(lambda b: 7 * b * b, [10, 20, 40, 80, 160]))
        assert fit.slope == pytest.approx(2.0)
        assert fit.intercept == pytest.approx(math.log(7))
        assert fit.residual == pytest.approx(0.0, abs=1e-9)
        assert fit.points_used == 5

    def test_constant_series(self):
        fit = fit_exponent(series_of(lambda b: 4, [1, 10, 100, 1000]))
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_zero_counts_dropped(self):
        series = CountSeries("z", [(1, 0), (2, 0), (4, 16), (8, 64), (16, 256)])
        fit = fit_exponent(series)
        assert fit.points_used == 3
        assert fit.slope == pytest.approx(2.0)

    def test_too_few_points(self):
        with pytest.raises(SeriesError):
            fit_exponent(series_of(lambda b: b, [10, 20]))

    def test_report_with_series(self):
        series = series_of(lambda b: b ** 3, [2, 4, 8, 16])
        report = exponent_report("trivial", {"n": 3}, series)
        assert report.value == 3.0
        assert report.fitted_slope == pytest.approx(3.0)
        payload = report.to_dict()
        assert payload["symbolic"] == "3"
        assert payload["fitted_slope"] == pytest.approx(3.0)

    def test_report_without_series(self):
        payload = exponent_report("pila", {"delta": 3}).to_dict()
        assert "fitted_slope" not in payload
        assert payload["value"] == pytest.approx(1 / 3)


class TestBoundReport:
    def test_faster_growth_is_flagged(self):
        series = series_of(lambda b: b ** 3, [10, 20, 40, 80])
        report = bound_report(series, "trivial", {"n": 2}, eps=0.01)
        assert not report.compliant
        assert report.violations
        assert report.message.startswith("not consistent with")

    def test_matching_growth_is_consistent(self):
        series = series_of(lambda b: 5 * b * b, [10, 20, 40, 80])
        report = bound_report(series, "trivial", {"n": 2}, eps=0.01)
        assert report.compliant
        assert not report.low_confidence
        assert report.violations == []
        assert report.message.startswith("consistent with")

    def test_single_point_is_low_confidence(self):
        report = bound_report(CountSeries("one", [(10, 100)]), "trivial", {"n": 2})
        assert report.compliant
        assert report.low_confidence
        assert "low confidence" in report.to_dict()["message"]

    def test_zero_counts_are_skipped(self):
        series = CountSeries("z", [(10, 0), (20, 400), (40, 1600)])
        assert bound_report(series, "trivial", {"n": 2}, eps=0.0).compliant

    def test_empty_series(self):
        with pytest.raises(SeriesError):
            bound_report(CountSeries("empty"), "trivial", {"n": 2})
