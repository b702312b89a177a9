import random

import pytest
from sympy import Matrix

from src.core import smoothcheck
from src.core.errors import (
    DegenerateTangentSectionError,
    NotHomogeneousError,
    ParameterRangeError,
    SearchExhaustedError,
    SingularPointError,
)
from src.core.polyring import is_primitive_vector, parse_polynomial
from src.core.smoothcheck import (
    SliceDefect,
    SmoothnessStatus,
    bad_slice_values,
    candidate_directions,
    find_singular_points_mod_p,
    good_slice_search,
    inverse_matrix,
    is_diagonal,
    rotated_polynomial,
    smoothness_verdict,
    tangent_section_multiplicity,
    unimodular_completion,
)


class TestSingularScan:
    def test_fermat_quartic_smooth_mod_3(self, fermat_quartic):
        assert find_singular_points_mod_p(fermat_quartic, 3) == []

    def test_quintic_in_characteristic_five(self, fermat_quintic):
        points = find_singular_points_mod_p(fermat_quintic, 5)
        assert points
        for point in points:
            assert fermat_quintic.evaluate_mod(point, 5) == 0

    def test_cone_witnesses_vanish(self):
        cone = parse_polynomial("x0^2 x1", arity=4)
        points = find_singular_points_mod_p(cone, 5)
        assert (0, 0, 1, 0) in points
        for point in points:
            assert cone.evaluate_mod(point, 5) == 0
            assert all(g.evaluate_mod(point, 5) == 0 for g in cone.gradient())

    def test_shards_do_not_change_result(self, fermat_quintic):
        assert find_singular_points_mod_p(fermat_quintic, 5, shards=2) == find_singular_points_mod_p(
            fermat_quintic, 5
        )

    def test_requires_form(self, unit_sphere):
        with pytest.raises(NotHomogeneousError):
            find_singular_points_mod_p(unit_sphere, 3)

    def test_prime_above_cap(self, fermat_quartic):
        with pytest.raises(ParameterRangeError):
            find_singular_points_mod_p(fermat_quartic, 103, cap=101)


class TestVerdict:
    def test_diagonal_forms_certified(self, fermat_quintic, affine_quartic):
        assert is_diagonal(fermat_quintic)
        assert smoothness_verdict(fermat_quintic).status == SmoothnessStatus.CERTIFIED_DIAGONAL
        assert smoothness_verdict(affine_quartic).status == SmoothnessStatus.CERTIFIED_DIAGONAL

    def test_missing_variable_is_not_diagonal(self):
        assert not is_diagonal(parse_polynomial("x1^4 + x2^4", arity=3))

    def test_cone_is_singular_with_checkable_witnesses(self):
        cone = parse_polynomial("x0^2 x1", arity=4)
        verdict = smoothness_verdict(cone)
        assert verdict.is_singular
        assert (0, 0, 1, 0) in [w.point for w in verdict.witnesses]
        for witness in verdict.witnesses:
            assert cone.evaluate(witness.point) == 0
            assert all(g.evaluate(witness.point) == 0 for g in cone.gradient())

    def test_smooth_quadric_mod_p_evidence(self, split_quadric):
        verdict = smoothness_verdict(split_quadric, primes=[3, 5, 7])
        assert verdict.status == SmoothnessStatus.NO_SINGULAR_MOD_P
        assert verdict.primes_checked == [3, 5, 7]
        assert verdict.to_dict()["status"] == "no-singular-points-mod-p-list"

    def test_bad_reduction_at_every_prime_is_not_singular(self):
        # 有理上光滑，但模 2 是完全平方、模 3 时 x3 消失
        form = parse_polynomial("x0^2 + x1^2 + x2^2 + 3 x3^2 + 6 x0 x1")
        verdict = smoothness_verdict(form, primes=[2, 3])
        assert not verdict.is_singular
        assert not verdict.is_known_singular
        assert verdict.status == SmoothnessStatus.NO_SINGULAR_MOD_P
        assert verdict.primes_checked == [2, 3]
        assert verdict.clean_primes == []
        assert verdict.singular_over_closure is False
        for witness in verdict.witnesses:
            assert witness.prime in (2, 3)
            assert form.evaluate_mod(witness.point, witness.prime) == 0

    def test_primorial_coefficient_stays_smooth(self):
        form = parse_polynomial("x0 x1 + x2^2 + 30030 x3^2")
        verdict = smoothness_verdict(form)
        assert verdict.status == SmoothnessStatus.NO_SINGULAR_MOD_P
        assert verdict.clean_primes == []
        assert verdict.to_dict()["singular_over_closure"] is False

    def test_clean_primes_listed(self, split_quadric):
        verdict = smoothness_verdict(split_quadric, primes=[3, 5, 7])
        assert verdict.clean_primes == [3, 5, 7]
        assert verdict.singular_over_closure is None

    def test_singular_line_found_exactly(self):
        # 二重平面：奇异轨迹是整个平面 x0 + 5 x1 = 0，小半径内没有本原见证
        form = parse_polynomial("x0^2 + 10 x0 x1 + 25 x1^2", arity=3)
        verdict = smoothness_verdict(form, primes=[3, 7], witness_radius=0)
        assert verdict.is_singular
        for witness in verdict.witnesses:
            assert witness.prime is None
            assert form.evaluate(witness.point) == 0
            assert all(g.evaluate(witness.point) == 0 for g in form.gradient())

    def test_irrational_singular_points(self):
        # 奇异点 (1, ±i, 0) 不是有理点
        form = parse_polynomial("x0^4 + 2 x0^2 x1^2 + x1^4 + x2^4")
        verdict = smoothness_verdict(form, primes=[5], witness_radius=1)
        assert not verdict.is_singular
        assert verdict.singular_over_closure is True
        assert verdict.is_known_singular

    def test_zero_reduction_prime_skipped(self):
        form = parse_polynomial("3 x0^2 + 3 x1^2 - 3 x2^2 + 3 x0 x1")
        verdict = smoothness_verdict(form, primes=[3, 5], witness_radius=0)
        assert 3 not in verdict.primes_checked


class TestTangentSection:
    def test_quadric_multiplicity_two(self, split_quadric):
        assert tangent_section_multiplicity(split_quadric, (1, 0, 0, 0)) == 2
        assert tangent_section_multiplicity(split_quadric, (1, 1, 1, 1)) == 2

    def test_fermat_quartic_point(self, fermat_quartic):
        assert tangent_section_multiplicity(fermat_quartic, (1, 0, 1, 0)) == 4

    def test_fermat_quartic_mod_7_has_ordinary_points(self, fermat_quartic):
        from src.core.smoothcheck import chunk_points, projective_chunks

        values = []
        for lead, value in projective_chunks(4, 7):
            for row in chunk_points(4, 7, lead, value):
                point = [int(v) for v in row]
                if fermat_quartic.evaluate_mod(point, 7) == 0:
                    values.append(tangent_section_multiplicity(fermat_quartic, point, 7))
        assert values
        assert 2 in values
        assert all(v >= 2 for v in values)

    def test_singular_point_refused(self):
        cone = parse_polynomial("x0^2 x1", arity=4)
        with pytest.raises(SingularPointError):
            tangent_section_multiplicity(cone, (0, 0, 1, 0))

    def test_plane_inside_surface_is_degenerate(self):
        form = parse_polynomial("x0 x1^2 + x0 x2^2 + x0 x3^2")
        with pytest.raises(DegenerateTangentSectionError):
            tangent_section_multiplicity(form, (0, 1, 0, 0))

    def test_point_off_surface(self, fermat_quartic):
        with pytest.raises(ValueError):
            tangent_section_multiplicity(fermat_quartic, (1, 1, 1, 0))


class TestCompletion:
    def test_standard_direction_gives_identity(self):
        assert unimodular_completion((1, 0, 0)) == ((1, 0, 0), (0, 1, 0), (0, 0, 1))

    def test_random_primitive_directions(self):
        rng = random.Random(20)
        checked = 0
        while checked < 20:
            direction = tuple(rng.randint(-30, 30) for _ in range(rng.choice((2, 3, 4))))
            if not is_primitive_vector(direction):
                continue
            matrix = unimodular_completion(direction)
            assert matrix[0] == direction
            assert Matrix(matrix).det() == 1
            checked += 1

    def test_rotation_undoes_completion(self, affine_quartic):
        matrix = unimodular_completion((2, 3, 5))
        rotated = rotated_polynomial(affine_quartic, matrix)
        rng = random.Random(7)
        for _ in range(100):
            x = [rng.randint(-20, 20) for _ in range(3)]
            s = [sum(a * b for a, b in zip(row, x)) for row in matrix]
            assert rotated.evaluate(s) == affine_quartic.evaluate(x)
        assert inverse_matrix(inverse_matrix(matrix)) == matrix

    def test_non_primitive_refused(self):
        with pytest.raises(ValueError):
            unimodular_completion((2, 4))

    def test_candidate_order(self):
        directions = candidate_directions(3, 1)
        assert directions[:3] == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
        assert all(is_primitive_vector(d) for d in directions)


class TestSlices:
    def test_bad_values_of_affine_quartic(self, affine_quartic):
        bad = bad_slice_values(affine_quartic, (1, 0, 0), 10)
        assert bad == [(-1, SliceDefect.SINGULAR), (1, SliceDefect.SINGULAR)]

    def test_unit_sphere_has_no_bad_values(self, unit_sphere):
        assert bad_slice_values(unit_sphere, (1, 0, 0), 5) == []

    def test_degree_drop_everywhere(self):
        f = parse_polynomial("t1 t2 + t3")
        bad = bad_slice_values(f, (0, 1, 0), 3)
        assert [k for k, _ in bad] == list(range(-3, 4))
        assert {reason for _, reason in bad} == {SliceDefect.DEGREE_DROP}

    def test_good_slice_search(self, affine_quartic):
        report = good_slice_search(affine_quartic)
        assert report.direction == (1, 0, 0)
        assert report.good_value == 0
        assert report.completion == ((1, 0, 0), (0, 1, 0), (0, 0, 1))
        assert report.sliced == parse_polynomial("t1^4 + t2^4 - 1")
        assert (1, SliceDefect.SINGULAR) in report.bad_values
        payload = report.to_dict()
        assert payload["good_value"] == 0
        assert {"kappa": -1, "reason": "singular"} in payload["bad_values"]

    def test_singular_input_needs_opt_in(self):
        cone = parse_polynomial("t1^2 t2 + t3^3")
        with pytest.raises(SingularPointError):
            good_slice_search(cone, radius=1, max_radius=1)

    def test_exhausted_search(self):
        # 一次型的平方：每个切片要么降次要么是二重根
        f = parse_polynomial("t1^2", arity=2)
        with pytest.raises(SearchExhaustedError):
            good_slice_search(f, radius=1, max_radius=2, assume_smooth=True)

    def test_bad_reduction_does_not_mark_slice_bad(self):
        # κ = 0 的闭包 x1 x2 - 30030 x0^2 是光滑二次曲线
        f = parse_polynomial("t1^2 + t2 t3 + 30030 t1 t2 - 30030")
        assert bad_slice_values(f, (1, 0, 0), 2) == []

    def test_bad_values_nest_and_stabilise(self):
        f = parse_polynomial("t1^2 - t2^2 + t3^2 - 4")
        scans = {bound: bad_slice_values(f, (1, 0, 0), bound) for bound in range(1, 13)}
        assert scans[1] == []
        assert scans[2] == [(-2, SliceDefect.SINGULAR), (2, SliceDefect.SINGULAR)]
        for small in range(1, 13):
            for large in range(small, 13):
                assert set(scans[small]) <= set(scans[large])
        assert scans[10] == scans[11] == scans[12] == bad_slice_values(f, (1, 0, 0), 20)

    def test_affine_quartic_scan_is_stable(self, affine_quartic):
        reference = bad_slice_values(affine_quartic, (1, 0, 0), 10)
        for bound in (11, 12, 16):
            assert bad_slice_values(affine_quartic, (1, 0, 0), bound) == reference

    def test_oversized_completion_retried_from_zero(self, monkeypatch):
        real = smoothcheck.unimodular_completion
        calls = {"n": 0}

        def padded(direction):
            matrix = [list(row) for row in real(direction)]
            calls["n"] += 1
            if calls["n"] <= 4:
                # 第二行加上第一行的 5 倍，行列式不变但元素超出半径 1
                matrix[1] = [x + 5 * y for x, y in zip(matrix[1], matrix[0])]
            return tuple(tuple(row) for row in matrix)

        monkeypatch.setattr(smoothcheck, "unimodular_completion", padded)
        f = parse_polynomial("t1^2 + t2^2 - 2")
        report = good_slice_search(f, radius=1, max_radius=2)
        assert report.direction == (1, 0)
        assert report.good_value == 0
        rejected = [direction for direction, _ in report.rejected_directions]
        assert len(rejected) == len(set(rejected))
        assert (1, 0) not in rejected
        assert {reason for _, reason in report.rejected_directions} == {"completion-too-large"}
