import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distortion_lab.config import get_settings, load_settings, reset_settings
from distortion_lab.construct import affine_stretch, cantor_sequence, laminate_sequence, left_jump_sequence
from distortion_lab.errors import ConfigError, CubeOutOfDomain, DominationFailed, ParamOutOfRange
from distortion_lab.field import dilatation_field, sample
from distortion_lab.functional import (FunctionalSpec, Weight, check_pointwise_bound, classify_gap, cube_average,
                                       fatou_series, functional_value, integrate_field, jensen_check,
                                       point_dilatation, run_stock_suite, semicontinuity_experiment)
from distortion_lab.growth import linear_function, power_function
from distortion_lab.growth_spec import load_growth
from distortion_lab.numerics import (INF, estimate_liminf, parallel_map, relative_gap, shrinking_suffix, to_extended,
                                     weighted_sum, wynn_epsilon)

CENTER = (0.5, 0.5, 0.5)


def laminate():
    return laminate_sequence(1.0, 3.0, 0.5, 3)


# numerics
def test_liminf_of_constant_tail():
    assert estimate_liminf([7.0, 5.0, 5.0, 5.0, 5.0, 5.0]) == (5.0, "constant-tail")


def test_liminf_of_divergent_tail():
    assert estimate_liminf([2.0 ** k for k in range(10)]) == (INF, "divergent-tail")
    assert estimate_liminf([1.0, 2.0, INF, INF]) == (INF, "divergent-tail")


def test_three_growing_terms_are_not_called_divergent():
    estimate, method = estimate_liminf([1.0, 2.0, 4.0])
    assert method != "divergent-tail"
    assert math.isfinite(estimate)
    assert estimate_liminf([1.0, 2.0, 4.0, 8.0]) == (INF, "divergent-tail")
    assert estimate_liminf([3.0, 3.0, 3.0, 1.0, 2.0, 4.0]) == (1.0, "tail-minimum")


def test_liminf_extrapolates_monotone_tails():
    estimate, method = estimate_liminf([1.0 + 2.0 ** -k for k in range(1, 11)])
    assert method == "extrapolated"
    assert estimate == pytest.approx(1.0, abs=1e-12)


def test_liminf_uses_the_whole_regular_suffix():
    values = [(2.0 - 2.0 ** -j) ** 4 for j in range(1, 11)]
    assert shrinking_suffix(values) == values
    estimate, method = estimate_liminf(values)
    assert method == "extrapolated"
    assert estimate == pytest.approx(16.0, rel=1e-9)
    assert shrinking_suffix([5.0, 1.0, 3.0, 2.5, 2.25]) == [3.0, 2.5, 2.25]


def test_liminf_of_oscillating_tail():
    assert estimate_liminf([1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]) == (0.0, "tail-minimum")


def test_wynn_epsilon_accelerates_alternating_series():
    partial = np.cumsum([(-1.0) ** k / (k + 1) for k in range(12)])
    assert wynn_epsilon(partial) == pytest.approx(math.log(2.0), abs=1e-7)


def test_extended_real_helpers():
    assert to_extended("inf") == INF
    assert to_extended(" -Infinity ") == -INF
    assert to_extended(2) == 2.0
    assert weighted_sum([INF, 2.0], [0.0, 1.5]) == 3.0
    assert weighted_sum([INF, 2.0], [0.5, 1.5]) == INF
    assert relative_gap(INF, INF) == 0.0
    assert relative_gap(INF, 2.0) == INF
    assert relative_gap(6.0, 4.0) == 0.5


# config
def test_thread_override_keeps_order(monkeypatch):
    monkeypatch.setenv("DISTORTION_LAB_THREADS", "3")
    reset_settings()
    assert get_settings().n_jobs == 3
    assert parallel_map(lambda x: x * x, list(range(20))) == [x * x for x in range(20)]


def test_bad_thread_override(monkeypatch):
    monkeypatch.setenv("DISTORTION_LAB_THREADS", "many")
    with pytest.raises(ConfigError):
        load_settings()


def test_settings_file_is_validated(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("functional:\n  margin_factor: 0.5\n")
    with pytest.raises(ConfigError):
        load_settings(path)
    path.write_text("functional:\n  exact_tolerance: 1.0e-6\n")
    loaded = load_settings(path)
    assert loaded.functional.exact_tolerance == 1e-6
    assert loaded.cli.j_max == 12


def test_missing_settings_file_falls_back_to_defaults(tmp_path):
    assert load_settings(tmp_path / "absent.yaml").construction.cantor_max_j == 14


def test_construct_section_keeps_its_yaml_name(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("construct:\n  cantor_max_j: 9\n")
    loaded = load_settings(path)
    assert loaded.construction.cantor_max_j == 9
    assert "construct" not in type(loaded).model_fields
    assert callable(loaded.construct)
    assert type(loaded).model_validate({"construction": {"laminate_max_j": 7}}).construction.laminate_max_j == 7


# functional values
@pytest.mark.parametrize("j", [1, 3, 8, 20])
def test_laminate_functional_is_constant_in_j(j):
    field = dilatation_field(laminate().member(j))
    assert functional_value(field, FunctionalSpec(phi=power_function(2.0))) == pytest.approx(5.0, rel=1e-12)


def test_functional_of_K():
    spec = FunctionalSpec(phi=linear_function(), dilatation="K")
    assert functional_value(dilatation_field(laminate().member(4)), spec) == pytest.approx(5.0, rel=1e-12)
    assert functional_value(dilatation_field(laminate().limit()), spec) == pytest.approx(4.0, rel=1e-12)


def test_functional_on_a_sub_region():
    field = dilatation_field(laminate().member(1))
    lower_half = ((0.0, 1.0), (0.0, 1.0), (0.0, 0.5))
    spec = FunctionalSpec(phi=power_function(2.0), region=lower_half)
    assert functional_value(field, spec) == pytest.approx(2.5, rel=1e-12)
    with pytest.raises(ParamOutOfRange):
        functional_value(field, FunctionalSpec(phi=power_function(2.0), region=((0.0, 2.0), (0.0, 1.0), (0.0, 1.0))))


def test_spherical_weight_slab_and_cell_rules_agree():
    weight = Weight("spherical")
    spec = FunctionalSpec(phi=linear_function(), weight=weight)
    m = affine_stretch(3.0, 3, resolution=(32, 32, 32))
    exact = functional_value(dilatation_field(m), spec)
    cells = functional_value(dilatation_field(sample(m)), spec)
    assert cells == pytest.approx(exact, rel=2e-3)
    assert exact < 3.0


def test_weight_kinds():
    with pytest.raises(ParamOutOfRange):
        Weight("gaussian")
    with pytest.raises(ParamOutOfRange):
        Weight("custom")
    with pytest.raises(ParamOutOfRange):
        Weight("custom", lambda x: x[..., 0] - 0.5).check_positive(((0.0, 1.0), (0.0, 1.0)))


def test_integrate_field_counts_infinite_dilatation_only_on_positive_measure():
    field = dilatation_field(cantor_sequence(1.0, None, 0.5, 2).limit())
    assert integrate_field(field, lambda op, J, K, P, jac: np.abs(J)) == pytest.approx(0.5, rel=1e-9)
    assert integrate_field(field, lambda op, J, K, P, jac: P) == INF


# cube averages and the pointwise bound
def test_cube_average_of_a_stretch():
    field = dilatation_field(affine_stretch(3.0, 3))
    assert cube_average(field, CENTER, 0.5, linear_function()) == pytest.approx(3.0, rel=1e-12)
    assert point_dilatation(field, CENTER) == (9.0, 3.0)
    with pytest.raises(CubeOutOfDomain):
        cube_average(field, (0.9, 0.5, 0.5), 0.5, linear_function())


def test_point_dilatation_needs_an_analytic_field():
    with pytest.raises(ParamOutOfRange):
        point_dilatation(dilatation_field(sample(affine_stretch(3.0, 3))), CENTER)


def test_pointwise_bound_for_laminates():
    seq = laminate()
    fields = [dilatation_field(seq.member(j)) for j in range(1, 11)]
    report = check_pointwise_bound(dilatation_field(seq.limit()), fields, CENTER, [2.0 ** -k for k in range(1, 6)])
    assert report.point_value == pytest.approx(2.0)
    assert report.double_liminf == pytest.approx(2.0, rel=1e-12)
    assert report.holds
    assert len(report.averages) == 5 and len(report.averages[0]) == 10


def test_jensen_on_a_laminate_cube():
    report = jensen_check(dilatation_field(laminate().member(3)), CENTER, 0.5, power_function(2.0))
    assert report.phi_of_average == pytest.approx(4.0, rel=1e-12)
    assert report.average_of_phi == pytest.approx(5.0, rel=1e-12)
    assert report.holds


# semicontinuity experiments
def test_classify_gap():
    assert classify_gap(4.0, 5.0, 1e-9, 1e-8)[0] == "inequality-holds"
    assert classify_gap(1.5, 1.0, 1e-9, 1e-8)[0] == "strict-violation"
    assert classify_gap(1.0 + 5e-9, 1.0, 1e-9, 1e-8)[0] == "inconclusive"
    assert classify_gap(INF, INF, 1e-9, 1e-8) == ("inequality-holds", 0.0)


def test_laminate_experiment_with_convex_phi():
    report = semicontinuity_experiment(laminate(), FunctionalSpec(phi=power_function(2.0)), 8)
    assert report.verdict == "inequality-holds"
    assert report.liminf_method == "constant-tail"
    assert report.limit_value == pytest.approx(4.0)
    assert report.liminf_estimate == pytest.approx(5.0)
    assert report.slab_exact
    assert report.indices == list(range(1, 9))
    assert any("constant in j" in note for note in report.notes)


def test_laminate_experiment_with_sqrt(specs):
    report = semicontinuity_experiment(laminate(), FunctionalSpec(phi=load_growth(specs / "sqrt.json")), 8)
    assert report.verdict == "strict-violation"
    assert report.margins["gap"] == pytest.approx(math.sqrt(2.0) - 0.5 - 0.5 * math.sqrt(3.0), rel=1e-9)
    assert report.margins["gap"] >= 0.048


def test_left_jump_experiment(specs):
    seq = left_jump_sequence(2.0, None, 3)
    bad = semicontinuity_experiment(seq, FunctionalSpec(phi=load_growth(specs / "jump_at_2.json")), 10)
    assert bad.verdict == "strict-violation"
    assert bad.limit_value == 10.0
    good = semicontinuity_experiment(seq, FunctionalSpec(phi=power_function(2.0)), 10)
    assert good.liminf_method == "extrapolated"
    assert good.verdict == "inequality-holds"


def test_cantor_experiment_with_bounded_phi(specs):
    seq = cantor_sequence(1.0, None, 0.5, 3)
    report = semicontinuity_experiment(seq, FunctionalSpec(phi=load_growth(specs / "constant_inf.json")), 10)
    assert report.limit_value == INF
    assert report.liminf_estimate == pytest.approx(5.0)
    assert report.verdict == "strict-violation"


def test_experiment_index_range():
    seq = cantor_sequence(1.0, None, 0.5, 2)
    with pytest.raises(ParamOutOfRange):
        semicontinuity_experiment(seq, FunctionalSpec(phi=power_function(2.0)), 2)
    report = semicontinuity_experiment(seq, FunctionalSpec(phi=power_function(2.0)), 16)
    assert report.indices[-1] == 14


def test_weighted_experiment_reports_weight():
    spec = FunctionalSpec(phi=power_function(2.0), weight=Weight("spherical"))
    report = semicontinuity_experiment(laminate(), spec, 5)
    assert report.weight == "spherical"
    assert report.verdict == "inequality-holds"


def test_stock_suite_for_convex_phi():
    reports = run_stock_suite(power_function(2.0), 3, 10)
    assert [r.sequence.split("(")[0] for r in reports] == ["laminate", "collapse", "cantor", "left_jump"]
    assert all(r.verdict == "inequality-holds" for r in reports)


# fatou
def test_fatou_identity_matrix():
    report = fatou_series(np.eye(8))
    assert report.lhs == 0.0
    assert report.rhs == 1.0
    assert report.holds


def test_fatou_constant_rows():
    a = np.repeat((2.0 ** -np.arange(1, 61))[:, None], 10, axis=1)
    report = fatou_series(a)
    assert report.lhs == pytest.approx(1.0, rel=1e-12)
    assert report.rhs == pytest.approx(1.0, rel=1e-12)
    assert report.holds


def test_fatou_random_nonnegative_arrays():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        a = rng.exponential(size=(rng.integers(1, 12), rng.integers(1, 12)))
        assert fatou_series(a).holds


@settings(max_examples=100)
@given(st.lists(st.lists(st.floats(-1.0, 1.0), min_size=6, max_size=6), min_size=1, max_size=8))
def test_fatou_dominated_signed_arrays(rows):
    a = np.array(rows)
    assert fatou_series(a, np.ones(len(rows))).holds


def test_fatou_needs_domination():
    a = np.array([[1.0, -1.0, 0.5], [0.0, 0.25, -0.25]])
    with pytest.raises(DominationFailed):
        fatou_series(a)
    with pytest.raises(DominationFailed):
        fatou_series(a, [0.5, 1.0])
    assert fatou_series(a, [1.0, 1.0]).holds
