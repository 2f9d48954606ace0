import json
import math

import numpy as np
import pytest

from distortion_lab.construct import (CertifiedGood, Witness, cantor_gain, cantor_intervals, cantor_sequence,
                                      check_uniform_bound, collapse_parameters, collapse_sequence,
                                      constant_sequence, counterexample_for, dispatcher_grid, laminate_sequence,
                                      left_jump_sequence, load_sequence, node_distance, quasiconformality_constant,
                                      stock_sequences)
from distortion_lab.errors import InvariantBreach, ParamOutOfRange
from distortion_lab.field import dilatation_field
from distortion_lab.functional import FunctionalSpec, run_stock_suite, semicontinuity_experiment
from distortion_lab.growth import GrowthFunction, Piece, piecewise_linear, power_function
from distortion_lab.growth_spec import load_growth

INF = math.inf


def t_log_t():
    return GrowthFunction([Piece(start=0.0, end=INF, kind="logpow", coeffs=(1.0, 1.0, 1.0))], label="t log(e+t)")


def dip(drop_slope, value0, until):
    """Decreasing on [0, until), then (t - until)^2 + 1"""
    return GrowthFunction([
        Piece(start=0.0, end=until, kind="linear", coeffs=(drop_slope, value0)),
        Piece(start=until, end=INF, kind="power", coeffs=(1.0, 2.0, until, 1.0)),
    ], label=f"dip to {until:g}", check_monotone=False)


# laminates
def test_laminate_members():
    seq = laminate_sequence(1.0, 3.0, 0.5, 3)
    assert seq.params["t0"] == 2.0
    member = seq.member(3)
    assert len(member.source.breaks) == 2 ** 4 + 1
    assert member.resolution == (2, 2, 64)
    assert seq.uniform_bound(3) == 0.25
    assert seq.limit().source.matrices[0][2, 2] == 2.0


@pytest.mark.parametrize("j", range(1, 7))
def test_laminate_uniform_bound(j):
    seq = laminate_sequence(1.0, 3.0, 0.5, 3)
    assert check_uniform_bound(seq, j) == pytest.approx(0.5 * 2.0 ** -j)


def test_laminate_parameters():
    with pytest.raises(ParamOutOfRange):
        laminate_sequence(0.0, 3.0, 0.5, 3)
    with pytest.raises(ParamOutOfRange):
        laminate_sequence(1.0, 3.0, 1.5, 3)
    with pytest.raises(ParamOutOfRange):
        laminate_sequence(1.0, 3.0, 0.5, 1)


def test_members_exist_for_a_finite_index_range():
    seq = laminate_sequence(1.0, 3.0, 0.5, 2)
    with pytest.raises(ParamOutOfRange):
        seq.member(0)
    with pytest.raises(ParamOutOfRange):
        seq.member(seq.max_j + 1)


def test_describe_and_to_dict():
    seq = laminate_sequence(1.0, 3.0, 0.5, 3)
    assert seq.describe().startswith("laminate(")
    assert "lambda=0.5" in seq.describe()
    assert json.loads(json.dumps(seq.to_dict()))["params"]["t0"] == 2.0


# collapse
def test_collapse_parameters():
    t1, t2, lam = collapse_parameters(1.5, 2.0, 3)
    assert (t1, t2) == (0.25, 2.0)
    assert lam == pytest.approx(2.0 / 7.0, rel=1e-15)


def test_collapse_has_constant_dilatation():
    seq = collapse_sequence(1.5, 2.0, 3)
    for j in (1, 4, 9):
        np.testing.assert_allclose(dilatation_field(seq.member(j)).P, 2.0, rtol=1e-12)
    np.testing.assert_allclose(dilatation_field(seq.limit()).P, 1.5, rtol=1e-12)
    assert quasiconformality_constant(seq, 4) == pytest.approx(4.0, rel=1e-12)
    assert "tau_star^(n-1)" in seq.notes[0]
    assert check_uniform_bound(seq, 5) <= seq.uniform_bound(5)


def test_collapse_parameters_range():
    with pytest.raises(ParamOutOfRange):
        collapse_sequence(0.5, 2.0, 3)
    with pytest.raises(ParamOutOfRange):
        collapse_sequence(2.0, 2.0, 3)


# cantor
def test_cantor_intervals():
    intervals = cantor_intervals(0.5, 8)
    assert intervals["q"] == pytest.approx(1.0 / 3.0)
    assert len(intervals["segment_starts"]) == 2 ** 8
    assert intervals["measure"] == pytest.approx(intervals["series_measure"], rel=1e-12)
    assert cantor_intervals(0.5, 0)["measure"] == 1.0


def test_cantor_gain_tends_to_the_staircase_increment():
    seq = cantor_sequence(2.0, None, 0.5, 3)
    for j in (1, 5, 10):
        assert abs(cantor_gain(seq, j) - 1.0) <= seq.uniform_bound(j) + 1e-12
    assert "psi(1)" in seq.notes[0]


@pytest.mark.parametrize("j", range(1, 6))
def test_cantor_uniform_bound(j):
    check_uniform_bound(cantor_sequence(2.0, None, 0.5, 2), j)


def test_cantor_dilatation_grows_on_the_set():
    seq = cantor_sequence(1.0, None, 0.5, 2)
    slabs = dilatation_field(seq.member(6)).slabs
    fractions = slabs.value_fractions(slabs.P, 0.0, 1.0)
    assert max(fractions) == pytest.approx(64.0)
    assert fractions[max(fractions)] == pytest.approx(cantor_intervals(0.5, 7)["measure"], rel=1e-12)


def test_cantor_parameters():
    with pytest.raises(ParamOutOfRange):
        cantor_sequence(0.5, None, 0.5, 3)
    with pytest.raises(ParamOutOfRange):
        cantor_sequence(1.0, None, 1.0, 3)
    with pytest.raises(ParamOutOfRange):
        cantor_sequence(1.0, lambda j: 3.0, 0.5, 3)
    with pytest.raises(ParamOutOfRange):
        cantor_sequence(1.0, lambda j: 10.0 - j, 0.5, 3)


# left jump and constant sequences
def test_left_jump_distance_equals_bound():
    seq = left_jump_sequence(2.0, None, 3)
    assert seq.uniform_bound(3) == 0.125
    assert node_distance(seq, 3) == pytest.approx(0.125, abs=1e-15)
    check_uniform_bound(seq, 3)


def test_left_jump_parameters():
    with pytest.raises(ParamOutOfRange):
        left_jump_sequence(1.0, None, 3)
    with pytest.raises(ParamOutOfRange):
        left_jump_sequence(2.0, lambda j: 2.5, 3)


def test_constant_sequence():
    seq = constant_sequence(1.5, 2)
    assert node_distance(seq, 4) == 0.0


def test_uniform_bound_breach_is_reported():
    seq = left_jump_sequence(2.0, None, 3)
    seq._bound = lambda j: 0.0
    with pytest.raises(InvariantBreach):
        check_uniform_bound(seq, 2)


def test_stock_sequences():
    assert [s.kind for s in stock_sequences(3)] == ["laminate", "collapse", "cantor", "left_jump"]


# sequence JSON
def test_load_sequence_from_spec(specs):
    data = json.loads((specs / "seq_cantor.json").read_text())
    seq, j_max = load_sequence(data["sequence"])
    assert seq.kind == "cantor"
    assert seq.n == 2
    assert j_max == 10


def test_load_sequence_with_listed_schedule():
    seq, j_max = load_sequence({"kind": "cantor", "params": {"tau_schedule": [1, 2, 4, 8]}, "n": 2})
    assert j_max is None
    slabs = dilatation_field(seq.member(6)).slabs
    assert max(slabs.value_fractions(slabs.P, 0.0, 1.0)) == pytest.approx(8.0)


@pytest.mark.parametrize("data", [
    {"kind": "spiral", "params": {}},
    {"kind": "laminate", "params": {"t1": 1, "lambda": 0.5}},
    {"kind": "laminate", "params": {"t1": 1, "t2": 3, "lambda": 0.5}, "colour": "red"},
    {"kind": "laminate", "params": {"t1": 1, "t2": 3, "lambda": 0.5}, "j_max": 2},
    {"kind": "cantor", "params": {"tau_schedule": "fast"}},
])
def test_load_sequence_rejects(data):
    with pytest.raises(ParamOutOfRange):
        load_sequence(data)


def test_missing_parameter_names_the_field():
    with pytest.raises(ParamOutOfRange) as info:
        load_sequence({"kind": "laminate", "params": {"t1": 1, "lambda": 0.5}})
    assert info.value.context["field"] == "params.t2"


# counterexample dispatcher
@pytest.mark.parametrize("phi", [power_function(2.0), power_function(3.0), power_function(4.0), t_log_t()],
                         ids=["t2", "t3", "t4", "t_log_t"])
def test_convex_increasing_phi_is_certified(phi):
    result = counterexample_for(phi, 3)
    assert isinstance(result, CertifiedGood)
    assert result.evidence["scope"] == "sample-grid certification"


@pytest.mark.parametrize("phi", [power_function(2.0), t_log_t()], ids=["t2", "t_log_t"])
def test_certified_phi_passes_stock_suite(phi):
    assert all(r.verdict == "inequality-holds" for r in run_stock_suite(phi, 3, 10))


@pytest.mark.parametrize("phi", [
    power_function(0.5),
    power_function(0.75),
    piecewise_linear([0.0, 2.0], [2.0, 1.0]),
], ids=["sqrt", "t^0.75", "concave kink"])
def test_nonconvex_phi_gets_a_laminate(phi):
    seq, witness = counterexample_for(phi, 3)
    assert isinstance(witness, Witness)
    assert seq.kind == "laminate"
    assert witness.reason == "not convex"
    t1, t2, lam = witness.values["t1"], witness.values["t2"], witness.values["lambda"]
    assert phi(lam * t1 + (1 - lam) * t2) > lam * phi(t1) + (1 - lam) * phi(t2)
    report = semicontinuity_experiment(seq, FunctionalSpec(phi=phi), 10)
    assert report.verdict == "strict-violation"


@pytest.mark.parametrize("phi,expected", [(dip(-4.0, 9.0, 2.0), (1.0, 2.0)), (dip(-1.0, 4.0, 3.0), (1.0, 3.0))],
                         ids=["dip to 2", "dip to 3"])
def test_nonmonotone_phi_gets_a_collapse(phi, expected):
    seq, witness = counterexample_for(phi, 3)
    assert seq.kind == "collapse"
    assert (witness.values["tau0"], witness.values["tau_star"]) == expected
    report = semicontinuity_experiment(seq, FunctionalSpec(phi=phi), 10)
    assert report.verdict == "strict-violation"


def test_left_jump_phi(specs):
    phi = load_growth(specs / "jump_at_2.json")
    seq, witness = counterexample_for(phi, 3)
    assert seq.kind == "left_jump"
    assert witness.values == {"T": 2.0, "left": 2.0, "value": 10.0}
    assert semicontinuity_experiment(seq, FunctionalSpec(phi=phi), 10).verdict == "strict-violation"


def test_bounded_phi_gets_a_cantor_sequence(specs):
    phi = load_growth(specs / "constant_inf.json")
    seq, witness = counterexample_for(phi, 3)
    assert seq.kind == "cantor"
    assert witness.reason == "constant on [1, inf)"
    assert semicontinuity_experiment(seq, FunctionalSpec(phi=phi), 10).verdict == "strict-violation"


def test_constant_phi_without_jump_at_infinity_is_good(specs):
    assert isinstance(counterexample_for(load_growth(specs / "constant.json"), 3), CertifiedGood)


def test_dispatcher_grid_includes_breakpoints():
    ts = dispatcher_grid(piecewise_linear([0.0, 2.5], [2.0, 3.0]))
    assert 2.5 in ts
    assert ts[0] == 1.0
    assert ts[-1] <= 1e6


def test_non_numeric_parameter_is_rejected():
    with pytest.raises(ParamOutOfRange) as info:
        load_sequence({"kind": "laminate", "params": {"t1": "x", "t2": 3, "lambda": 0.5}})
    assert info.value.context["field"] == "params"
