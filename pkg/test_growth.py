import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distortion_lab.errors import GrowthSpecError, NoTangent, NotConvex, PreconditionFailed
from distortion_lab.growth import (GrowthFunction, Piece, calderon_alpha_window, calderon_constant, calderon_integral,
                                   check_slope_bounds, constant_function, convex_minorant, decompose,
                                   derivative_integral, evaluate, exp_power, generalized_inverse, is_strictly_convex,
                                   linear_function, piecewise_linear, power_function, power_transform, regularize,
                                   infinity_threshold, right_derivative, truncate_below, zero_threshold)
from distortion_lab.growth_spec import growth_from_dict, growth_to_dict, load_growth

INF = math.inf


def t_log_t():
    return GrowthFunction([Piece(start=0.0, end=INF, kind="logpow", coeffs=(1.0, 1.0, 1.0))], label="t log(e+t)")


def with_flat_part():
    return GrowthFunction([
        Piece(start=0.0, end=1.0, kind="linear", coeffs=(1.0, 0.0)),
        Piece(start=1.0, end=2.0, kind="constant", coeffs=(1.0,)),
        Piece(start=2.0, end=INF, kind="linear", coeffs=(1.0, -1.0)),
    ], label="flat on [1, 2)")


# evaluate
def test_evaluate_power():
    g = power_function(2.0)
    assert evaluate(g, 3.0) == 9.0
    assert evaluate(g, 0.0) == 0.0
    assert evaluate(g, INF) == INF


def test_evaluate_beyond_domain_end():
    g = GrowthFunction([Piece(start=0.0, end=2.0, kind="power", coeffs=(1.0, 2.0))], T0=2.0)
    assert evaluate(g, 3.0) == INF
    assert evaluate(g, 1.5) == pytest.approx(2.25)


def test_evaluate_at_T0_uses_declared_value():
    g = growth_from_dict({"pieces": [{"from": 0, "to": 2, "kind": "linear", "coeffs": [1]}], "T0": 2, "at_T0": 10})
    assert g.left_limit(2.0) == pytest.approx(2.0)
    assert g(2.0) == 10.0
    assert g(2.5) == INF


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_evaluate_is_nondecreasing(a, b):
    lo, hi = min(a, b), max(a, b)
    for g in (power_function(2.0), t_log_t(), with_flat_part(), exp_power(1.0, 0.5)):
        assert evaluate(g, lo) <= evaluate(g, hi)


# right_derivative
def test_right_derivative_power():
    g = power_function(3.0)
    assert right_derivative(g, 2.0) == pytest.approx(12.0, rel=1e-12)


def test_right_derivative_takes_right_slope_at_kink():
    g = piecewise_linear([0.0, 1.0], [1.0, 3.0])
    assert right_derivative(g, 1.0) == 3.0


def test_right_derivative_matches_finite_difference():
    g = power_function(2.0)
    h = 1e-4
    fd = (g(2.0 + h) - g(2.0 - h)) / (2 * h)
    assert abs(right_derivative(g, 2.0) - fd) <= 1e-6


def test_right_derivative_infinite_beyond_T0():
    g = GrowthFunction([Piece(start=0.0, end=2.0, kind="linear", coeffs=(1.0, 0.0))], T0=2.0)
    assert right_derivative(g, 2.0) == INF


def test_right_derivative_rejects_concave_kink():
    g = piecewise_linear([0.0, 1.0], [3.0, 1.0])
    with pytest.raises(NotConvex):
        right_derivative(g, 1.0)


# is_strictly_convex
def test_strict_convexity_of_square():
    report = is_strictly_convex(power_function(2.0))
    assert report.convex
    assert report.strictly_convex
    assert report.tail == "superlinear"


def test_linear_is_not_strictly_convex():
    report = is_strictly_convex(linear_function())
    assert report.convex
    assert not report.strictly_convex


def test_t_log_t_is_strictly_convex():
    report = is_strictly_convex(t_log_t())
    assert report.strictly_convex
    slopes = [s for _, s in report.slopes]
    assert all(b > a for a, b in zip(slopes, slopes[1:]))


def test_concave_function_reports_violation():
    report = is_strictly_convex(power_function(0.5))
    assert not report.convex
    assert report.violation is not None


# calderon_integral
def test_calderon_integral_closed_form():
    assert calderon_integral(power_function(4.0), 0.4, 1.0) == pytest.approx(5.0, abs=1e-6)


def test_calderon_integral_of_linear_diverges():
    assert calderon_integral(linear_function(), 0.7, 1.0) == INF


def test_calderon_integral_boundary_case_diverges():
    assert calderon_integral(power_function(2.0), 0.5, 4.0) == INF


def test_calderon_integral_needs_positive_value():
    g = GrowthFunction([
        Piece(start=0.0, end=1.0, kind="constant", coeffs=(0.0,)),
        Piece(start=1.0, end=INF, kind="power", coeffs=(1.0, 2.0, 1.0)),
    ])
    with pytest.raises(PreconditionFailed):
        calderon_integral(g, 0.5, 0.5)


def test_calderon_constant():
    assert calderon_constant(power_function(4.0), 3, 1.0) == pytest.approx(3.0, abs=1e-6)
    with pytest.raises(PreconditionFailed):
        calderon_constant(power_function(4.0), 1, 1.0)


def test_thresholds():
    g = GrowthFunction([
        Piece(start=0.0, end=1.0, kind="constant", coeffs=(0.0,)),
        Piece(start=1.0, end=INF, kind="power", coeffs=(1.0, 2.0, 1.0)),
    ])
    assert zero_threshold(g) == pytest.approx(1.0, abs=1e-12)
    assert zero_threshold(constant_function(5.0)) == 0.0
    assert infinity_threshold(g) == INF
    capped = GrowthFunction([Piece(start=0.0, end=2.0, kind="linear", coeffs=(1.0, 0.0))], T0=2.0)
    assert infinity_threshold(capped) == 2.0


@pytest.mark.parametrize("piece,alpha", [
    (("power", (1.0, 2.0)), 0.5),
    (("power", (1.0, 4.0)), 0.4),
    (("power", (1.0, 4.0)), 0.3),
    (("power", (1.0, 6.0)), 0.25),
    (("logpow", (1.0, 3.0, 1.0)), 0.5),
    (("logpow", (1.0, 3.0, 1.0)), 0.6),
    (("logpow", (1.0, 3.0, 3.0)), 0.5),
])
def test_calderon_forms_agree_on_finiteness(piece, alpha):
    kind, coeffs = piece
    g = GrowthFunction([Piece(start=0.0, end=INF, kind=kind, coeffs=coeffs)])
    direct = calderon_integral(g, alpha, 1.0)
    derivative = derivative_integral(g, alpha, 1.0)
    assert math.isfinite(direct) == math.isfinite(derivative)


def test_calderon_alpha_window():
    assert calderon_alpha_window(4.0, 3) == pytest.approx((1.0 / 3.0, 0.5))
    assert calderon_alpha_window(3.0, 3) is None


def test_slope_bounds_for_convex_functions():
    ts = np.geomspace(1e-2, 1e3, 60)
    for g in (power_function(2.0), t_log_t(), piecewise_linear([0.0, 1.0, 4.0], [1.0, 2.0, 5.0])):
        assert check_slope_bounds(g, ts).holds


# decompose
def test_decompose_t4():
    g = power_function(4.0)
    result = decompose(g, 0.4, 0.8)
    assert result.lam == pytest.approx(0.5)
    assert result.T_star == pytest.approx(4.0 ** (-1.0 / 3.0), rel=1e-9)

    ts = np.linspace(0.0, 100.0, 10001)
    phi = g.evaluate_many(ts)
    tilde = result.phi_tilde.evaluate_many(ts)
    composed = result.psi.evaluate_many(tilde)
    assert np.max(np.abs(composed - phi) / np.maximum(1.0, phi)) <= 1e-8
    assert np.all(tilde <= phi * (1.0 + 1e-12) + 1e-12)


def test_decompose_t4_log():
    g = GrowthFunction([Piece(start=0.0, end=INF, kind="logpow", coeffs=(1.0, 4.0, 1.0))], label="t^4 log(e+t)")
    result = decompose(g, 0.4, 0.8)

    ts = np.concatenate((np.linspace(0.0, 100.0, 2001), np.geomspace(100.0, 1e6, 2001)))
    phi = g.evaluate_many(ts)
    tilde = result.phi_tilde.evaluate_many(ts)
    composed = result.psi.evaluate_many(tilde)
    assert np.max(np.abs(composed - phi) / np.maximum(1.0, phi)) <= 1e-8
    assert np.all(tilde <= phi * (1.0 + 1e-10) + 1e-12)
    assert np.all(np.diff(tilde) >= 0)


def test_decompose_tail_growth_of_log_power():
    g = GrowthFunction([Piece(start=0.0, end=INF, kind="logpow", coeffs=(1.0, 4.0, 1.0))])
    result = decompose(g, 0.4, 0.8)
    assert result.phi_tilde.pieces[-1].asymptotic() == ("power", pytest.approx(2.5), pytest.approx(0.5))
    assert result.psi.pieces[-1].asymptotic() == ("power", pytest.approx(1.6), pytest.approx(0.2))


def test_decompose_piecewise_linear_table():
    knots = ((0.0, 0.0), (1.0, 0.5), (3.0, 4.5), (4.0, 9.5))
    g = GrowthFunction([Piece(start=0.0, end=4.0, kind="tabulated", knots=knots)], T0=4.0)
    result = decompose(g, 0.3, 0.6)
    assert result.T_star == pytest.approx(1.0, abs=1e-9)

    ts = np.linspace(0.0, 3.99, 400)
    phi = g.evaluate_many(ts)
    tilde = result.phi_tilde.evaluate_many(ts)
    np.testing.assert_allclose(result.psi.evaluate_many(tilde), phi, rtol=1e-12, atol=1e-12)
    assert result.phi_tilde(3.0) == pytest.approx(0.5 + 2.0 * math.sqrt(2.0), rel=1e-9)


def test_decomposed_growth_survives_json():
    g = GrowthFunction([Piece(start=0.0, end=INF, kind="logpow", coeffs=(1.0, 4.0, 1.0))])
    tilde = decompose(g, 0.4, 0.8).phi_tilde
    rebuilt = growth_from_dict(growth_to_dict(tilde))
    assert rebuilt.pieces[-1].kind == "slope_integral"
    for t in (0.1, 2.0, 50.0, 1e4):
        assert rebuilt(t) == pytest.approx(tilde(t), rel=1e-14)


def test_decompose_preserves_calderon_integral():
    result = decompose(power_function(4.0), 0.4, 0.8)
    value = derivative_integral(result.phi_tilde, 0.8, result.T_star)
    assert math.isfinite(value)
    assert value == pytest.approx(result.I, abs=1e-6)
    assert math.isfinite(calderon_integral(result.phi_tilde, 0.8, 1.0))


def test_decompose_rejects_constant():
    with pytest.raises(PreconditionFailed, match="nonconstant required"):
        decompose(constant_function(5.0), 0.4, 0.8)


def test_decompose_rejects_divergent_integral():
    with pytest.raises(PreconditionFailed):
        decompose(power_function(2.0), 0.5, 0.9)


# regularize
def test_regularize_strictly_increasing_is_unchanged():
    g = power_function(2.0)
    assert regularize(g, 0.1) is g


def test_regularize_one_flat_interval():
    g = with_flat_part()
    out = regularize(g, 0.1)
    assert out(1.5) == pytest.approx(1.025)
    assert 0.0 <= out(2.0) - g(2.0) <= 0.05 + 1e-15

    ts = np.linspace(0.0, 6.0, 601)
    values = out.evaluate_many(ts)
    base = g.evaluate_many(ts)
    assert np.all(np.diff(values) > 0)
    assert np.all(values >= base)
    assert np.all(values <= base + 0.1)


def test_regularize_shifted_power():
    g = GrowthFunction([Piece(start=0.0, end=INF, kind="power", coeffs=(1.0, 2.0, 1.0))], label="(t-1)_+^2")
    out = regularize(g, 0.1)
    ts = np.linspace(0.0, 3.0, 301)
    values = out.evaluate_many(ts)
    base = g.evaluate_many(ts)
    assert np.all(np.diff(values) > 0)
    assert np.all(values >= base)
    assert np.all(values <= base + 0.1)


def test_derivative_integral_sees_the_flat_start_of_a_shifted_power():
    g = GrowthFunction([Piece(start=0.0, end=INF, kind="power", coeffs=(1.0, 4.0, 1.0))])
    assert derivative_integral(g, 0.5, 0.0) == INF
    assert math.isfinite(derivative_integral(g, 0.5, 2.0))


def test_regularize_unbounded_flat_tail():
    g = piecewise_linear([0.0, 1.0], [1.0, 0.0])
    out = regularize(g, 0.2)
    ts = np.linspace(0.0, 20.0, 201)
    values = out.evaluate_many(ts)
    assert np.all(np.diff(values) > 0)
    assert np.all(values <= g.evaluate_many(ts) + 0.2)


# truncate_below
def test_truncate_below():
    g = truncate_below(power_function(2.0), 2.0)
    assert g(1.0) == 4.0
    assert g(3.0) == 9.0
    assert g(0.0) == 0.0
    ts = np.linspace(2.0, 50.0, 97)
    np.testing.assert_array_equal(g.evaluate_many(ts), power_function(2.0).evaluate_many(ts))


def test_truncate_below_needs_positive_level():
    with pytest.raises(PreconditionFailed):
        truncate_below(power_function(2.0), 0.0)


# generalized_inverse
def test_generalized_inverse_examples():
    assert generalized_inverse(power_function(2.0), 4.0) == pytest.approx(2.0, rel=1e-15)

    bounded = piecewise_linear([0.0, 10.0], [1.0, 0.0])
    assert generalized_inverse(bounded, 11.0) == INF

    jump = GrowthFunction([
        Piece(start=0.0, end=3.0, kind="linear", coeffs=(2.0 / 3.0, 0.0)),
        Piece(start=3.0, end=INF, kind="linear", coeffs=(1.0, 2.0)),
    ])
    assert generalized_inverse(jump, 4.0) == 3.0


def test_generalized_inverse_matches_dense_grid():
    jump = GrowthFunction([
        Piece(start=0.0, end=3.0, kind="linear", coeffs=(2.0 / 3.0, 0.0)),
        Piece(start=3.0, end=INF, kind="linear", coeffs=(1.0, 2.0)),
    ])
    ts = np.linspace(0.0, 10.0, 100001)
    values = jump.evaluate_many(ts)
    for tau in (0.5, 1.9, 4.0, 5.0, 7.5):
        brute = ts[np.argmax(values >= tau)]
        assert abs(generalized_inverse(jump, tau) - brute) <= 2e-4


@given(st.floats(1e-3, 1e3))
def test_generalized_inverse_galois_property(t):
    for g in (power_function(3.0), with_flat_part(), t_log_t()):
        tau = g(t)
        inverse = generalized_inverse(g, tau)
        assert inverse <= t * (1.0 + 1e-9) + 1e-12
        assert g(inverse) >= tau * (1.0 - 1e-12)


@given(st.floats(1e-3, 1e3))
def test_generalized_inverse_round_trip(t):
    g = power_function(3.0)
    assert generalized_inverse(g, g(t)) == pytest.approx(t, rel=1e-9)


# convex_minorant
def test_convex_minorant_square():
    g = power_function(2.0)
    minorant = convex_minorant(g, 1.0)
    assert minorant(2.0) == pytest.approx(4.0, rel=1e-9)
    assert minorant(1.5) == pytest.approx(2.0, rel=1e-9)
    assert minorant(1.0) == 0.0
    ts = np.linspace(2.0, 40.0, 77)
    np.testing.assert_allclose(minorant.evaluate_many(ts), g.evaluate_many(ts), rtol=1e-12)

    ts = np.linspace(0.0, 40.0, 801)
    assert np.all(minorant.evaluate_many(ts) <= g.evaluate_many(ts) + 1e-9)
    assert is_strictly_convex(minorant).convex


def test_convex_minorant_without_tangent():
    with pytest.raises(NoTangent):
        convex_minorant(linear_function(1.0, 5.0), 1.0)


# power_transform
def test_power_transform_to_phi():
    phi = power_transform(power_function(2.0), 3, "to_phi")
    ts = np.linspace(0.0, 10.0, 101)
    np.testing.assert_allclose(phi.evaluate_many(ts), ts ** 4, rtol=1e-12)


def test_power_transform_round_trip():
    for g in (power_function(2.0), with_flat_part(), t_log_t()):
        back = power_transform(power_transform(g, 3, "to_phi"), 3, "to_Phi")
        ts = np.linspace(0.0, 50.0, 201)
        np.testing.assert_allclose(back.evaluate_many(ts), g.evaluate_many(ts), rtol=1e-10, atol=1e-12)


def test_power_transform_inverse_identity():
    phi = power_function(4.0)
    composite = power_transform(phi, 3, "to_phi")
    assert generalized_inverse(composite, 256.0) == pytest.approx(2.0, rel=1e-12)
    for tau in (3.0, 16.0, 81.0, 1e4):
        expected = generalized_inverse(phi, tau) ** 0.5
        assert generalized_inverse(composite, tau) == pytest.approx(expected, rel=1e-10)


def test_power_transform_direction_is_checked():
    with pytest.raises(ValueError):
        power_transform(power_function(2.0), 3, "sideways")


# growth_spec
def test_load_growth_spec(specs):
    g = load_growth(specs / "t2.json")
    assert g(3.0) == 9.0
    assert g.label == "t^2"


def test_growth_spec_gap_reports_field():
    with pytest.raises(GrowthSpecError) as e:
        growth_from_dict({"pieces": [{"from": 0, "to": 1, "kind": "linear", "coeffs": [1]},
                                     {"from": 2, "to": "inf", "kind": "linear", "coeffs": [1]}]})
    assert e.value.field == "pieces[1].from"
    assert str(e.value).startswith("pieces[1].from:")


def test_growth_spec_rejects_decreasing_function():
    with pytest.raises(GrowthSpecError):
        growth_from_dict({"pieces": [{"from": 0, "to": "inf", "kind": "linear", "coeffs": [-1, 5]}]})


def test_growth_spec_allows_declared_non_monotone():
    g = growth_from_dict({"pieces": [{"from": 0, "to": 2, "kind": "linear", "coeffs": [-1, 5]},
                                     {"from": 2, "to": "inf", "kind": "linear", "coeffs": [1, 1]}],
                          "check_monotone": False})
    assert g(1.0) == 4.0


def test_growth_spec_unknown_key():
    with pytest.raises(GrowthSpecError) as e:
        growth_from_dict({"pieces": [{"from": 0, "to": "inf", "kind": "power", "coeffs": [1, 2], "shift": 1}]})
    assert "pieces[0]" in e.value.field


def test_growth_spec_wrong_coefficient_count():
    with pytest.raises(GrowthSpecError):
        growth_from_dict({"pieces": [{"from": 0, "to": "inf", "kind": "power", "coeffs": [1]}]})


def test_growth_to_dict_rebuilds_same_function(specs):
    g = load_growth(specs / "jump_at_2.json")
    rebuilt = growth_from_dict(growth_to_dict(g))
    for t in (0.0, 0.5, 1.999, 2.0, 3.0):
        assert rebuilt(t) == g(t)
