import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad

from esqpt import singularity as S
from esqpt.semiclassics import DensityCurve, smooth_derivative

# ------------------------------------------------------------ classification


def test_classification_examples():
    c = S.classify_nondegenerate(3, 0)
    assert (c.kind, c.sign, c.derivative_order) == (S.JUMP, S.UP, 2)
    c = S.classify_nondegenerate(3, 3)
    assert (c.kind, c.sign, c.derivative_order) == (S.LOG, S.DOWN, 2)
    c = S.classify_nondegenerate(1.5, 0)
    assert (c.kind, c.derivative_order) == (S.SQRT_RIGHT, 1)


@pytest.mark.parametrize("r,kind,sign", [(0, S.JUMP, S.UP), (1, S.LOG, S.UP),
                                         (2, S.JUMP, S.DOWN), (3, S.LOG, S.DOWN)])
def test_four_cases_integer_f(r, kind, sign):
    c = S.classify_nondegenerate(3, r)
    assert (c.kind, c.sign, c.m) == (kind, sign, r)


@given(st.integers(1, 8), st.integers(0, 16))
def test_four_periodic_in_index(f, r):
    if r + 4 > 2 * f:
        return
    a, b = S.classify_nondegenerate(f, r), S.classify_nondegenerate(f, r + 4)
    assert (a.kind, a.sign, a.derivative_order) == (b.kind, b.sign, b.derivative_order)


@given(st.integers(0, 7))
def test_half_integer_side_follows_parity(r):
    c = S.classify_nondegenerate(4.5, r)
    assert c.kind == (S.SQRT_RIGHT if r % 2 == 0 else S.SQRT_LEFT)
    assert c.derivative_order == 4


def test_invalid_classification_input():
    with pytest.raises(ValueError):
        S.classify_nondegenerate(1.3, 0)
    with pytest.raises(ValueError):
        S.classify_nondegenerate(1, 3)


# ------------------------------------------------------------ irregular densities


def test_r0_density_one_dof():
    d = np.array([-0.5, -1e-3, 0.0, 1e-3, 0.7])
    assert_allclose(S.irregular_density_r0(1, 1.0, 1.0, d), [0, 0, 1, 1, 1])


def test_r0_density_below_minimum_vanishes():
    d = -np.linspace(0.01, 3, 20)
    assert np.all(S.irregular_density_r0(3, 2.5, 0.1, d) == 0)


def test_r0_density_power():
    d = np.linspace(0.1, 1, 5)
    v = S.irregular_density_r0(3, 1.0, 1.0, d)
    assert_allclose(v / d**2, v[0] / d[0] ** 2)


def test_r0_density_rejects_bad_determinant():
    with pytest.raises(ValueError):
        S.irregular_density_r0(1, -1.0, 1.0, [0.1])


@pytest.mark.parametrize("r,s", [(1, 1), (1, 3), (2, 4), (3, 3), (5, 1), (2, 1), (1, 2)])
def test_shell_integral_matches_quadrature(r, s):
    e = 0.5
    for d in (-0.3, -0.05, 0.02, 0.4):
        lo = math.sqrt(max(0.0, -d))
        ref, _ = quad(lambda t: t ** (r - 1) * (d + t * t) ** (s / 2 - 1), lo, math.sqrt(e),
                      limit=200)
        assert S.local_shell_integral(r, s, e, d) == pytest.approx(ref, rel=1e-8)


def test_general_density_rejects_bad_input():
    with pytest.raises(ValueError):
        S.irregular_density_general(1, 2, 1.0, 1.0, 0.5, [0.1])
    with pytest.raises(ValueError):
        S.irregular_density_general(2, 1, 1.0, 1.0, 0.0, [0.1])


def _amplitude_from_curve(f, r, det, hbar, e):
    k = S.defect_order(f)
    kind = S.classify_nondegenerate(f, r).kind
    d = np.linspace(-0.04, 0.04, 801)
    d = d[np.abs(d) > 1e-9]
    v = S.irregular_density(f, r, det, hbar, d, e_cutoff=e)
    return S.fit_defect_amplitude(d, v, kind, k, degree=8)[0]


CASES = [(1, 1), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3), (3, 4), (1.5, 1), (1.5, 2),
         (2.5, 1), (2.5, 2), (2.5, 3)]


@pytest.mark.parametrize("f,r", CASES)
def test_defect_amplitude_matches_prediction(f, r):
    det, hbar = 2.7, 0.3
    a = _amplitude_from_curve(f, r, det, hbar, 0.5)
    assert a == pytest.approx(S.predicted_amplitude(f, r, det, hbar), rel=1e-6)


@pytest.mark.parametrize("f,r", CASES)
def test_defect_amplitude_independent_of_cutoff(f, r):
    a1 = _amplitude_from_curve(f, r, 1.0, 1.0, 0.5)
    a2 = _amplitude_from_curve(f, r, 1.0, 1.0, 0.3)
    assert a1 == pytest.approx(a2, rel=1e-6)


def test_r0_amplitude_prediction():
    for f in (1, 2, 3):
        a = _amplitude_from_curve(f, 0, 3.0, 0.2, 0.5)
        assert a == pytest.approx(S.predicted_amplitude(f, 0, 3.0, 0.2), rel=1e-8)


@pytest.mark.parametrize("f,r", [(1, 1), (3, 2), (1.5, 1)])
def test_amplitude_scales_as_inverse_hbar_power(f, r):
    a = _amplitude_from_curve(f, r, 1.0, 0.1, 0.5)
    b = _amplitude_from_curve(f, r, 1.0, 0.2, 0.5)
    assert a / b == pytest.approx(2.0**f, rel=1e-6)


def test_saddle_log_sign_consistent_with_classification():
    assert S.predicted_amplitude(1, 1, 4.0, 1.0) == pytest.approx(-1 / (2 * math.pi))
    assert S.predicted_amplitude(3, 3, 1.0, 1.0) > 0


# ------------------------------------------------------------ degenerate


def test_degenerate_g_values():
    assert S.DegenerateSpec((2,) * 6, 1.0, 1.0).g == 3
    spec = S.DegenerateSpec((2, 4), 1 / math.sqrt(2), 1.0)
    _, g, _ = S.degenerate_density(spec, [0.5])
    assert g == 0.75
    assert S.classify_degenerate(spec).exponent == -0.25


@pytest.mark.parametrize("hbar", [1.0, 0.05])
def test_degenerate_constant_harmonic(hbar):
    # p^2/2 + q^2/2: y = x / sqrt(2) in each variable
    c = S.degenerate_constant(S.DegenerateSpec((2, 2), 0.5, hbar))
    assert c == pytest.approx(1 / hbar, rel=1e-12)
    # p^2/2 + q^2: y1 = p / sqrt(2), y2 = q
    c = S.degenerate_constant(S.DegenerateSpec((2, 2), 1 / math.sqrt(2), hbar))
    assert c == pytest.approx(1 / (math.sqrt(2) * hbar), rel=1e-12)


def test_degenerate_quadratic_reproduces_morse_order():
    for f in (1, 2, 3):
        spec = S.DegenerateSpec((2,) * (2 * f), 1.0, 1.0)
        assert S.classify_degenerate(spec).derivative_order == S.classify_nondegenerate(f, 0).derivative_order


def test_degenerate_density_curve():
    spec = S.DegenerateSpec((2, 4), 1 / math.sqrt(2), 1.0)
    curve, g, c4 = S.degenerate_density(spec, np.array([-1.0, 0.5, 2.0]))
    assert_allclose(curve, [0.0, c4 * 0.5**-0.25, c4 * 2**-0.25])


def test_degenerate_spec_validation():
    with pytest.raises(ValueError):
        S.DegenerateSpec((2, 3), 1.0, 1.0)
    with pytest.raises(ValueError):
        S.DegenerateSpec((2,), 1.0, 1.0)
    with pytest.raises(ValueError):
        S.DegenerateSpec((2, 2), 0.0, 1.0)


# ------------------------------------------------------------ detection


def _curve(values, E, k, window):
    c = DensityCurve(E, values)
    return smooth_derivative(c, k, window)


E = np.linspace(-1, 1, 2001)


def test_detects_jump_over_cubic():
    v = 0.3 + 0.2 * E - 0.5 * E**3 + S.irregular_density_r0(1, 1.0, 1.0, E)
    rep = S.detect_defect(_curve(v, E, 0, 0.01), 0.0, 1, 0.05)
    assert rep.detected and (rep.kind, rep.sign, rep.order) == (S.JUMP, S.UP, 0)
    assert rep.amplitude == pytest.approx(1.0, rel=0.02)


@pytest.mark.parametrize("sgn,expected", [(-1.0, S.UP), (1.0, S.DOWN)])
def test_detects_log_with_noise(sgn, expected):
    rng = np.random.default_rng(0)
    with np.errstate(divide="ignore"):
        v = sgn * np.log(np.abs(E))
    v[~np.isfinite(v)] = sgn * np.log(1e-3)
    v = v * (1 + 0.01 * rng.standard_normal(E.size))
    rep = S.detect_defect(_curve(v, E, 0, 0.01), 0.0, 1, 0.05)
    assert rep.detected and (rep.kind, rep.sign) == (S.LOG, expected)


def test_detects_third_order_jump_in_second_derivative():
    v = np.where(E > 0, E**2, 0.0) * 0.5 + 0.1 * E
    rep = S.detect_defect(_curve(v, E, 2, 0.01), 0.0, 3, 0.05)
    assert (rep.kind, rep.sign, rep.order) == (S.JUMP, S.UP, 2)


@pytest.mark.parametrize("kind", [S.SQRT_RIGHT, S.SQRT_LEFT])
def test_half_integer_detection(kind):
    v = 1.0 + 0.3 * E + S.density_shape(kind, 1, E, cell=E[1] - E[0])
    rep = S.detect_defect(_curve(v, E, 1, 0.01), 0.0, 1.5, 0.05)
    assert (rep.kind, rep.sign, rep.order) == (kind, S.UP, 1)


def test_smooth_curve_no_defect():
    rng = np.random.default_rng(4)
    v = 1 + E + 0.3 * E**2 + 1e-3 * rng.standard_normal(E.size)
    rep = S.detect_defect(_curve(v, E, 0, 0.01), 0.0, 1, 0.05)
    assert not rep.detected and rep.kind is None


def test_nearby_energies_merged_and_neighbours_fitted():
    v = S.irregular_density_r0(1, 1.0, 1.0, E) + S.irregular_density_r0(1, 1.0, 1.0, E - 0.002)
    v = v - 0.7 * S.irregular_density_r0(1, 1.0, 1.0, E - 0.06)
    c = _curve(v, E, 0, 0.01)
    rep = S.detect_defect(c, 0.0, 1, 0.05, neighbours=[0.002, 0.06])
    assert rep.cluster == [0.0, 0.002]
    assert rep.amplitude == pytest.approx(1.0, rel=0.02)  # per member
    rep = S.detect_defect(c, 0.06, 1, 0.05, neighbours=[0.0, 0.002])
    assert (rep.kind, rep.sign) == (S.JUMP, S.DOWN)


def test_detection_needs_derivatives():
    with pytest.raises(ValueError):
        S.detect_defect(DensityCurve(E, E), 0.0, 1, 0.05)


def test_one_sided_curve_refused():
    c = _curve(1 + E, E, 0, 0.01)
    c.derivatives[0][E < 0] = np.nan
    with pytest.raises(ValueError, match="one side"):
        S.detect_defect(c, 0.0, 1, 0.05)


def test_report_json():
    v = S.irregular_density_r0(1, 1.0, 1.0, E)
    rep = S.detect_defect(_curve(v, E, 0, 0.01), 0.0, 1, 0.05, r_predicted=0)
    d = json.loads(S.reports_to_json([rep]))[0]
    assert {"E_w", "r_predicted", "kind", "sign", "amplitude", "residuals"} <= set(d)
    assert S.matches(rep, S.classify_nondegenerate(1, 0))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-0.5, 0.5))
def test_fit_recovers_planted_jump(height, slope):
    d = np.linspace(-0.1, 0.1, 401)
    v = 2.0 + slope * d + height * (d >= 0)
    c, se = S.fit_defect_amplitude(d, v, S.JUMP, 0, degree=2)
    assert c == pytest.approx(height, rel=1e-8)
