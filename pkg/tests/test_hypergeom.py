import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from esqpt.hypergeom import hyp2f1


def _ref(a, b, c, z):
    return float(mpmath.hyp2f1(a, b, c, z))


@given(st.floats(-3, 3), st.floats(0.5, 4), st.floats(-5, 1))
def test_zero_upper_parameter_is_one(a, c, z):
    assert hyp2f1(a, 0.0, c, z) == 1.0


def _families():
    # parameters produced by the local shell integrals for 2f up to 8
    out = []
    for r in range(1, 8):
        for s in range(1, 8):
            out.append((r / 2, -s / 2, 1 + r / 2))
            out.append((1 - s / 2, 1.0, 1 + r / 2))
            out.append((1 - r / 2, 1.0, 1 + s / 2))
    return out


@pytest.mark.parametrize("a,b,c", _families())
def test_families_against_mpmath(a, b, c):
    z = np.array([-50.0, -3.0, -0.7, -0.3, 0.0, 0.2, 0.45, 0.6, 0.9, 0.99, 0.999999])
    got = hyp2f1(a, b, c, z)
    ref = np.array([_ref(a, b, c, zi) for zi in z])
    assert_allclose(got, ref, rtol=1e-12, atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(_families()), st.floats(-0.5, 0.5))
def test_small_argument_matches_direct_series(abc, z):
    a, b, c = abc
    total, term = 0.0, 1.0
    for n in range(400):
        total += term
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
    assert hyp2f1(a, b, c, z) == pytest.approx(total, rel=1e-10, abs=1e-12)


def test_terminating_polynomial():
    # 2F1(-2, b; c; z) = 1 - 2 b z / c + b (b + 1) z^2 / (c (c + 1))
    b, c, z = 1.5, 2.5, -7.0
    expect = 1 - 2 * b * z / c + b * (b + 1) * z**2 / (c * (c + 1))
    assert hyp2f1(-2.0, b, c, z) == pytest.approx(expect, rel=1e-14)


def test_value_at_one_gauss_sum():
    # c - a - b > 0: 2F1(a, b; c; 1) = G(c) G(c-a-b) / (G(c-a) G(c-b))
    from math import gamma
    a, b, c = 0.5, 1.0, 3.0
    expect = gamma(c) * gamma(c - a - b) / (gamma(c - a) * gamma(c - b))
    assert hyp2f1(a, b, c, 1.0) == pytest.approx(expect, rel=1e-12)


def test_scalar_and_array_shapes():
    assert np.ndim(hyp2f1(0.5, 1.0, 1.5, 0.3)) == 0
    assert hyp2f1(0.5, 1.0, 1.5, np.zeros((2, 3))).shape == (2, 3)
