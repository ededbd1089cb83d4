import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from esqpt import cuspmodel
from esqpt import semiclassics as sc
from esqpt.hamiltonian import harmonic, quartic_minimum

HARM = harmonic(1)


def harmonic_volume(samples=400_000, seed=1, grid=None, **kw):
    E = np.linspace(-0.5, 1.5, 81) if grid is None else grid
    box = np.array([[-1.8, 1.8], [-1.8, 1.8]])
    return sc.volume_mc(HARM, box, E, samples, seed, **kw)


# ------------------------------------------------------------ volume


def test_harmonic_disk_area():
    v = harmonic_volume()
    i = np.argmin(np.abs(v.energies - 1.0))
    assert abs(v.volumes[i] - 2 * math.pi) < 4 * v.mc_error[i]


def test_volume_zero_below_minimum():
    v = harmonic_volume()
    assert np.all(v.volumes[v.energies < 0] == 0)
    assert np.all(np.diff(v.volumes) >= 0)


def test_reproducible_for_fixed_seed():
    a = harmonic_volume(seed=3)
    b = harmonic_volume(seed=3)
    c = harmonic_volume(seed=3, threads=3)
    assert_array_equal(a.volumes, b.volumes)
    assert_array_equal(a.volumes, c.volumes)
    assert not np.array_equal(a.volumes, harmonic_volume(seed=4).volumes)


def test_jit_and_numpy_paths_agree():
    a = harmonic_volume(samples=100_000, jit=True)
    b = harmonic_volume(samples=100_000, jit=False)
    assert_array_equal(a.volumes, b.volumes)


def test_box_too_small_flagged():
    box = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    with pytest.warns(sc.BoxTooSmallWarning):
        v = sc.volume_mc(HARM, box, np.linspace(0, 1, 11), 100_000, 0)
    assert v.box_too_small
    with warnings.catch_warnings():
        warnings.simplefilter("error", sc.BoxTooSmallWarning)
        assert not harmonic_volume(samples=100_000).box_too_small


def test_volume_rejects_bad_grid_and_box():
    box = np.array([[-2, 2], [-2, 2]])
    with pytest.raises(ValueError):
        sc.volume_mc(HARM, box, np.array([0.0, 0.1, 0.3]), 1000, 0)
    with pytest.raises(ValueError):
        sc.volume_mc(HARM, box[:1], np.linspace(0, 1, 5), 1000, 0)


def test_weighted_volume_for_parameter():
    h = cuspmodel.cusp_1d(0.0)
    box = sc.sublevel_box(h, 1.0)
    v = sc.volume_mc(h, box, np.linspace(-1.2, 1.0, 45), 200_000, 2, parameter="A")
    assert v.weighted is not None
    # dH/dA = q is odd and the A=0 potential is even
    assert np.max(np.abs(v.weighted)) < 5 * np.max(v.mc_error)


def test_triple_cusp_volume_matches_convolution():
    h = cuspmodel.build()
    E = np.array([-3.2, -3.0])
    boxes = []
    mins = [sc.minimum_energy(h.block(k)) for k in range(3)]
    for k in range(3):
        boxes.append(sc.sublevel_box(h.block(k), -3.0 - (sum(mins) - mins[k])))
    box = np.array([boxes[k][j] for j in range(2) for k in range(3)])
    v = sc.volume_mc(h, box, E, 2_000_000, 5)
    curve = sc.separable_density(h, 1.0, -4.7, -3.0, 0.002, 2_000_000, 6,
                                 normalization=sc.SCALED)
    conv = sc.cumulative(curve)[-1]
    err = v.mc_error[-1] + 3 * curve.spacing * np.max(curve.values)
    assert abs(v.volumes[-1] - conv) < 3 * err


# ------------------------------------------------------------ densities


def test_harmonic_density_is_one_over_hbar():
    v = harmonic_volume(samples=2_000_000)
    for hbar in (1.0, 0.1):
        c = sc.density_from_volume(v, hbar)
        m = (c.energies > 0.1) & (c.energies < 1.4)
        assert_allclose(c.values[m], 1 / hbar, rtol=0.04)
        assert c.normalization == sc.RAW


def test_constant_volume_gives_zero_density():
    E = np.linspace(0, 1, 11)
    v = sc.VolumeCurve(E, np.full(11, 3.0), np.zeros(11), 1, 1000, 10.0, False)
    assert_allclose(sc.density_from_volume(v, 1.0).values, 0, atol=1e-12)


def test_decreasing_volume_warns():
    E = np.linspace(0, 1, 11)
    v = sc.VolumeCurve(E, np.linspace(5, 1, 11), np.full(11, 1e-3), 1, 1000, 10.0, False)
    with pytest.warns(RuntimeWarning, match="decreases"):
        sc.density_from_volume(v, 1.0)


def test_cell_centering():
    v = harmonic_volume()
    c = sc.density_from_volume(v, 1.0, centering="cells", normalization=sc.SCALED)
    assert c.energies.size == v.energies.size - 1
    assert_allclose(c.values * c.spacing, np.diff(v.volumes))
    with pytest.raises(ValueError):
        sc.density_from_volume(v, 1.0, centering="edges")


def test_scale_invariance():
    v = harmonic_volume()
    a = sc.density_from_volume(v, 0.3).as_scaled()
    b = sc.density_from_volume(v, 0.07).as_scaled()
    assert_allclose(a.values, b.values, rtol=1e-12)
    assert_allclose(a.as_raw().values * (2 * math.pi * 0.3), a.values, rtol=1e-12)


def test_integral_of_density_recovers_volume():
    v = harmonic_volume(samples=1_000_000)
    c = sc.density_from_volume(v, 0.2, centering="cells")
    total = np.sum(c.values) * c.spacing * (2 * math.pi * 0.2)
    assert total == pytest.approx(v.volumes[-1] - v.volumes[0], rel=1e-3)


def test_quartic_exponent():
    h = quartic_minimum()
    E = np.linspace(0, 1, 201)
    v = sc.volume_mc(h, sc.sublevel_box(h, 1.0), E, 2_000_000, 9)
    c = sc.density_from_volume(v, 1.0, centering="cells")
    m = c.energies > 0.05
    slope = np.polyfit(np.log(c.energies[m]), np.log(c.values[m]), 1)[0]
    assert slope == pytest.approx(-0.25, abs=0.03)


# ------------------------------------------------------------ convolution


def _step(lo, hi, h, start=0.0, value=1.0, dof=1):
    E = lo + h * np.arange(int(round((hi - lo) / h)) + 1)
    return sc.DensityCurve(E, np.where(E >= start, value, 0.0), 1.0, dof)


def test_delta_component_shifts_curve():
    h = 0.01
    base = _step(0, 2, h)
    base = sc.DensityCurve(base.energies, np.sin(base.energies) ** 2, 1.0, 1)
    delta = sc.DensityCurve(np.array([0.3, 0.31]), np.array([1 / h, 0.0]), 1.0, 1)
    out = sc.convolve_pair(base, delta)
    assert_allclose(out.energies[: base.energies.size], base.energies + 0.3, atol=1e-12)
    assert_allclose(out.values[: base.values.size], base.values, atol=1e-12)


def test_three_harmonic_blocks_give_quadratic():
    h = 0.001
    blocks = [_step(0, 1, h, start=0.0) for _ in range(3)]
    for b in blocks:
        b.values[0] = 0.5  # trapezoid weight at the onset
    out = sc.density_separable(blocks)
    assert out.dof == 3
    m = (out.energies > 0.1) & (out.energies < 0.9)
    assert_allclose(out.values[m], out.energies[m] ** 2 / 2, rtol=1e-2, atol=1e-5)


def test_mismatched_spacing_rejected():
    with pytest.raises(ValueError, match="spacing"):
        sc.convolve_pair(_step(0, 1, 0.01), _step(0, 1, 0.02))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=5, max_size=30),
       st.lists(st.floats(0, 1), min_size=5, max_size=30),
       st.lists(st.floats(0, 1), min_size=5, max_size=30))
def test_convolution_commutative_and_associative(a, b, c):
    h = 0.1
    A, B, C = (sc.DensityCurve(np.arange(len(x)) * h, np.array(x)) for x in (a, b, c))
    assert_allclose(sc.convolve_pair(A, B).values, sc.convolve_pair(B, A).values, atol=1e-12)
    left = sc.convolve_pair(sc.convolve_pair(A, B), C).values
    right = sc.convolve_pair(A, sc.convolve_pair(B, C)).values
    assert_allclose(left, right, atol=1e-6)


def test_separable_density_grid_and_harmonic_value():
    h = harmonic(2)
    c = sc.separable_density(h, 1.0, -0.3, 1.0, 0.005, 400_000, 3)
    assert c.energies[0] == pytest.approx(-0.3)
    assert_allclose(np.diff(c.energies), 0.005, atol=1e-12)
    m = c.energies < -0.01
    assert np.all(c.values[m] == 0)
    # two unit oscillators: rho = E / hbar^2
    m = (c.energies > 0.2) & (c.energies < 0.95)
    assert_allclose(c.values[m], c.energies[m], rtol=0.05)


# ------------------------------------------------------------ smoothing


def test_smoothing_constant_curve():
    E = np.linspace(0, 1, 501)
    c = sc.smooth_derivative(sc.DensityCurve(E, np.full(E.size, 2.5)), 3)
    for k in (1, 2, 3):
        assert_allclose(c.derivatives[k], 0, atol=1e-9)


def test_smoothing_quadratic_second_derivative():
    E = np.linspace(-1, 1, 4001)
    c = sc.smooth_derivative(sc.DensityCurve(E, E**2), 2, window=0.01)
    m = np.abs(E) < 0.8
    assert_allclose(c.derivatives[2][m], 2.0, atol=1e-3)


def test_smoothing_arguments():
    E = np.linspace(0, 1, 101)
    c = sc.DensityCurve(E, E)
    assert sc.smooth_derivative(c, 1).window == pytest.approx(0.1)
    with pytest.raises(ValueError):
        sc.smooth_derivative(c, 1, window=0.001)
    with pytest.raises(ValueError):
        sc.smooth_derivative(c, 5)


def test_sublevel_box_contains_set():
    box = sc.sublevel_box(HARM, 1.0)
    assert np.all(box[:, 0] < -math.sqrt(2)) and np.all(box[:, 1] > math.sqrt(2))
    assert np.all(box[:, 0] > -1.6)
