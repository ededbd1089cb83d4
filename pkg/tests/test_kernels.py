import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from esqpt import _accel, cuspmodel
from esqpt.kernels import level_sums, mc_score, pair_sums


def _mc_inputs(n=50_000):
    rng = np.random.default_rng(1)
    h = cuspmodel.cusp_1d(0.25)
    coef, exps = h.coefficient_arrays()
    dcoef, dexps = h.parameter_derivative("A")
    grid = np.linspace(-1.3, 1.0, 231)
    return (rng.random((n, 2)), np.array([-2.5, -2.5]), np.array([5.0, 5.0]), coef, exps,
            dcoef, dexps, -1.3, 1.0 / (grid[1] - grid[0]), grid.size - 1, 1.0, 1e-3)


def test_mc_score_paths_agree():
    a = mc_score(*_mc_inputs(), jit=True)
    b = mc_score(*_mc_inputs(), jit=False)
    assert_array_equal(a[0], b[0])
    assert_array_equal(a[3], b[3])
    assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-10)
    assert a[2] == pytest.approx(b[2], rel=1e-10, abs=1e-10)


def test_mc_score_tallies_account_for_all_samples():
    counts, _, _, tallies = mc_score(*_mc_inputs())
    assert counts.sum() + tallies[0] + tallies[1] == 50_000


def test_level_sums_paths_agree():
    rng = np.random.default_rng(2)
    lv = np.sort(rng.uniform(0, 5, 3000))
    w, s = rng.uniform(1, 2, lv.size), rng.normal(size=lv.size)
    grid = np.linspace(-1, 6, 300)
    a = level_sums(lv, w, s, grid, 0.05, jit=True)
    b = level_sums(lv, w, s, grid, 0.05, jit=False)
    assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-12)
    assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-10)


def test_level_sums_normalised_and_unsorted_input():
    lv = np.array([0.5, -0.5])
    grid = np.linspace(-3, 3, 6001)
    rho, cur = level_sums(lv, np.ones(2), np.array([2.0, 4.0]), grid, 0.1)
    assert np.trapezoid(rho, grid) == pytest.approx(2.0, rel=1e-9)
    assert np.trapezoid(cur, grid) == pytest.approx(6.0, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40),
       st.lists(st.floats(-5, 5), min_size=1, max_size=40),
       st.floats(-10, 10))
def test_pair_sums_paths_agree(a, b, cut):
    a, b = np.sort(a), np.sort(b)
    r1 = pair_sums(a, b, cut, jit=True)
    r2 = pair_sums(a, b, cut, jit=False)
    for x, y in zip(r1, r2):
        assert_array_equal(x, y)
    brute = sorted(x + y for x in a for y in b if x + y <= cut)
    assert_allclose(np.sort(r1[0]), brute)


def test_pair_sums_empty():
    s, i, j = pair_sums(np.array([]), np.array([1.0]), 3.0)
    assert s.size == i.size == j.size == 0


def test_disable_flag_selects_numpy_path():
    code = "from esqpt import _accel; print(_accel.USE_JIT)"
    env = dict(os.environ, ESQPT_DISABLE_JIT="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "False"
    if _accel.HAS_NUMBA and _accel.JIT_REQUESTED:
        assert _accel.USE_JIT


def test_numpy_path_reproduces_volume_under_flag():
    code = (
        "import numpy as np; from esqpt import semiclassics as sc; "
        "from esqpt.hamiltonian import harmonic; "
        "v = sc.volume_mc(harmonic(1), np.array([[-2., 2.], [-2., 2.]]), "
        "np.linspace(0, 1, 11), 100000, 7); print(repr(v.volumes.tolist()))"
    )
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, ESQPT_DISABLE_JIT=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    assert outs[0] == outs[1]
