"""Time the numba and numpy paths of the hot kernels on identical inputs.

Run ``python benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
called once on both paths to warm up (and compile), outputs are checked for
agreement, then the best of ``repeat`` timings is reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from esqpt import _accel, cuspmodel
from esqpt.kernels import level_sums, mc_score, pair_sums


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(n_mc=1 << 20, n_levels=60000, n_grid=2000):
    rng = np.random.default_rng(0)
    h = cuspmodel.cusp_1d(0.25)
    coef, exps = h.coefficient_arrays()
    dcoef, dexps = h.parameter_derivative("A")
    u = rng.random((n_mc, 2))
    lo = np.array([-2.5, -2.5])
    width = np.array([5.0, 5.0])
    grid_e = np.linspace(-1.3, 1.0, 2001)
    mc_args = (u, lo, width, coef, exps, dcoef, dexps, -1.3, 1.0 / (grid_e[1] - grid_e[0]),
               grid_e.size - 1, 1.0, 1e-3)
    levels = np.sort(rng.uniform(-4.5, 1.5, n_levels))
    slopes = rng.normal(size=n_levels)
    grid = np.linspace(-4.5, 1.0, n_grid)
    ls_args = (levels, np.ones(n_levels), slopes, grid, 0.05)
    a = np.sort(rng.uniform(-1.3, 3.0, 400))
    b = np.sort(rng.uniform(-1.3, 3.0, 400))
    ps_args = (a, b, 1.5)
    return {"mc_score": (mc_score, mc_args), "level_sums": (level_sums, ls_args),
            "pair_sums": (pair_sums, ps_args)}


def _close(x, y):
    if isinstance(x, tuple):
        return all(_close(a, b) for a, b in zip(x, y))
    return np.allclose(np.asarray(x, dtype=float), np.asarray(y, dtype=float), rtol=1e-9, atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.HAS_NUMBA:
        print("numba not installed; only the numpy path is available")
    print(f"{'kernel':<12} {'numpy [ms]':>11} {'numba [ms]':>11} {'speed-up':>9} agree")
    for name, (fn, a) in cases().items():
        ref = fn(*a, jit=False)
        t_np = _best(lambda: fn(*a, jit=False), args.repeat)
        if _accel.HAS_NUMBA:
            out = fn(*a, jit=True)
            t_jit = _best(lambda: fn(*a, jit=True), args.repeat)
            print(f"{name:<12} {1e3 * t_np:11.2f} {1e3 * t_jit:11.2f} {t_np / t_jit:9.1f} "
                  f"{_close(ref, out)}")
        else:
            print(f"{name:<12} {1e3 * t_np:11.2f} {'-':>11} {'-':>9} -")


if __name__ == "__main__":
    main()
