"""Spectral flow rate: the velocity field of the level density.

Two routes give the same field. The slope average weights each level's
``dE_l/dlambda`` with the smoothing kernel; the continuity route integrates
``-d rho/d lambda`` in energy from an anchor point. ``verify_continuity``
checks the k-times energy-differentiated continuity equation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import level_sums

SLOPE_AVERAGE = "slope_average"
CONTINUITY = "continuity_integral"
FLOOR_REL = 1e-6


@dataclass
class FlowField:
    """Flow rate and density on a ``lambda x E`` grid (rows are lambdas)."""

    lambda_grid: np.ndarray
    energy_grid: np.ndarray
    phi: np.ndarray
    rho: np.ndarray
    method: str
    smoothing_width: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lambda_grid = np.atleast_1d(np.asarray(self.lambda_grid, dtype=float))
        self.energy_grid = np.asarray(self.energy_grid, dtype=float)
        shape = (self.lambda_grid.size, self.energy_grid.size)
        self.phi = np.asarray(self.phi, dtype=float).reshape(shape)
        self.rho = np.asarray(self.rho, dtype=float).reshape(shape)

    @property
    def centre(self) -> int:
        return self.lambda_grid.size // 2

    def row(self, i: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        i = self.centre if i is None else i
        return self.rho[i], self.phi[i]

    def to_rows(self) -> np.ndarray:
        """``(lambda, E, rho, phi)`` rows for CSV export."""
        L, E = np.meshgrid(self.lambda_grid, self.energy_grid, indexing="ij")
        return np.column_stack([L.ravel(), E.ravel(), self.rho.ravel(), self.phi.ravel()])


def _positive(rho: np.ndarray, floor_rel: float) -> np.ndarray:
    return rho > floor_rel * np.max(rho) if np.max(rho) > 0 else np.zeros(rho.shape, bool)


def flow_slope_average(
    levels: Sequence[np.ndarray] | np.ndarray,
    slopes: Sequence[np.ndarray] | np.ndarray,
    width: float,
    grid,
    *,
    lambdas: Sequence[float] | None = None,
    weights: Sequence[np.ndarray] | None = None,
    floor_rel: float = FLOOR_REL,
    jit: bool | None = None,
) -> FlowField:
    """Kernel-weighted mean slope of the levels at each grid energy.

    Parameters
    ----------
    levels, slopes : array or list of arrays
        Levels ``E_l`` and slopes ``dE_l/dlambda``; a list gives one row per
        lambda value.
    width : float
        Standard deviation of the Gaussian smoothing kernel.
    grid : array_like
        Energies at which the field is evaluated.
    weights : list of arrays, optional
        Per-level weights (e.g. degeneracies); ones by default.

    Returns
    -------
    FlowField
        ``phi`` is NaN where the smoothed density falls below
        ``floor_rel * max(rho)``.
    """
    grid = np.asarray(grid, dtype=float)
    if isinstance(levels, np.ndarray) and levels.ndim == 1:
        levels, slopes = [levels], [slopes]
        weights = None if weights is None else [weights]
    lambdas = np.zeros(len(levels)) if lambdas is None else np.asarray(lambdas, dtype=float)
    rho_rows, phi_rows = [], []
    for i, (lv, sl) in enumerate(zip(levels, slopes)):
        lv = np.asarray(lv, dtype=float)
        w = np.ones_like(lv) if weights is None else np.asarray(weights[i], dtype=float)
        rho, cur = level_sums(lv, w, np.asarray(sl, dtype=float), grid, width, jit=jit)
        ok = _positive(rho, floor_rel)
        phi = np.full_like(rho, np.nan)
        phi[ok] = cur[ok] / rho[ok]
        rho_rows.append(rho)
        phi_rows.append(phi)
    return FlowField(lambdas, grid, np.array(phi_rows), np.array(rho_rows), SLOPE_AVERAGE, width)


def default_anchor(grid: np.ndarray, rho: np.ndarray, stationary: Sequence[float], window: float,
                   floor_rel: float = FLOOR_REL) -> int:
    """Lowest grid index with rho above floor and farther than ``window``
    from every stationary energy."""
    ok = _positive(rho, floor_rel)
    for i in np.nonzero(ok)[0]:
        if all(abs(grid[i] - e) > window for e in stationary):
            return int(i)
    raise ValueError("no admissible anchor energy on the grid")


def _cumtrapz_from(y: np.ndarray, x: np.ndarray, i0: int) -> np.ndarray:
    seg = 0.5 * (y[1:] + y[:-1]) * np.diff(x)
    c = np.concatenate(([0.0], np.cumsum(seg)))
    return c - c[i0]


def flow_continuity_integral(
    rho_stencil: np.ndarray,
    dlam: float,
    grid,
    anchor: tuple[int, float],
    *,
    lam: float = 0.0,
    width: float = float("nan"),
    floor_rel: float = FLOOR_REL,
) -> FlowField:
    """Flow rate at the centre of a three-point lambda stencil from continuity.

    ``phi(E) = [rho(E0) phi0 - int_{E0}^{E} d rho/d lambda dE'] / rho(E)``.

    Parameters
    ----------
    rho_stencil : array, shape (3, n)
        Smoothed density at ``lam - dlam``, ``lam``, ``lam + dlam``.
    dlam : float
    grid : array_like
    anchor : (index, phi0)
        Grid index of ``E0`` and the known flow rate there.
    """
    grid = np.asarray(grid, dtype=float)
    rs = np.asarray(rho_stencil, dtype=float)
    if rs.shape != (3, grid.size):
        raise ValueError("rho_stencil must have shape (3, len(grid))")
    i0, phi0 = anchor
    rho = rs[1]
    drho = (rs[2] - rs[0]) / (2.0 * dlam)
    flux = rho[i0] * phi0 - _cumtrapz_from(drho, grid, i0)
    ok = _positive(rho, floor_rel)
    if not ok[i0]:
        raise ValueError("anchor lies where the density is below the floor")
    # the path from the anchor must stay above the floor
    lo = i0
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = i0
    while hi < grid.size - 1 and ok[hi + 1]:
        hi += 1
    if lo > 0 or hi < grid.size - 1:
        if np.any(ok[:lo]) or np.any(ok[hi + 1:]):
            warnings.warn("density crosses the positivity floor along the integration path",
                          RuntimeWarning, stacklevel=2)
    phi = np.full_like(rho, np.nan)
    phi[lo:hi + 1] = flux[lo:hi + 1] / rho[lo:hi + 1]
    lam_grid = np.array([lam])
    return FlowField(lam_grid, grid, phi[None, :], rho[None, :], CONTINUITY, width,
                     meta={"anchor_energy": float(grid[i0]), "anchor_phi": float(phi0)})


@dataclass
class ContinuityReport:
    order: int
    max_residual: float
    l2_residual: float
    scale: float
    residual: np.ndarray = field(repr=False)

    @property
    def relative_max(self) -> float:
        return self.max_residual / self.scale if self.scale > 0 else math.inf

    @property
    def relative_l2(self) -> float:
        return self.l2_residual / self.scale if self.scale > 0 else math.inf

    def to_json(self) -> dict:
        return {"k": self.order, "max_residual": self.max_residual, "l2_residual": self.l2_residual,
                "scale": self.scale, "relative_max": self.relative_max,
                "relative_l2": self.relative_l2}


def _energy_derivs(y: np.ndarray, E: np.ndarray, n: int) -> list[np.ndarray]:
    out = [y]
    for _ in range(n):
        out.append(np.gradient(out[-1], E))
    return out


def verify_continuity(
    rho_stencil: np.ndarray,
    phi: np.ndarray,
    dlam: float,
    grid,
    k: int = 0,
    mask: np.ndarray | None = None,
) -> ContinuityReport:
    """Residual of the k-times energy-differentiated continuity equation.

    Evaluates ``d/dlambda d^k rho + sum_j C(k+1, j) d^j rho d^(k+1-j) phi``
    at the stencil centre. The scale is the largest absolute value of any
    individual term over the checked region.

    Parameters
    ----------
    rho_stencil : array, shape (3, n)
        Density at ``lambda - dlam, lambda, lambda + dlam``.
    phi : array, shape (n,)
        Flow rate at the centre.
    mask : bool array, optional
        Grid points to include (e.g. away from critical lines).
    """
    E = np.asarray(grid, dtype=float)
    rs = np.asarray(rho_stencil, dtype=float)
    if rs.shape != (3, E.size) or np.shape(phi) != (E.size,):
        raise ValueError("need a 3-row density stencil and a matching flow rate")
    if k < 0:
        raise ValueError("k must be non-negative")
    dr = _energy_derivs(rs[1], E, k + 1)
    dp = _energy_derivs(np.asarray(phi, dtype=float), E, k + 1)
    lam_term = (_energy_derivs(rs[2], E, k)[k] - _energy_derivs(rs[0], E, k)[k]) / (2.0 * dlam)
    terms = [lam_term] + [math.comb(k + 1, j) * dr[j] * dp[k + 1 - j] for j in range(k + 2)]
    res = sum(terms)
    m = np.isfinite(res) if mask is None else (mask & np.isfinite(res))
    if not np.any(m):
        raise ValueError("no valid grid points to check")
    scale = max(float(np.max(np.abs(t[m]))) for t in terms)
    return ContinuityReport(k, float(np.max(np.abs(res[m]))),
                            float(np.sqrt(np.mean(res[m] ** 2))), scale, res)


def relative_l2(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """``||a - b|| / ||b||`` over finite, masked samples."""
    m = np.isfinite(a) & np.isfinite(b)
    if mask is not None:
        m &= mask
    return float(np.linalg.norm(a[m] - b[m]) / np.linalg.norm(b[m]))


def mass_change(rho_stencil: np.ndarray, grid) -> float:
    """Relative change of the integrated density across the stencil."""
    E = np.asarray(grid, dtype=float)
    tot = [np.trapezoid(r, E) if hasattr(np, "trapezoid") else np.trapz(r, E) for r in rho_stencil]
    return float((max(tot) - min(tot)) / tot[len(tot) // 2])


def critical_mask(grid, energies: Sequence[float], exclusion: float) -> np.ndarray:
    """True where the grid is farther than ``exclusion`` from all energies."""
    E = np.asarray(grid, dtype=float)
    m = np.ones(E.shape, bool)
    for e in energies:
        m &= np.abs(E - e) > exclusion
    return m


def classical_flow_curve(smoothed, floor_rel: float = FLOOR_REL, order: int | None = None):
    """Flow-rate curve ``phi = current / rho`` from a smoothed classical density.

    ``smoothed`` must carry ``derivatives[0]`` and ``current_derivatives[0]``
    (see ``semiclassics.smooth_derivative`` with a parameter-weighted curve).
    The returned curve holds ``phi`` and its energy derivatives in
    ``derivatives`` so it can be passed to ``singularity.detect_defect``.
    """
    from dataclasses import replace

    if 0 not in smoothed.derivatives or 0 not in smoothed.current_derivatives:
        raise ValueError("curve needs smoothed density and current")
    order = max(smoothed.derivatives) if order is None else order
    E = smoothed.energies
    rho = smoothed.derivatives[0]
    ok = _positive(rho, floor_rel)
    phi = np.full_like(rho, np.nan)
    phi[ok] = smoothed.current_derivatives[0][ok] / rho[ok]
    out = {0: phi}
    for k in range(1, order + 1):
        out[k] = np.gradient(out[k - 1], E)
    return replace(smoothed, values=phi, derivatives=out, current=None, current_derivatives={})
