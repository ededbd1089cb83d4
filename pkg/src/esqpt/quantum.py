"""Quantum spectra of separable ``p^2/2 + V(q)`` Hamiltonians.

One-dimensional blocks are diagonalised in a harmonic-oscillator basis, the
multi-dimensional spectrum is assembled from sums of block levels below a
cutoff, and Hellmann-Feynman slopes follow from eigenvector expectation
values of ``dV/dlambda``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import eigh

from .hamiltonian import HamiltonianSpec
from .kernels import pair_sums
from .semiclassics import RAW, DensityCurve

DEFAULT_OMEGA = 2.0
CONVERGENCE_RTOL = 1e-8


@dataclass
class Spectrum1D:
    """Levels of one block; only the first ``converged_count`` are trusted."""

    hbar: float
    eigenvalues: np.ndarray
    basis_size: int
    position_expectations: np.ndarray
    converged_count: int
    omega: float = DEFAULT_OMEGA
    slopes: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def converged(self) -> np.ndarray:
        return self.eigenvalues[: self.converged_count]

    @property
    def top(self) -> float:
        """Highest trusted level."""
        return float(self.eigenvalues[self.converged_count - 1]) if self.converged_count else -np.inf


@dataclass
class SpectrumND:
    """Sums of block levels below ``cutoff``, sorted ascending.

    ``indices[l, b]`` is the level of block ``b`` used by combined level ``l``.
    """

    components: list[Spectrum1D]
    energies: np.ndarray
    indices: np.ndarray
    cutoff: float

    @property
    def dof(self) -> int:
        return len(self.components)

    @property
    def hbar(self) -> float:
        return self.components[0].hbar

    def count_below(self, E) -> np.ndarray:
        return np.searchsorted(self.energies, E, side="right")


def _ladder(m: int) -> np.ndarray:
    """Lowering operator in an ``m``-state oscillator basis."""
    return np.diag(np.sqrt(np.arange(1, m, dtype=float)), 1)


def _matrices(n: int, hbar: float, omega: float, degree: int):
    pad = n + degree + 2
    a = _ladder(pad)
    x = math.sqrt(hbar / (2.0 * omega)) * (a + a.T)
    # p^2 = (hbar omega / 2) (2 a^dag a + 1 - a^2 - a^dag^2)
    p2 = 0.5 * hbar * omega * (2.0 * a.T @ a + np.eye(pad) - a @ a - a.T @ a.T)
    powers = [np.eye(pad)]
    for _ in range(degree):
        powers.append(powers[-1] @ x)
    return p2[:n, :n], [p[:n, :n] for p in powers]


def _poly_matrix(coeffs: Sequence[float], powers) -> np.ndarray:
    out = np.zeros_like(powers[0])
    for k, c in enumerate(coeffs):
        if c:
            out = out + c * powers[k]
    return out


def _diagonalise(coeffs, hbar, n, omega, derivatives):
    degree = max(len(coeffs) - 1, max((len(d) - 1 for d in derivatives.values()), default=0), 1)
    p2, powers = _matrices(n, hbar, omega, degree)
    H = 0.5 * p2 + _poly_matrix(coeffs, powers)
    e, v = eigh(H)
    xexp = np.einsum("ij,ik,kj->j", v, powers[1], v)
    slopes = {name: np.einsum("ij,ik,kj->j", v, _poly_matrix(d, powers), v)
              for name, d in derivatives.items()}
    return e, xexp, slopes


def optimal_frequency(coeffs: Sequence[float], hbar: float,
                      grid: Sequence[float] = (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0),
                      basis_size: int = 24, criterion: str = "ground_state") -> float:
    """Pick a basis frequency from ``grid``.

    ``criterion="ground_state"`` minimises the variational ground state in a
    ``basis_size`` basis. ``criterion="converged"`` maximises the highest
    converged level at that basis size, which matters when many excited
    levels are needed. Ties go to the frequency nearest the default.
    """
    if criterion == "ground_state":
        def score(w):
            return (_diagonalise(coeffs, hbar, basis_size, w, {})[0][0], abs(w - DEFAULT_OMEGA))
    elif criterion == "converged":
        def score(w):
            return (-solve_1d(coeffs, hbar, basis_size, w).top, abs(w - DEFAULT_OMEGA))
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    return float(min(grid, key=score))


def solve_1d(
    potential: Sequence[float],
    hbar: float,
    basis_size: int,
    omega: float | str = DEFAULT_OMEGA,
    *,
    derivatives: Mapping[str, Sequence[float]] | None = None,
) -> Spectrum1D:
    """Levels of ``p^2/2 + sum_k potential[k] q^k``.

    Parameters
    ----------
    potential : sequence of float
        Polynomial coefficients of ``V(q)`` by ascending power.
    hbar : float
    basis_size : int
        Number of oscillator states, at least 16.
    omega : float, "auto" or "widest"
        Basis frequency. ``"auto"`` picks the grid value minimising the
        ground-state energy in a small basis; ``"widest"`` picks the one
        converging the highest level at this basis size.
    derivatives : mapping, optional
        ``name -> coefficients of dV/dname``; their eigenstate expectation
        values are stored as Hellmann-Feynman slopes.

    Returns
    -------
    Spectrum1D
        ``converged_count`` counts the leading levels that move by less than
        ``1e-8`` relative when the basis grows by half.
    """
    if basis_size < 16:
        raise ValueError("basis_size must be at least 16")
    potential = list(potential)
    while len(potential) > 1 and potential[-1] == 0:
        potential.pop()
    if len(potential) < 3 or potential[-1] <= 0 or (len(potential) - 1) % 2:
        raise ValueError("potential must be confining: even leading power, positive coefficient")
    derivatives = dict(derivatives or {})
    if omega == "auto":
        omega = optimal_frequency(potential, hbar)
    elif omega == "widest":
        omega = optimal_frequency(potential, hbar, basis_size=basis_size, criterion="converged")
    omega = float(omega)
    e, xexp, slopes = _diagonalise(potential, hbar, basis_size, omega, derivatives)
    big = int(math.ceil(1.5 * basis_size))
    e2, _, _ = _diagonalise(potential, hbar, big, omega, {})
    scale = np.maximum(np.abs(e), 1.0)
    stable = np.abs(e - e2[:basis_size]) <= CONVERGENCE_RTOL * scale
    count = basis_size if stable.all() else int(np.argmin(stable))
    return Spectrum1D(hbar, e, basis_size, xexp, count, omega, slopes)


def block_potential(block: HamiltonianSpec) -> tuple[list[float], dict[str, list[float]]]:
    """Split a two-variable block ``p^2/2 + V(q)`` into potential coefficients
    and parameter derivatives."""
    if block.nvars != 2:
        raise ValueError("quantum blocks must have exactly one (p, q) pair")
    coeffs: dict[int, float] = {}
    derivs: dict[str, dict[int, float]] = {}
    kinetic = 0.0
    for t in block.terms:
        ep, eq = t.exps
        if ep == 2 and eq == 0 and t.param is None:
            kinetic += t.coef
            continue
        if ep != 0:
            raise ValueError("only p^2/2 kinetic terms are supported in quantum blocks")
        val = t.coef * (block.parameters[t.param] if t.param else 1.0)
        coeffs[eq] = coeffs.get(eq, 0.0) + val
        if t.param:
            d = derivs.setdefault(t.param, {})
            d[eq] = d.get(eq, 0.0) + t.coef
    if not math.isclose(kinetic, 0.5):
        raise ValueError("kinetic term must be p^2/2")
    deg = max(coeffs, default=0)
    pot = [coeffs.get(k, 0.0) for k in range(deg + 1)]
    out = {n: [d.get(k, 0.0) for k in range(max(d) + 1)] for n, d in derivs.items()}
    return pot, out


def solve_blocks(h: HamiltonianSpec, hbar: float, basis_size: int,
                 omega: float | str = DEFAULT_OMEGA) -> list[Spectrum1D]:
    if h.separable_blocks is not None:
        blocks = [h.block(k) for k in range(len(h.separable_blocks))]
    elif h.nvars == 2:
        blocks = [h]
    else:
        raise ValueError("quantum solves need a separable spec")
    out = []
    for b in blocks:
        pot, der = block_potential(b)
        out.append(solve_1d(pot, hbar, basis_size, omega, derivatives=der))
    return out


def combine(spectra: Sequence[Spectrum1D], cutoff: float, jit: bool | None = None) -> SpectrumND:
    """All sums of converged block levels not exceeding ``cutoff``.

    Raises
    ------
    ValueError
        If some block would need levels above its converged range.
    """
    spectra = list(spectra)
    if not spectra:
        raise ValueError("no spectra to combine")
    for k, s in enumerate(spectra):
        if s.converged_count == 0:
            raise ValueError(f"block {k} has no converged levels; enlarge the basis")
    lows = [float(s.converged[0]) for s in spectra]
    total_low = sum(lows)
    for k, s in enumerate(spectra):
        need = cutoff - (total_low - lows[k])
        if need > s.top:
            raise ValueError(
                f"cutoff {cutoff} needs block {k} levels up to {need:.4g}, "
                f"above its converged range {s.top:.4g}"
            )
    energies = spectra[0].converged.copy()
    idx = np.arange(energies.size, dtype=np.int64)[:, None]
    for k in range(1, len(spectra)):
        remaining = sum(lows[k + 1:])
        sums, i, j = pair_sums(energies, spectra[k].converged, cutoff - remaining, jit=jit)
        order = np.argsort(sums, kind="stable")
        energies = sums[order]
        idx = np.column_stack([idx[i[order]], j[order]])
    keep = energies <= cutoff
    return SpectrumND(spectra, energies[keep], idx[keep], float(cutoff))


def histogram_density(s: SpectrumND, bins: int, range: tuple[float, float]) -> DensityCurve:
    """Counts per bin over bin width, with Poisson errors."""
    lo, hi = range
    if bins < 10:
        raise ValueError("need at least 10 bins")
    if not hi > lo:
        raise ValueError("empty energy range")
    counts, edges = np.histogram(s.energies, bins=bins, range=(lo, hi))
    w = edges[1] - edges[0]
    centres = 0.5 * (edges[1:] + edges[:-1])
    return DensityCurve(centres, counts / w, s.hbar, s.dof, RAW, np.sqrt(counts) / w)


def hf_slopes(s: SpectrumND, parameter: str) -> np.ndarray:
    """Hellmann-Feynman slopes ``dE_l/dparameter`` of the combined levels."""
    total = np.zeros(s.energies.size)
    found = False
    for b, comp in enumerate(s.components):
        if parameter in comp.slopes:
            total += comp.slopes[parameter][s.indices[:, b]]
            found = True
    if not found:
        raise KeyError(f"no block depends linearly on {parameter!r}")
    return total


def numerical_slopes(
    solve: Callable[[float], Spectrum1D], lam: float, dlam: float = 1e-4
) -> tuple[np.ndarray, int]:
    """Centred difference of 1D levels; returns slopes and the trusted count."""
    lo, hi = solve(lam - dlam), solve(lam + dlam)
    n = min(lo.converged_count, hi.converged_count)
    return (hi.eigenvalues[:n] - lo.eigenvalues[:n]) / (2.0 * dlam), n


def spectrum_table(s: SpectrumND, slopes: np.ndarray | None = None) -> np.ndarray:
    """Rows ``(index, energy, slope)`` for CSV export."""
    sl = np.full(s.energies.size, np.nan) if slopes is None else slopes
    return np.column_stack([np.arange(s.energies.size), s.energies, sl])
