"""Phase-space volumes and smooth level densities.

The volume ``Omega(E)`` of the sublevel set ``{H <= E}`` is estimated by
uniform Monte Carlo sampling of a bounding box; every grid energy is scored
from the same sample stream. The smooth density is ``(2 pi hbar)^-f
dOmega/dE``. For separable Hamiltonians the density of the whole system is
the convolution of the block densities, which is far less noisy than a full
dimensional volume estimate at the same sample count.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .hamiltonian import HamiltonianSpec, evaluate
from .kernels import mc_score

DEFAULT_SHARDS = 100
DEFAULT_CHUNK = 1 << 20
RAW = "raw"
SCALED = "scaled"


class BoxTooSmallWarning(UserWarning):
    """Sublevel set may be clipped by the sampling box."""


@dataclass
class VolumeCurve:
    """Monte Carlo volume of ``{H <= E}`` on a uniform energy grid.

    ``weighted`` is the optional integral of ``dH/dlambda`` over the same
    sublevel sets, used for classical flow rates.
    """

    energies: np.ndarray
    volumes: np.ndarray
    mc_error: np.ndarray
    dof: float
    samples: int = 0
    box_volume: float = 0.0
    box_too_small: bool = False
    weighted: np.ndarray | None = None

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.volumes = np.asarray(self.volumes, dtype=float)
        self.mc_error = np.asarray(self.mc_error, dtype=float)
        if not (self.energies.shape == self.volumes.shape == self.mc_error.shape):
            raise ValueError("energies, volumes and mc_error must share a shape")

    @property
    def spacing(self) -> float:
        return float(self.energies[1] - self.energies[0])


@dataclass
class DensityCurve:
    """Density samples on an ascending energy grid.

    Parameters
    ----------
    energies : ndarray
    values : ndarray
        Density of states per unit energy (``normalization="raw"``) or the
        classical ``dOmega/dE`` (``normalization="scaled"``, i.e. the raw
        density times ``(2 pi hbar)^f``).
    derivatives : dict
        ``order -> samples`` of smoothed energy derivatives; order 0 is the
        smoothed density itself.
    window : float or None
        Gaussian width used to produce ``derivatives``.
    current : ndarray, optional
        ``rho * phi`` for classical flow rates: the density of
        ``dH/dlambda`` on the energy shell.
    """

    energies: np.ndarray
    values: np.ndarray
    hbar: float = 1.0
    dof: float = 1.0
    normalization: str = RAW
    mc_error: np.ndarray | None = None
    derivatives: dict[int, np.ndarray] = field(default_factory=dict)
    window: float | None = None
    current: np.ndarray | None = None
    current_derivatives: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        n = self.energies.shape[0]
        if self.values.shape != (n,):
            raise ValueError("values and energies differ in length")
        for arr in (self.mc_error, self.current, *self.derivatives.values()):
            if arr is not None and np.shape(arr) != (n,):
                raise ValueError("all stored arrays must share the grid length")
        if self.normalization not in (RAW, SCALED):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def spacing(self) -> float:
        return float(self.energies[1] - self.energies[0])

    def scale_factor(self) -> float:
        """Factor converting raw values to the scaled convention."""
        return (2.0 * math.pi * self.hbar) ** self.dof

    def as_scaled(self) -> "DensityCurve":
        if self.normalization == SCALED:
            return self
        k = self.scale_factor()
        return _rescaled(self, k, SCALED)

    def as_raw(self) -> "DensityCurve":
        if self.normalization == RAW:
            return self
        return _rescaled(self, 1.0 / self.scale_factor(), RAW)

    def slice(self, lo: float, hi: float) -> "DensityCurve":
        m = (self.energies >= lo) & (self.energies <= hi)

        def cut(a):
            return None if a is None else a[m]

        return replace(
            self,
            energies=self.energies[m],
            values=self.values[m],
            mc_error=cut(self.mc_error),
            derivatives={k: v[m] for k, v in self.derivatives.items()},
            current=cut(self.current),
            current_derivatives={k: v[m] for k, v in self.current_derivatives.items()},
        )


def _rescaled(c: DensityCurve, k: float, norm: str) -> DensityCurve:
    def sc(a):
        return None if a is None else a * k

    return replace(
        c,
        values=c.values * k,
        mc_error=sc(c.mc_error),
        derivatives={o: v * k for o, v in c.derivatives.items()},
        current=sc(c.current),
        current_derivatives={o: v * k for o, v in c.current_derivatives.items()},
        normalization=norm,
    )


# ---------------------------------------------------------------------------
# Monte Carlo volume
# ---------------------------------------------------------------------------


def _uniform_spacing(energies: np.ndarray) -> float:
    if energies.ndim != 1 or energies.size < 2:
        raise ValueError("energy grid needs at least two points")
    d = np.diff(energies)
    h = float(d.mean())
    if h <= 0 or not np.allclose(d, h, rtol=1e-9, atol=1e-12 * max(1.0, abs(h))):
        raise ValueError("energy grid must be uniform and ascending")
    return h


def _shard_sizes(samples: int, shards: int) -> list[int]:
    base, extra = divmod(int(samples), shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def volume_mc(
    h: HamiltonianSpec,
    box: Sequence[Sequence[float]],
    energies,
    samples: int,
    seed: int,
    *,
    parameter: str | None = None,
    shards: int = DEFAULT_SHARDS,
    chunk: int = DEFAULT_CHUNK,
    edge: float = 1e-3,
    threads: int = 1,
    jit: bool | None = None,
) -> VolumeCurve:
    """Monte Carlo estimate of the sublevel volume on a uniform grid.

    Parameters
    ----------
    h : HamiltonianSpec
    box : sequence of (low, high)
        Sampling box, one pair per variable.
    energies : array_like
        Uniform ascending grid; each point is scored from the same samples.
    samples : int
        Total number of uniform samples.
    seed : int
        Root seed; ``shards`` independent streams are spawned from it.
    parameter : str, optional
        Also accumulate the integral of ``dH/d(parameter)`` below each energy.
    edge : float
        Relative thickness of the boundary stratum used for the clipping check.

    Returns
    -------
    VolumeCurve
        Bit-reproducible for fixed ``seed``, ``samples`` and ``shards``.
    """
    energies = np.asarray(energies, dtype=float)
    hstep = _uniform_spacing(energies)
    box = np.asarray(box, dtype=float)
    if box.shape != (h.nvars, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError(f"box must be {h.nvars} non-empty (low, high) pairs")
    lo = np.ascontiguousarray(box[:, 0])
    width = np.ascontiguousarray(box[:, 1] - box[:, 0])
    vol = float(np.prod(width))
    coef, exps = h.coefficient_arrays()
    if parameter is not None:
        dcoef, dexps = h.parameter_derivative(parameter)
    else:
        dcoef, dexps = np.zeros(0), np.zeros((0, h.nvars), dtype=np.int64)
    nbins = energies.size - 1
    e_lo = float(energies[0])
    emax = float(energies[-1])
    children = np.random.SeedSequence(seed).spawn(shards)
    sizes = _shard_sizes(samples, shards)

    def run_shard(i):
        rng = np.random.Generator(np.random.PCG64(children[i]))
        counts = np.zeros(nbins, dtype=np.int64)
        ssum = np.zeros(nbins)
        under_s = 0.0
        tallies = np.zeros(3, dtype=np.int64)
        left = sizes[i]
        while left > 0:
            n = min(chunk, left)
            u = rng.random((n, h.nvars))
            c, s, us, t = mc_score(u, lo, width, coef, exps, dcoef, dexps, e_lo,
                                   1.0 / hstep, nbins, emax, edge, jit=jit)
            counts += c
            ssum += s
            under_s += us
            tallies += t
            left -= n
        return counts, ssum, under_s, tallies

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_shard, range(shards)))
    else:
        results = [run_shard(i) for i in range(shards)]

    counts = np.zeros(nbins, dtype=np.int64)
    ssum = np.zeros(nbins)
    under = 0
    under_s = 0.0
    edge_hits = 0
    for c, s, us, t in results:  # fixed merge order keeps results reproducible
        counts += c
        ssum += s
        under += int(t[0])
        under_s += us
        edge_hits += int(t[2])

    n_total = int(samples)
    below = under + np.concatenate(([0], np.cumsum(counts)))
    frac = below / n_total
    volumes = vol * frac
    err = vol * np.sqrt(frac * (1.0 - frac) / n_total)
    weighted = None
    if parameter is not None:
        weighted = vol / n_total * (under_s + np.concatenate(([0.0], np.cumsum(ssum))))
    too_small = edge_hits > 0
    if too_small:
        warnings.warn(
            f"{edge_hits} samples with H <= {emax:g} lie in the boundary stratum; "
            "the box may clip the sublevel set",
            BoxTooSmallWarning,
            stacklevel=2,
        )
    return VolumeCurve(energies, volumes, err, h.dof, n_total, vol, too_small, weighted)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def density_from_volume(
    v: VolumeCurve, hbar: float, *, centering: str = "points", normalization: str = RAW
) -> DensityCurve:
    """Differentiate a volume curve.

    ``centering="points"`` returns centred differences on the volume grid
    (one-sided at the ends). ``centering="cells"`` returns cell averages
    ``(Omega[i+1] - Omega[i]) / h`` at the cell midpoints, which is what a
    histogram of sampled energies measures.
    """
    E, om = v.energies, v.volumes
    h = v.spacing
    n = max(v.samples, 1)
    if centering == "points":
        vals = np.gradient(om, E)
        span = np.full(E.shape, 2.0 * h)
        span[0] = span[-1] = h
        dmass = np.abs(np.gradient(om, E)) * span
        energies = E
        weighted = None if v.weighted is None else np.gradient(v.weighted, E)
    elif centering == "cells":
        vals = np.diff(om) / h
        span = np.full(vals.shape, h)
        dmass = np.abs(np.diff(om))
        energies = 0.5 * (E[1:] + E[:-1])
        weighted = None if v.weighted is None else np.diff(v.weighted) / h
    else:
        raise ValueError(f"unknown centering {centering!r}")
    p = np.clip(dmass / v.box_volume, 0.0, 1.0) if v.box_volume > 0 else np.zeros_like(vals)
    err = v.box_volume * np.sqrt(p * (1.0 - p) / n) / span
    if np.any(np.diff(om) < -3.0 * (v.mc_error[1:] + v.mc_error[:-1])):
        warnings.warn("volume curve decreases beyond its error bars", RuntimeWarning, stacklevel=2)
    curve = DensityCurve(energies, vals, hbar, v.dof, SCALED, err, current=weighted)
    return curve if normalization == SCALED else curve.as_raw()


def convolve_pair(a: DensityCurve, b: DensityCurve) -> DensityCurve:
    """Density of the sum of two independent blocks."""
    ha, hb = a.spacing, b.spacing
    if not math.isclose(ha, hb, rel_tol=1e-9):
        raise ValueError(f"grid spacing mismatch: {ha} vs {hb}")
    if a.normalization != b.normalization or not math.isclose(a.hbar, b.hbar):
        raise ValueError("components must share hbar and normalization")
    h = ha
    vals = np.convolve(a.values, b.values) * h
    energies = a.energies[0] + b.energies[0] + h * np.arange(vals.size)
    err = None
    if a.mc_error is not None and b.mc_error is not None:
        var = np.convolve(a.mc_error**2, b.values**2) + np.convolve(a.values**2, b.mc_error**2)
        err = np.sqrt(var) * h
    cur = None
    if a.current is not None or b.current is not None:
        cur = np.zeros_like(vals)
        if a.current is not None:
            cur += np.convolve(a.current, b.values) * h
        if b.current is not None:
            cur += np.convolve(a.values, b.current) * h
    return DensityCurve(energies, vals, a.hbar, a.dof + b.dof, a.normalization, err, current=cur)


def density_separable(blocks: Sequence[DensityCurve]) -> DensityCurve:
    """Convolve block densities into the density of the additive Hamiltonian.

    All blocks must share the grid spacing; the result lives on the grid of
    sums of block energies with the same spacing.
    """
    if not blocks:
        raise ValueError("need at least one block")
    out = blocks[0]
    for b in blocks[1:]:
        out = convolve_pair(out, b)
    return out


def smooth_and_differentiate(values: np.ndarray, h: float, sigma: float, order: int) -> dict[int, np.ndarray]:
    """Gaussian smoothing once, then repeated centred differences."""
    sm = gaussian_filter1d(np.asarray(values, dtype=float), sigma / h, mode="nearest")
    out = {0: sm}
    cur = sm
    for k in range(1, order + 1):
        cur = np.gradient(cur, h)
        out[k] = cur
    return out


def smooth_derivative(c: DensityCurve, order: int, window: float | None = None) -> DensityCurve:
    """Gaussian-smoothed energy derivatives up to ``order``.

    Parameters
    ----------
    c : DensityCurve
    order : int
        Highest derivative, at most 4.
    window : float, optional
        Gaussian standard deviation in energy units; defaults to ten grid
        spacings.

    Returns
    -------
    DensityCurve
        Copy of ``c`` with ``derivatives[0..order]`` filled (and the same
        for ``current`` when present).
    """
    h = c.spacing
    if window is None:
        window = 10.0 * h
    if window < h:
        raise ValueError(f"window {window} is below the grid spacing {h}")
    if not 0 <= order <= 4:
        raise ValueError("order must be within 0..4")
    derivs = smooth_and_differentiate(c.values, h, window, order)
    cur = {}
    if c.current is not None:
        cur = smooth_and_differentiate(c.current, h, window, order)
    return replace(c, derivatives=derivs, window=float(window), current_derivatives=cur)


def cumulative(c: DensityCurve) -> np.ndarray:
    """Trapezoid integral of the density from the first grid point."""
    v = c.values
    h = c.spacing
    return np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * h)))


# ---------------------------------------------------------------------------
# boxes and the separable classical pipeline
# ---------------------------------------------------------------------------


def _scan(h: HamiltonianSpec, search: tuple[float, float], resolution: int):
    axes = [np.linspace(search[0], search[1], resolution)] * h.nvars
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return axes, evaluate(h, mesh)


def sublevel_box(
    h: HamiltonianSpec,
    emax: float,
    search: tuple[float, float] = (-4.0, 4.0),
    resolution: int | None = None,
    pad: float = 0.02,
) -> np.ndarray:
    """Axis-aligned box around ``{H <= emax}`` found by a grid scan.

    Suitable for up to three variables per (block of a) Hamiltonian.
    """
    if h.nvars > 3:
        raise ValueError("grid scan supports at most 3 variables; pass an explicit box")
    if resolution is None:
        resolution = {1: 200001, 2: 2001, 3: 201}[h.nvars]
    axes, H = _scan(h, search, resolution)
    inside = H <= emax
    if not np.any(inside):
        raise ValueError(f"no point with H <= {emax} in the search region")
    step = (search[1] - search[0]) / (resolution - 1)
    box = []
    for j in range(h.nvars):
        other = tuple(k for k in range(h.nvars) if k != j)
        hit = np.any(inside, axis=other) if other else inside
        idx = np.nonzero(hit)[0]
        if idx[0] == 0 or idx[-1] == resolution - 1:
            raise ValueError("sublevel set touches the search region; enlarge `search`")
        box.append((axes[j][idx[0]] - step - pad, axes[j][idx[-1]] + step + pad))
    return np.array(box)


def minimum_energy(h: HamiltonianSpec, search=(-4.0, 4.0), resolution: int | None = None) -> float:
    """Global minimum of a low-dimensional block by a grid scan plus polish."""
    from scipy.optimize import minimize

    from .hamiltonian import gradient

    if resolution is None:
        resolution = {1: 20001, 2: 801, 3: 121}.get(h.nvars, 21)
    axes, H = _scan(h, search, resolution)
    k = np.unravel_index(np.argmin(H), H.shape)
    x0 = np.array([axes[j][k[j]] for j in range(h.nvars)])
    res = minimize(lambda x: evaluate(h, x), x0, jac=lambda x: gradient(h, x), method="BFGS",
                   options={"gtol": 1e-12})
    return float(min(res.fun, H[k]))


def _pad_below(c: DensityCurve, n: int) -> DensityCurve:
    """Prepend ``n`` zero-density grid points (below the spectrum)."""
    h = c.spacing
    z = np.zeros(n)

    def pad(a):
        return None if a is None else np.concatenate((z, a))

    return replace(
        c,
        energies=np.concatenate((c.energies[0] - h * np.arange(n, 0, -1), c.energies)),
        values=pad(c.values),
        mc_error=pad(c.mc_error),
        current=pad(c.current),
        derivatives={},
        current_derivatives={},
    )


def separable_density(
    h: HamiltonianSpec,
    hbar: float,
    e_lo: float,
    e_hi: float,
    spacing: float,
    samples_per_block: int,
    seed: int,
    *,
    parameter: str | None = None,
    normalization: str = RAW,
    shards: int = DEFAULT_SHARDS,
    threads: int = 1,
    jit: bool | None = None,
) -> DensityCurve:
    """Classical density of a separable Hamiltonian from block volumes.

    Each block volume is sampled with :func:`volume_mc`, turned into cell
    densities and the blocks are convolved. The result lies on the grid
    ``e_lo + k * spacing`` up to ``e_hi``. With ``parameter`` the curve also
    carries the classical current (density of ``dH/dparameter``).
    """
    if h.separable_blocks is None:
        raise ValueError("spec is not separable")
    nb = len(h.separable_blocks)
    blocks = [h.block(k) for k in range(nb)]
    mins = [minimum_energy(b) for b in blocks]
    total_min = sum(mins)
    # cell-grid origins: blocks 1.. are aligned to the spacing, block 0 is
    # shifted so that sums of cell centres land on e_lo + k * spacing
    origins = [0.0] * nb
    for k in range(1, nb):
        origins[k] = math.floor(mins[k] / spacing) * spacing - 2 * spacing
    rest = sum(origins[1:]) + nb * spacing / 2
    shift = e_lo - rest
    steps = math.ceil((shift - (mins[0] - 2 * spacing)) / spacing)
    origins[0] = shift - steps * spacing
    ss = np.random.SeedSequence(seed).spawn(nb)
    curves = []
    for k, b in enumerate(blocks):
        top = e_hi - (total_min - mins[k]) + 2 * spacing
        ncell = int(math.ceil((top - origins[k]) / spacing))
        grid = origins[k] + spacing * np.arange(ncell + 1)
        box = sublevel_box(b, grid[-1])
        par = parameter if parameter is not None and parameter in b.parameters else None
        seed_k = int(ss[k].generate_state(1)[0])
        v = volume_mc(b, box, grid, samples_per_block, seed_k, parameter=par,
                      shards=shards, threads=threads, jit=jit)
        c = density_from_volume(v, hbar, centering="cells", normalization=SCALED)
        curves.append(c)
    total = density_separable(curves)
    total = replace(total, energies=np.round((total.energies - e_lo) / spacing) * spacing + e_lo)
    missing = int(round((total.energies[0] - e_lo) / spacing))
    if missing > 0:
        total = _pad_below(total, missing)
    out = total.slice(e_lo - 0.5 * spacing, e_hi + 0.5 * spacing)
    out = replace(out, hbar=hbar)
    return out if normalization == SCALED else out.as_raw()
