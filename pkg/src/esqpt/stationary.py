"""Stationary points of polynomial Hamiltonians.

Grid-seeded multistart Newton iteration on ``grad H = 0``. Separable
Hamiltonians are searched block by block and recombined, which is both exact
and much cheaper than a full-dimensional search.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hamiltonian import (
    HamiltonianSpec,
    LocalQuadraticForm,
    PhasePoint,
    evaluate,
    gradient,
    hessian,
    hessian_matrix,
)
from .singularity import (
    DegenerateStationaryPointError,
    SingularityClass,
    classify_nondegenerate,
)


class PlausibilityWarning(UserWarning):
    """Index exceeds the number of degrees of freedom."""


@dataclass(frozen=True)
class SearchConfig:
    """Multistart Newton settings.

    ``box`` is one ``(low, high)`` pair per variable, or a single pair used
    for every variable.
    """

    box: Sequence[Sequence[float]] | Sequence[float] = (-2.0, 2.0)
    seeds_per_axis: int = 9
    newton_tol: float = 1e-10
    dedup_radius: float = 1e-6
    degeneracy_threshold: float = 1e-6
    max_iter: int = 100

    def __post_init__(self):
        if self.seeds_per_axis < 2:
            raise ValueError("seeds_per_axis must be at least 2")
        b = np.asarray(self.box, dtype=float)
        if b.ndim == 1:
            b = b[None, :]
        if b.shape[-1] != 2 or np.any(b[:, 1] <= b[:, 0]):
            raise ValueError("box must be non-empty (low, high) pairs")

    def bounds(self, n: int) -> np.ndarray:
        b = np.asarray(self.box, dtype=float)
        if b.ndim == 1:
            return np.tile(b, (n, 1))
        if b.shape[0] != n:
            raise ValueError(f"box has {b.shape[0]} pairs for {n} variables")
        return b


@dataclass(frozen=True)
class StationaryPoint:
    """A point with vanishing gradient and its quadratic characterisation."""

    x: np.ndarray = field(repr=False)
    energy: float
    local_form: LocalQuadraticForm = field(repr=False)
    index_r: int
    degenerate: bool
    null_directions: int
    gradient_norm: float = 0.0

    @property
    def location(self) -> PhasePoint:
        return PhasePoint.from_vector(self.x)

    @property
    def positive_directions(self) -> int:
        return len(self.x) - self.index_r - self.null_directions


def _characterise(h: HamiltonianSpec, x: np.ndarray, threshold: float) -> StationaryPoint:
    form = hessian(h, x)
    w = form.hessian_eigenvalues
    # relative to the Hessian scale, but never below an absolute unit floor,
    # so an all-flat Hessian still counts as degenerate
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1.0)
    tiny = np.abs(w) <= threshold * scale
    null = int(np.count_nonzero(tiny))
    r = int(np.count_nonzero((w < 0) & ~tiny))
    g = float(np.linalg.norm(gradient(h, x)))
    return StationaryPoint(x.copy(), float(evaluate(h, x)), form, r, null > 0, null, g)


def _newton(h: HamiltonianSpec, seeds: np.ndarray, cfg: SearchConfig, bounds: np.ndarray):
    """Vectorised Newton with a damped-gradient fallback; returns converged points."""
    x = seeds.copy()
    span = bounds[:, 1] - bounds[:, 0]
    far = np.max(span) * 4.0
    centre = bounds.mean(axis=1)
    alive = np.ones(len(x), bool)
    done = np.zeros(len(x), bool)
    for _ in range(cfg.max_iter):
        idx = np.nonzero(alive & ~done)[0]
        if idx.size == 0:
            break
        xi = x[idx]
        g = gradient(h, xi)
        gn = np.linalg.norm(g, axis=1)
        H = hessian_matrix(h, xi)
        step = np.empty_like(xi)
        cond = np.linalg.cond(H)
        good = np.isfinite(cond) & (cond < 1e12)
        if np.any(good):
            step[good] = -np.linalg.solve(H[good], g[good][..., None])[..., 0]
        bad = ~good
        if np.any(bad):
            gb = g[bad]
            step[bad] = -0.1 * gb / np.maximum(1.0, np.linalg.norm(gb, axis=1))[:, None]
        # near a degenerate point the gradient vanishes long before the
        # iterate settles, so convergence also requires a negligible step
        conv = (gn < cfg.newton_tol) & (np.linalg.norm(step, axis=1) < 0.01 * cfg.dedup_radius)
        done[idx[conv]] = True
        act = ~conv
        if not np.any(act):
            continue
        xi, g, step = xi[act], g[act], step[act]
        # cap wild steps
        sn = np.linalg.norm(step, axis=1)
        cap = np.max(span)
        step *= np.minimum(1.0, cap / np.maximum(sn, 1e-300))[:, None]
        xi = xi + step
        x[idx[act]] = xi
        escaped = np.any(np.abs(xi - centre) > far, axis=1) | ~np.all(np.isfinite(xi), axis=1)
        alive[idx[act][escaped]] = False
    g = gradient(h, x)
    ok = alive & (np.linalg.norm(g, axis=1) < cfg.newton_tol)
    inside = np.all((x >= bounds[:, 0] - 1e-9) & (x <= bounds[:, 1] + 1e-9), axis=1)
    return x[ok & inside]


def _dedup(points: np.ndarray, radius: float) -> np.ndarray:
    if len(points) == 0:
        return points
    order = np.lexsort(points.T[::-1])
    kept: list[np.ndarray] = []
    for p in points[order]:
        if not any(np.linalg.norm(p - q) < radius for q in kept):
            kept.append(p)
    return np.array(kept)


def _sort_key(sp: StationaryPoint):
    return (round(sp.energy, 12), tuple(np.round(sp.x, 12)))


def _search_full(h: HamiltonianSpec, cfg: SearchConfig) -> list[StationaryPoint]:
    bounds = cfg.bounds(h.nvars)
    axes = [np.linspace(lo, hi, cfg.seeds_per_axis) for lo, hi in bounds]
    seeds = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, h.nvars)
    found = []
    for chunk in np.array_split(seeds, max(1, len(seeds) // 20000)):
        found.append(_newton(h, chunk, cfg, bounds))
    pts = _dedup(np.concatenate(found) if found else np.zeros((0, h.nvars)), cfg.dedup_radius)
    out = [_characterise(h, p, cfg.degeneracy_threshold) for p in pts]
    return sorted(out, key=_sort_key)


def find_stationary_points(
    h: HamiltonianSpec, cfg: SearchConfig | None = None, *, use_blocks: bool = True
) -> list[StationaryPoint]:
    """All stationary points found inside the search box, by ascending energy.

    Parameters
    ----------
    h : HamiltonianSpec
    cfg : SearchConfig, optional
    use_blocks : bool
        For separable specs search each block separately and combine the
        block solutions as a Cartesian product.

    Returns
    -------
    list of StationaryPoint
        Deduplicated, each with gradient norm below ``cfg.newton_tol``.
        Empty when nothing converges.
    """
    cfg = cfg or SearchConfig()
    if not (use_blocks and h.separable_blocks is not None and len(h.separable_blocks) > 1):
        return _search_full(h, cfg)
    bounds = cfg.bounds(h.nvars)
    per_block = []
    for k, idx in enumerate(h.separable_blocks):
        sub = SearchConfig(
            box=bounds[list(idx)],
            seeds_per_axis=cfg.seeds_per_axis,
            newton_tol=cfg.newton_tol / np.sqrt(len(h.separable_blocks)),
            dedup_radius=cfg.dedup_radius,
            degeneracy_threshold=cfg.degeneracy_threshold,
            max_iter=cfg.max_iter,
        )
        per_block.append([sp.x for sp in _search_full(h.block(k), sub)])
    out = []
    for combo in itertools.product(*per_block):
        x = np.zeros(h.nvars)
        for idx, xb in zip(h.separable_blocks, combo):
            x[list(idx)] = xb
        out.append(_characterise(h, x, cfg.degeneracy_threshold))
    return sorted(out, key=_sort_key)


def index_histogram(points: Sequence[StationaryPoint]) -> dict[int, int]:
    hist: dict[int, int] = {}
    for p in points:
        hist[p.index_r] = hist.get(p.index_r, 0) + 1
    return dict(sorted(hist.items()))


def classify(sp: StationaryPoint, f: float) -> SingularityClass:
    """Predicted level-density defect of a non-degenerate stationary point.

    Raises
    ------
    DegenerateStationaryPointError
        When the Hessian has near-zero eigenvalues; such points need the
        power-law treatment (``singularity.degenerate_density``).
    """
    if sp.degenerate:
        raise DegenerateStationaryPointError(
            f"stationary point at E={sp.energy:.6g} is degenerate "
            f"({sp.null_directions} null directions); no Morse classification, "
            "use the degenerate power-law fit instead"
        )
    if sp.index_r > f:
        warnings.warn(
            f"index r={sp.index_r} exceeds f={f}; unusual for kinetic-plus-potential systems",
            PlausibilityWarning,
            stacklevel=2,
        )
    return classify_nondegenerate(f, sp.index_r, energy=sp.energy)
