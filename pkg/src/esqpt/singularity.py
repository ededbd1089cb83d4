"""Local level-density singularities of stationary points.

Near a non-degenerate stationary point with ``r`` negative Hessian
directions in a ``2f``-dimensional phase space, the smooth density splits
into an analytic part and an irregular part whose ``ceil(f - 1)``-th energy
derivative is singular:

==========  =====================  ========================================
integer f   ``r = 4k``             upward jump
            ``r = 4k + 1``         logarithmic divergence pointing up
            ``r = 4k + 2``         downward jump
            ``r = 4k + 3``         logarithmic divergence pointing down
half f      ``r`` even             ``Theta(D) |D|^-1/2``, sign ``(-1)^(r/2)``
            ``r`` odd              ``Theta(-D) |D|^-1/2``, sign ``(-1)^((r-1)/2)``
==========  =====================  ========================================

Throughout, ``det`` is the determinant of the actual Hessian of ``H``. The
local quadratic form ``sum_i lambda_i x_i^2 / 2`` maps to the unit Morse form
with Jacobian ``2^f / sqrt|det|``, which is carried in all prefactors.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gamma

from .hypergeom import hyp2f1

JUMP = "jump"
LOG = "log_divergence"
SQRT_RIGHT = "inverse_sqrt_right"
SQRT_LEFT = "inverse_sqrt_left"
POWER = "power_law"
UP, DOWN = "up", "down"

DEFAULT_CUTOFF = 0.5


class DegenerateStationaryPointError(ValueError):
    """Morse classification requested for a degenerate stationary point."""


@dataclass(frozen=True)
class SingularityClass:
    f: float
    r: int
    m: int
    derivative_order: int
    kind: str
    sign: str
    exponent: float | None = None
    energy: float | None = None


def is_half_integer(f: float) -> bool:
    return not float(f).is_integer() and float(2 * f).is_integer()


def _check_dof(f: float) -> None:
    if f <= 0 or not float(2 * f).is_integer():
        raise ValueError(f"f must be a positive integer or half-integer, got {f}")


def defect_order(f: float) -> int:
    """Derivative order ``ceil(f - 1)`` carrying the defect."""
    return int(math.ceil(f - 1))


def classify_nondegenerate(f: float, r: int, energy: float | None = None) -> SingularityClass:
    """Predicted defect of a Morse stationary point of index ``r``."""
    _check_dof(f)
    if not 0 <= r <= 2 * f:
        raise ValueError(f"index r={r} outside 0..2f")
    m = r % 4
    order = defect_order(f)
    if is_half_integer(f):
        if r % 2 == 0:
            kind, up = SQRT_RIGHT, (r // 2) % 2 == 0
        else:
            kind, up = SQRT_LEFT, ((r - 1) // 2) % 2 == 0
    else:
        kind = JUMP if m in (0, 2) else LOG
        up = m in (0, 1)
    return SingularityClass(float(f), int(r), m, order, kind, UP if up else DOWN, energy=energy)


def predicted_amplitude(f: float, r: int, hessian_det_abs: float, hbar: float) -> float:
    """Signed strength of the defect in the ``ceil(f-1)``-th derivative.

    * jump (``r`` even, integer ``f``): height of the step,
    * log divergence (``r`` odd, integer ``f``): coefficient of ``ln|D|``
      (negative means the peak points up),
    * half-integer ``f``: coefficient of the one-sided ``|D|^-1/2``.
    """
    _check_dof(f)
    base = hbar ** (-f) / math.sqrt(abs(hessian_det_abs))
    if is_half_integer(f):
        s = (-1) ** (r // 2) if r % 2 == 0 else (-1) ** ((r - 1) // 2)
        return s * base / math.sqrt(math.pi)
    if r % 2 == 0:
        return (-1) ** (r // 2) * base
    return (-1) ** ((r + 1) // 2) * base / math.pi


def _sphere(d: int) -> float:
    """Surface area of the unit sphere in ``d`` dimensions."""
    return 2.0 * math.pi ** (d / 2) / gamma(d / 2)


def irregular_density_r0(f: float, hessian_det: float, hbar: float, delta) -> np.ndarray:
    """Irregular density of a non-degenerate minimum (``r = 0``).

    ``(2 pi hbar)^-f 2^f sigma_{2f} / (2 sqrt(det)) Theta(D) D^(f-1)``.
    """
    _check_dof(f)
    if hessian_det <= 0:
        raise ValueError("a minimum needs a positive Hessian determinant")
    d = np.asarray(delta, dtype=float)
    s = int(round(2 * f))
    pre = (2.0 * math.pi * hbar) ** (-f) * 2.0**f * _sphere(s) / (2.0 * math.sqrt(hessian_det))
    out = np.zeros_like(d)
    pos = d >= 0
    with np.errstate(divide="ignore"):
        out[pos] = pre * d[pos] ** (f - 1.0)
    return out


def local_shell_integral(r: int, s: int, e: float, delta) -> np.ndarray:
    """``J(D) = int_{R0}^{sqrt e} t^(r-1) (D + t^2)^(s/2 - 1) dt``.

    ``R0 = sqrt(max(0, -D))``; zero for ``D <= -e``. Evaluated in closed
    form through the hypergeometric function on each side of ``D = 0``.
    """
    d = np.atleast_1d(np.asarray(delta, dtype=float))
    out = np.zeros_like(d)
    f = (r + s) / 2.0
    pos = d > 0
    if np.any(pos):
        dp = d[pos]
        out[pos] = (e ** (r / 2) / r) * (dp + e) ** (s / 2 - 1) * hyp2f1(
            1.0 - s / 2, 1.0, 1.0 + r / 2, e / (e + dp))
    neg = (d < 0) & (d > -e)
    if np.any(neg):
        L = e + d[neg]
        out[neg] = 0.5 * e ** (r / 2 - 1) * L ** (s / 2) / (s / 2) * hyp2f1(
            1.0 - r / 2, 1.0, 1.0 + s / 2, L / e)
    zero = d == 0
    if np.any(zero):
        out[zero] = e ** (f - 1) / (2 * f - 2) if f > 1 else np.inf
    return out if np.ndim(delta) else out[0]


def irregular_density_general(
    f: float, r: int, hessian_det_abs: float, hbar: float, e_cutoff: float, delta
) -> np.ndarray:
    """Irregular density of a saddle (``1 <= r <= 2f - 1``).

    Parameters
    ----------
    f : float
        Degrees of freedom (integer or half-integer).
    r : int
        Morse index.
    hessian_det_abs : float
        ``|det|`` of the Hessian of ``H`` at the stationary point.
    hbar : float
    e_cutoff : float
        Size of the neighbourhood (in the Morse variables) attributed to the
        stationary point; only the analytic remainder depends on it.
    delta : array_like
        ``E - E_w``.

    Returns
    -------
    numpy.ndarray
        ``(2 pi hbar)^-f 2^f sigma_r sigma_s / (2 sqrt|det|) J(delta)``.
    """
    _check_dof(f)
    s = int(round(2 * f)) - r
    if not 1 <= r or s < 1:
        raise ValueError("need 1 <= r <= 2f - 1")
    if e_cutoff <= 0:
        raise ValueError("e_cutoff must be positive")
    pre = (2.0 * math.pi * hbar) ** (-f) * 2.0**f * _sphere(r) * _sphere(s) / (
        2.0 * math.sqrt(abs(hessian_det_abs)))
    return pre * local_shell_integral(r, s, e_cutoff, delta)


def irregular_density(f: float, r: int, hessian_det: float, hbar: float, delta,
                      e_cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    """Dispatch on the index: minimum or saddle."""
    if r == 0:
        return irregular_density_r0(f, abs(hessian_det), hbar, delta)
    return irregular_density_general(f, r, abs(hessian_det), hbar, e_cutoff, delta)


# ---------------------------------------------------------------------------
# degenerate separable minimum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegenerateSpec:
    """Local form ``E_w + sum_i y_i^m_i`` with ``|det dy/dx| = jacobian_det``."""

    powers: tuple[int, ...]
    jacobian_det: float
    hbar: float

    def __post_init__(self):
        p = tuple(int(m) for m in self.powers)
        if not p or len(p) % 2 or any(m <= 0 or m % 2 for m in p):
            raise ValueError("powers must be an even number of positive even integers")
        if self.jacobian_det <= 0:
            raise ValueError("jacobian_det must be positive")
        object.__setattr__(self, "powers", p)

    @property
    def dof(self) -> int:
        return len(self.powers) // 2

    @property
    def g(self) -> float:
        return float(sum(1.0 / m for m in self.powers))


def degenerate_constant(spec: DegenerateSpec) -> float:
    f = spec.dof
    g = spec.g
    prod = math.prod(gamma(1.0 + 1.0 / m) for m in spec.powers)
    return (2.0 / (math.pi * spec.hbar)) ** f * g / gamma(1.0 + g) / spec.jacobian_det * prod


def degenerate_density(spec: DegenerateSpec, delta) -> tuple[np.ndarray, float, float]:
    """``(C4 Theta(D) D^(g-1), g, C4)`` for a separable power-law minimum."""
    d = np.asarray(delta, dtype=float)
    g = spec.g
    c4 = degenerate_constant(spec)
    out = np.zeros_like(d)
    pos = d > 0
    out[pos] = c4 * d[pos] ** (g - 1.0)
    return out, g, c4


def classify_degenerate(spec: DegenerateSpec) -> SingularityClass:
    g = spec.g
    order = int(math.ceil(g - 1)) if g > 1 else 0
    return SingularityClass(spec.dof, 0, 0, order, POWER, UP, exponent=g - 1.0)


# ---------------------------------------------------------------------------
# model shapes for fitting
# ---------------------------------------------------------------------------


def _primitive(kind: str, k: int, d: np.ndarray) -> np.ndarray:
    """Antiderivative of the density-level shape whose k-th derivative is the
    canonical singular function of ``kind``."""
    a = np.abs(d)
    if kind == JUMP:
        return np.where(d > 0, d ** (k + 1), 0.0) / math.factorial(k + 1)
    if kind == LOG:
        with np.errstate(divide="ignore", invalid="ignore"):
            v = d ** (k + 1) * np.log(a) / (k + 1) - d ** (k + 1) / (k + 1) ** 2
        return np.where(a > 0, v, 0.0) / math.factorial(k)
    if kind == SQRT_RIGHT:
        return np.where(d > 0, a ** (k + 0.5), 0.0) * gamma(0.5) / gamma(k + 1.5)
    if kind == SQRT_LEFT:
        return -np.where(d < 0, a ** (k + 0.5), 0.0) * (-1) ** k * gamma(0.5) / gamma(k + 1.5)
    raise ValueError(f"no fit shape for kind {kind!r}")


def density_shape(kind: str, k: int, delta, cell: float | None = None) -> np.ndarray:
    """Density-level shape with a unit-strength ``kind`` defect in the k-th
    derivative; averaged over cells of width ``cell`` when given."""
    d = np.asarray(delta, dtype=float)
    if cell:
        return (_primitive(kind, k, d + cell / 2) - _primitive(kind, k, d - cell / 2)) / cell
    a = np.abs(d)
    if kind == JUMP:
        return np.where(d >= 0, d**k, 0.0) / math.factorial(k)
    if kind == LOG:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a > 0, d**k * np.log(a), 0.0) / math.factorial(k)
    if kind == SQRT_RIGHT:
        with np.errstate(divide="ignore"):
            return np.where(d > 0, a ** (k - 0.5), 0.0) * gamma(0.5) / gamma(k + 0.5)
    if kind == SQRT_LEFT:
        with np.errstate(divide="ignore"):
            return np.where(d < 0, a ** (k - 0.5), 0.0) * (-1) ** k * gamma(0.5) / gamma(k + 0.5)
    raise ValueError(f"no fit shape for kind {kind!r}")


def candidate_kinds(f: float) -> tuple[str, str]:
    return (SQRT_RIGHT, SQRT_LEFT) if is_half_integer(f) else (JUMP, LOG)


def sign_of(kind: str, coef: float) -> str:
    if kind == LOG:
        return UP if coef < 0 else DOWN
    return UP if coef > 0 else DOWN


def fit_defect_amplitude(
    delta, values, kind: str, order: int, degree: int = 6, cell: float | None = None
) -> tuple[float, float]:
    """Least-squares strength of a ``kind`` defect in raw density samples.

    Fits ``poly(D) + c * shape(D)`` where ``shape`` has a unit defect in the
    ``order``-th derivative. Returns ``(c, standard error)``.
    """
    d = np.asarray(delta, dtype=float)
    y = np.asarray(values, dtype=float)
    scale = np.max(np.abs(d)) or 1.0
    cols = [(d / scale) ** j for j in range(degree + 1)]
    cols.append(density_shape(kind, order, d, cell))
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    dof = max(len(y) - X.shape[1], 1)
    cov = np.linalg.pinv(X.T @ X) * (res @ res) / dof
    return float(coef[-1]), float(math.sqrt(max(cov[-1, -1], 0.0)))


# ---------------------------------------------------------------------------
# detection in smoothed numerical curves
# ---------------------------------------------------------------------------


@dataclass
class DefectReport:
    """Outcome of fitting one stationary energy."""

    energy: float
    order: int
    detected: bool
    kind: str | None
    sign: str | None
    amplitude: float
    stderr: float
    residuals: dict[str, float]
    r_predicted: int | None = None
    cluster: list[float] = field(default_factory=list)
    singularity: SingularityClass | None = None

    def to_json(self) -> dict:
        return {
            "E_w": self.energy,
            "r_predicted": self.r_predicted,
            "kind": self.kind,
            "sign": self.sign,
            "amplitude": self.amplitude,
            "stderr": self.stderr,
            "residuals": self.residuals,
            "detected": self.detected,
            "cluster": self.cluster,
        }


def _smoothed_basis(kind, k, energies, centre, h, sigma):
    from .semiclassics import smooth_and_differentiate

    rho = density_shape(kind, k, energies - centre, cell=h)
    return smooth_and_differentiate(rho, h, sigma, k)[k]


def detect_defect(
    curve,
    E_w: float,
    f: float,
    window: float,
    *,
    neighbours: Sequence[float] = (),
    merge_radius: float | None = None,
    degree: int = 3,
    r_predicted: int | None = None,
    significance: float = 3.0,
    series: str = "density",
) -> DefectReport:
    """Classify the defect of a smoothed curve at ``E_w`` by model competition.

    Parameters
    ----------
    curve : DensityCurve
        Must carry smoothed derivatives (see ``smooth_derivative``); the
        Gaussian width is read from ``curve.window``.
    E_w : float
        Stationary energy.
    f : float
        Degrees of freedom; the ``ceil(f-1)``-th derivative is fitted.
    window : float
        Half-width of the fitted energy interval.
    neighbours : sequence of float
        Other stationary energies. Those within ``merge_radius`` of ``E_w``
        share its defect; others within ``window + 4 sigma`` receive
        nuisance terms of every candidate kind.
    merge_radius : float, optional
        Defaults to half the smoothing width.
    degree : int
        Polynomial background degree.
    series : {"density", "current"}
        Which smoothed series of ``curve`` to fit.

    Returns
    -------
    DefectReport
    """
    k = defect_order(f)
    derivs = curve.derivatives if series == "density" else curve.current_derivatives
    if k not in derivs or curve.window is None:
        raise ValueError(f"curve lacks a smoothed derivative of order {k}")
    sigma = curve.window
    h = curve.spacing
    E = curve.energies
    if merge_radius is None:
        merge_radius = 0.5 * sigma
    members = [E_w] + [e for e in neighbours if 0 < abs(e - E_w) <= merge_radius]
    others = [e for e in neighbours if abs(e - E_w) > merge_radius
              and abs(e - E_w) <= window + 4.0 * sigma]
    sel = (np.abs(E - E_w) <= window) & np.isfinite(derivs[k])
    if sel.sum() < degree + 4 + 2 * len(others):
        raise ValueError("fit window holds too few grid points")
    if min(np.sum(sel & (E < E_w)), np.sum(sel & (E > E_w))) < degree + 2:
        raise ValueError("curve is undefined on one side of the stationary energy")
    y = derivs[k][sel]
    x = (E[sel] - E_w) / window
    poly = [x**j for j in range(degree + 1)]
    kinds = candidate_kinds(f)
    nuis = []
    for e in others:
        for kd in kinds:
            nuis.append(_smoothed_basis(kd, k, E, e, h, sigma)[sel])
    fits = {}
    for kd in kinds:
        target = sum(_smoothed_basis(kd, k, E, e, h, sigma) for e in members)[sel]
        X = np.column_stack(poly + [target] + nuis)
        norms = np.linalg.norm(X, axis=0)
        norms[norms == 0] = 1.0
        Xn = X / norms
        coef, *_ = np.linalg.lstsq(Xn, y, rcond=None)
        res = y - Xn @ coef
        rss = float(res @ res)
        dof = max(len(y) - X.shape[1], 1)
        cov = np.linalg.pinv(Xn.T @ Xn) * rss / dof
        t = degree + 1
        fits[kd] = (rss, coef[t] / norms[t], math.sqrt(max(cov[t, t], 0.0)) / norms[t])
    best = min(fits, key=lambda kd: fits[kd][0])
    rss, c, se = fits[best]
    # smoothing correlates neighbouring residuals over about 2 sqrt(pi) sigma,
    # so the ordinary least-squares error is inflated accordingly
    se *= math.sqrt(max(1.0, 2.0 * math.sqrt(math.pi) * sigma / h))
    detected = abs(c) >= significance * se and c != 0.0
    report = DefectReport(
        energy=float(E_w),
        order=k,
        detected=bool(detected),
        kind=best if detected else None,
        sign=sign_of(best, c) if detected else None,
        amplitude=float(c),
        stderr=float(se),
        residuals={kd: v[0] for kd, v in fits.items()},
        r_predicted=r_predicted,
        cluster=[float(e) for e in members],
    )
    if detected:
        report.singularity = SingularityClass(
            float(f), -1 if r_predicted is None else r_predicted,
            -1 if r_predicted is None else r_predicted % 4, k, best, report.sign, energy=float(E_w))
    return report


def matches(report: DefectReport, expected: SingularityClass, check_sign: bool = True) -> bool:
    if not report.detected:
        return False
    if report.kind != expected.kind or report.order != expected.derivative_order:
        return False
    return report.sign == expected.sign if check_sign else True


def reports_to_json(reports: Sequence[DefectReport]) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2)


def singularity_to_dict(s: SingularityClass) -> dict:
    return asdict(s)
