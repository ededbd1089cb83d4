"""Gauss hypergeometric function for the stationary-point volume integrals.

Only the families produced by the local volume integrals are supported:
real ``z`` in ``(-inf, 1]``, ``b`` a positive integer or ``a`` such that
the series terminates, and ``c - a - b`` integer or half-integer. The
evaluation strategy is

* terminating series when ``a`` or ``b`` is a non-positive integer,
* direct power series for ``|z| <= 1/2``,
* Pfaff transform ``z -> z/(z-1)`` for ``z < -1/2``,
* the ``1 - z`` connection formulas otherwise, with the digamma/logarithm
  variant when ``c - a - b`` is an integer.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gamma, psi, rgamma

_TOL = 1e-17
_MAXTERMS = 4000


def _nonpos_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _series(a, b, c, z):
    """Power series summed until the terms are below round-off."""
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(_MAXTERMS):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * z
        total = total + term
        if np.all(np.abs(term) <= _TOL * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _terminating(a, b, c, z):
    n_max = int(-a) if _nonpos_int(a) else int(-b)
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(n_max):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * z
        total = total + term
    return total


def _near_one_gamma(a, b, c, w):
    """Connection formula in ``w = 1 - z`` for non-integer ``c - a - b``."""
    m = c - a - b
    t1 = gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b)
    t2 = gamma(c) * gamma(-m) * rgamma(a) * rgamma(b)
    out = np.zeros_like(w)
    if t1 != 0.0:
        out = out + t1 * _series(a, b, 1.0 - m, w)
    if t2 != 0.0:
        out = out + t2 * w**m * _series(c - a, c - b, 1.0 + m, w)
    return out


def _near_one_log(a, b, c, w):
    """Connection formula in ``w = 1 - z`` for integer ``m = c - a - b >= 0``."""
    m = int(round(c - a - b))
    lw = np.log(w)
    out = np.zeros_like(w)
    if m > 0:
        pre = gamma(m) * gamma(c) * rgamma(a + m) * rgamma(b + m)
        term = np.ones_like(w)
        acc = np.ones_like(w)
        for n in range(1, m):
            term = term * ((a + n - 1) * (b + n - 1) / (n * (n - m))) * w
            acc = acc + term
        out = out + pre * acc
    pre = gamma(c) * rgamma(a) * rgamma(b)
    if pre == 0.0:
        return out
    sign = -((-1.0) ** m)  # -(z - 1)^m = -(-w)^m
    coef = 1.0 / gamma(m + 1.0)
    ab_term = np.full_like(w, coef)
    acc = np.zeros_like(w)
    for n in range(_MAXTERMS):
        bracket = lw - psi(n + 1.0) - psi(n + m + 1.0) + psi(a + n + m) + psi(b + n + m)
        piece = ab_term * bracket
        acc = acc + piece
        if n > 2 and np.all(np.abs(piece) <= _TOL * np.maximum(np.abs(acc), 1e-300)):
            break
        ab_term = ab_term * ((a + m + n) * (b + m + n) / ((n + 1.0) * (n + m + 1.0))) * w
    return out + sign * pre * w**m * acc


def hyp2f1(a: float, b: float, c: float, z) -> np.ndarray:
    """``2F1(a, b; c; z)`` for real ``z <= 1`` in the supported families.

    Parameters
    ----------
    a, b, c : float
        Parameters; ``c`` must not be a non-positive integer.
    z : array_like
        Real arguments with ``z <= 1``. ``z = 1`` is allowed when
        ``c - a - b > 0`` (Gauss summation).

    Returns
    -------
    numpy.ndarray
        Values with the shape of ``z``.
    """
    if _nonpos_int(c):
        raise ValueError("c must not be a non-positive integer")
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z).copy()
    if np.any(z > 1.0):
        raise ValueError("z > 1 is outside the supported domain")
    out = np.empty_like(z)
    if _nonpos_int(a) or _nonpos_int(b):
        out[:] = _terminating(a, b, c, z)
        return out[0] if scalar else out

    m = c - a - b
    at_one = z == 1.0
    if np.any(at_one):
        if m <= 0:
            out[at_one] = np.inf
        else:
            out[at_one] = gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b)
    small = (np.abs(z) <= 0.5) & ~at_one
    neg = z < -0.5
    near = (z > 0.5) & ~at_one
    if np.any(small):
        out[small] = _series(a, b, c, z[small])
    if np.any(neg):
        # Pfaff: (1 - z)^(-b) 2F1(c - a, b; c; z / (z - 1)), argument in (1/3, 1)
        zz = z[neg]
        out[neg] = (1.0 - zz) ** (-b) * hyp2f1(c - a, b, c, zz / (zz - 1.0))
    if np.any(near):
        w = 1.0 - z[near]
        if float(m).is_integer():
            if m < 0:
                # Euler transform moves to c - a - b = -m > 0
                out[near] = w**m * hyp2f1(c - a, c - b, c, z[near])
            else:
                out[near] = _near_one_log(a, b, c, w)
        else:
            out[near] = _near_one_gamma(a, b, c, w)
    return out[0] if scalar else out

