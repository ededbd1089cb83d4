"""Polynomial phase-space Hamiltonians.

A Hamiltonian is a finite sum of monomials over the phase-space variables
``(p_1..p_f, q_1..q_f)``. Each term carries a numeric coefficient and may be
scaled by one named parameter, so ``A*q`` is stored as
``Term(1.0, (0, 1), "A")`` and the parameter is resolved at evaluation time.
Derivatives are taken term by term and are exact.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_PHASE_DIM = 16


class DimensionError(ValueError):
    """Point dimension does not match the Hamiltonian."""


@dataclass(frozen=True)
class PhasePoint:
    """Phase-space point with separate coordinate and momentum vectors."""

    coords: tuple[float, ...]
    momenta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        object.__setattr__(self, "momenta", tuple(float(p) for p in self.momenta))
        if len(self.coords) != len(self.momenta) or not self.coords:
            raise DimensionError("coords and momenta must have equal length f >= 1")

    @property
    def dof(self) -> int:
        return len(self.coords)

    def as_vector(self) -> np.ndarray:
        """Variables in Hamiltonian order ``(p_1..p_f, q_1..q_f)``."""
        return np.array(self.momenta + self.coords)

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        if x.size % 2:
            raise DimensionError("phase vector must have even length")
        f = x.size // 2
        return cls(coords=tuple(x[f:]), momenta=tuple(x[:f]))


@dataclass(frozen=True)
class Term:
    coef: float
    exps: tuple[int, ...]
    param: str | None = None


@dataclass(frozen=True)
class LocalQuadraticForm:
    """Second-order data of a Hamiltonian at a point."""

    origin: np.ndarray
    energy: float
    matrix: np.ndarray
    hessian_eigenvalues: np.ndarray
    hessian_determinant: float


@dataclass(frozen=True)
class HamiltonianSpec:
    """Polynomial Hamiltonian with named parameters.

    Parameters
    ----------
    variables : tuple of str
        Variable names in storage order. For a genuine phase space these are
        ``p1..pf, q1..qf``; an odd number of variables is accepted for
        volume integrals in odd dimension (half-integer ``dof``).
    terms : tuple of Term
    parameters : mapping of parameter name to value
    separable_blocks : tuple of tuples of variable indices, optional
        Partition of the variables into additive, non-interacting blocks.
    """

    variables: tuple[str, ...]
    terms: tuple[Term, ...]
    parameters: Mapping[str, float] = field(default_factory=dict)
    separable_blocks: tuple[tuple[int, ...], ...] | None = None
    name: str = ""

    def __post_init__(self):
        n = len(self.variables)
        if n == 0 or n > MAX_PHASE_DIM:
            raise ValueError(f"need 1..{MAX_PHASE_DIM} phase-space variables, got {n}")
        object.__setattr__(self, "parameters", dict(self.parameters))
        for t in self.terms:
            if len(t.exps) != n or min(t.exps, default=0) < 0:
                raise ValueError(f"term {t} does not match {n} variables")
            if t.param is not None and t.param not in self.parameters:
                raise ValueError(f"unknown parameter {t.param!r}")
        if self.separable_blocks is not None:
            flat = sorted(i for b in self.separable_blocks for i in b)
            if flat != list(range(n)):
                raise ValueError("separable_blocks must partition the variables")
            owner = {i: k for k, b in enumerate(self.separable_blocks) for i in b}
            for t in self.terms:
                used = {owner[i] for i, e in enumerate(t.exps) if e}
                if len(used) > 1:
                    raise ValueError(f"term {t} mixes separable blocks")

    # -- basic properties --------------------------------------------------
    @property
    def nvars(self) -> int:
        return len(self.variables)

    @property
    def dof(self) -> float:
        """Number of degrees of freedom; half-integer for odd dimension."""
        n = self.nvars
        return n // 2 if n % 2 == 0 else n / 2

    @property
    def degree(self) -> int:
        return max((sum(t.exps) for t in self.terms), default=0)

    def with_parameters(self, **values: float) -> "HamiltonianSpec":
        unknown = set(values) - set(self.parameters)
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)}")
        params = dict(self.parameters)
        params.update({k: float(v) for k, v in values.items()})
        return replace(self, parameters=params)

    def substituted(self) -> "HamiltonianSpec":
        """Fold parameter values into coefficients and merge like terms."""
        merged: dict[tuple[int, ...], float] = {}
        for t in self.terms:
            c = t.coef * (self.parameters[t.param] if t.param else 1.0)
            merged[t.exps] = merged.get(t.exps, 0.0) + c
        terms = tuple(Term(c, e) for e, c in merged.items() if c != 0.0)
        return replace(self, terms=terms, parameters={})

    def coefficient_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Resolved ``(coef, exps)`` arrays for kernels."""
        coef = np.array(
            [t.coef * (self.parameters[t.param] if t.param else 1.0) for t in self.terms],
            dtype=np.float64,
        )
        exps = np.array([t.exps for t in self.terms], dtype=np.int64).reshape(-1, self.nvars)
        return coef, exps

    def parameter_derivative(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """``(coef, exps)`` of dH/d(name); terms are linear in parameters."""
        if name not in self.parameters:
            raise KeyError(name)
        sel = [t for t in self.terms if t.param == name]
        coef = np.array([t.coef for t in sel], dtype=np.float64)
        exps = np.array([t.exps for t in sel], dtype=np.int64).reshape(-1, self.nvars)
        return coef, exps

    def block(self, k: int) -> "HamiltonianSpec":
        """Sub-Hamiltonian of separable block ``k`` over its own variables."""
        if self.separable_blocks is None:
            raise ValueError("spec has no separable blocks")
        idx = self.separable_blocks[k]
        terms = []
        for t in self.terms:
            if any(t.exps[i] for i in idx) or (not any(t.exps) and k == 0):
                terms.append(Term(t.coef, tuple(t.exps[i] for i in idx), t.param))
        names = {t.param for t in terms if t.param}
        params = {n: v for n, v in self.parameters.items() if n in names}
        return HamiltonianSpec(
            variables=tuple(self.variables[i] for i in idx),
            terms=tuple(terms),
            parameters=params,
            name=f"{self.name}[{k}]",
        )

    def blocks_with_parameter(self, name: str) -> list[int]:
        if self.separable_blocks is None:
            return []
        out = []
        for k, idx in enumerate(self.separable_blocks):
            if any(t.param == name and any(t.exps[i] for i in idx) for t in self.terms):
                out.append(k)
        return out

    # -- evaluation --------------------------------------------------------
    def _as_array(self, x) -> np.ndarray:
        if isinstance(x, PhasePoint):
            x = x.as_vector()
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.nvars:
            raise DimensionError(f"expected {self.nvars} variables, got {x.shape[-1]}")
        return x

    def __call__(self, x) -> np.ndarray | float:
        return evaluate(self, x)


def _monomials(x: np.ndarray, exps: np.ndarray) -> np.ndarray:
    # x: (..., n), exps: (T, n) -> (..., T)
    return np.prod(x[..., None, :] ** exps, axis=-1)


def evaluate(h: HamiltonianSpec, x) -> np.ndarray | float:
    """H(x) for a PhasePoint or an array of points (last axis = variables)."""
    x = h._as_array(x)
    coef, exps = h.coefficient_arrays()
    if coef.size == 0:
        out = np.zeros(x.shape[:-1])
    else:
        out = _monomials(x, exps) @ coef
    return float(out) if out.ndim == 0 else out


def gradient(h: HamiltonianSpec, x) -> np.ndarray:
    """Exact gradient, shape (..., n)."""
    x = h._as_array(x)
    coef, exps = h.coefficient_arrays()
    g = np.zeros(x.shape)
    for j in range(h.nvars):
        e = exps[:, j]
        keep = e > 0
        if not np.any(keep):
            continue
        dexps = exps[keep].copy()
        dexps[:, j] -= 1
        g[..., j] = _monomials(x, dexps) @ (coef[keep] * e[keep])
    return g


def hessian_matrix(h: HamiltonianSpec, x) -> np.ndarray:
    """Exact Hessian, shape (..., n, n)."""
    x = h._as_array(x)
    coef, exps = h.coefficient_arrays()
    n = h.nvars
    out = np.zeros(x.shape + (n,))
    for i in range(n):
        for j in range(i, n):
            d = exps.copy()
            c = coef.copy()
            c = c * d[:, i]
            d[:, i] = np.maximum(d[:, i] - 1, 0)
            c = c * d[:, j]
            d[:, j] = np.maximum(d[:, j] - 1, 0)
            keep = c != 0
            if not np.any(keep):
                continue
            val = _monomials(x, d[keep]) @ c[keep]
            out[..., i, j] = val
            out[..., j, i] = val
    return out


def hessian(h: HamiltonianSpec, x) -> LocalQuadraticForm:
    """Hessian at a single point, with its symmetric eigen-decomposition."""
    xv = h._as_array(x)
    if xv.ndim != 1:
        raise DimensionError("hessian() takes a single point")
    m = hessian_matrix(h, xv)
    w = np.linalg.eigvalsh(m)
    return LocalQuadraticForm(
        origin=xv.copy(),
        energy=float(evaluate(h, xv)),
        matrix=m,
        hessian_eigenvalues=np.sort(w),
        hessian_determinant=float(np.linalg.det(m)),
    )


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------


def phase_variables(f: int) -> tuple[str, ...]:
    return tuple(f"p{i + 1}" for i in range(f)) + tuple(f"q{i + 1}" for i in range(f))


def kinetic_plus_potential(
    f: int,
    potential: Iterable[tuple[float, Mapping[int, int]] | tuple[float, Mapping[int, int], str]],
    parameters: Mapping[str, float] | None = None,
    separable: bool = False,
    name: str = "",
) -> HamiltonianSpec:
    """``p^2/2 + V(q)`` with V given as ``(coef, {coord_index: power}[, param])``."""
    variables = phase_variables(f)
    terms = []
    for i in range(f):
        e = [0] * (2 * f)
        e[i] = 2
        terms.append(Term(0.5, tuple(e)))
    for item in potential:
        coef, powers = item[0], item[1]
        param = item[2] if len(item) > 2 else None
        e = [0] * (2 * f)
        for i, k in powers.items():
            e[f + i] = int(k)
        terms.append(Term(float(coef), tuple(e), param))
    blocks = tuple((i, f + i) for i in range(f)) if separable else None
    return HamiltonianSpec(variables, tuple(terms), dict(parameters or {}), blocks, name)


def harmonic(f: int = 1, omegas: Sequence[float] | None = None) -> HamiltonianSpec:
    omegas = [1.0] * f if omegas is None else list(omegas)
    pot = [(0.5 * w * w, {i: 2}) for i, w in enumerate(omegas)]
    return kinetic_plus_potential(f, pot, separable=True, name="harmonic")


def quartic_minimum() -> HamiltonianSpec:
    """``p^2/2 + q^4``: a degenerate (flat) minimum at the origin."""
    return kinetic_plus_potential(1, [(1.0, {0: 4})], separable=True, name="quartic")


# ---------------------------------------------------------------------------
# structured-text configuration
# ---------------------------------------------------------------------------
#
#   # comment
#   name = double-well
#   variables = p1 q1            (optional; default from dof)
#   dof = 1
#   param.A = 0.25
#   term = 0.5 p1^2
#   term = 1 * A q1
#   term = -2 q1^2
#   block = p1 q1                (repeat per block; optional)

_TOKEN = re.compile(r"^([A-Za-z_]\w*)(?:\^(\d+))?$")


def parse_config_lines(text: str) -> dict[str, list[str]]:
    """Flat ``key = value`` document; repeated keys accumulate in order."""
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value': {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out.setdefault(key, []).append(value)
    return out


def parse_term(text: str, variables: Sequence[str], params: Mapping[str, float]) -> Term:
    tokens = text.replace("*", " * ").split()
    if not tokens:
        raise ValueError("empty term")
    try:
        coef = float(tokens[0])
        tokens = tokens[1:]
    except ValueError:
        coef = 1.0
    exps = [0] * len(variables)
    param = None
    for tok in tokens:
        if tok == "*":
            continue
        m = _TOKEN.match(tok)
        if not m:
            raise ValueError(f"cannot parse factor {tok!r} in term {text!r}")
        sym, power = m.group(1), int(m.group(2) or 1)
        if sym in variables:
            exps[variables.index(sym)] += power
        elif sym in params:
            if param is not None or power != 1:
                raise ValueError(f"term {text!r}: at most one linear parameter")
            param = sym
        else:
            raise ValueError(f"term {text!r}: unknown symbol {sym!r}")
    return Term(coef, tuple(exps), param)


def spec_from_text(text: str) -> HamiltonianSpec:
    kv = parse_config_lines(text)
    if "variables" in kv:
        variables = tuple(kv["variables"][-1].split())
    elif "dof" in kv:
        variables = phase_variables(int(kv["dof"][-1]))
    else:
        raise ValueError("config needs 'dof' or 'variables'")
    params = {k[len("param."):]: float(v[-1]) for k, v in kv.items() if k.startswith("param.")}
    terms = tuple(parse_term(t, variables, params) for t in kv.get("term", []))
    blocks = None
    if "block" in kv:
        blocks = tuple(tuple(variables.index(s) for s in b.split()) for b in kv["block"])
    return HamiltonianSpec(variables, terms, params, blocks, kv.get("name", [""])[-1])


def load_spec(path: str | Path) -> HamiltonianSpec:
    return spec_from_text(Path(path).read_text())


def spec_to_text(h: HamiltonianSpec) -> str:
    lines = [f"name = {h.name}" if h.name else "# unnamed", "variables = " + " ".join(h.variables)]
    for k, v in h.parameters.items():
        lines.append(f"param.{k} = {v!r}")
    for t in h.terms:
        factors = [f"{h.variables[i]}^{e}" if e > 1 else h.variables[i]
                   for i, e in enumerate(t.exps) if e]
        if t.param:
            factors.insert(0, f"* {t.param}")
        lines.append(f"term = {t.coef!r} " + " ".join(factors))
    for b in h.separable_blocks or ():
        lines.append("block = " + " ".join(h.variables[i] for i in b))
    return "\n".join(lines) + "\n"


def is_finite_polynomial(h: HamiltonianSpec) -> bool:
    return all(math.isfinite(t.coef) for t in h.terms)
