"""Triple-cusp preset: three uncoupled quartic double wells.

Each block is ``p^2/2 + A q - 2 q^2 + q^4``. The default parameters
``A = (1/4, 1/2, 3/4)`` give every well three stationary points and the full
model 27, all non-degenerate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import HamiltonianSpec, Term, phase_variables

SPINODAL = math.sqrt(64.0 / 27.0)
DEFAULT_A = (0.25, 0.5, 0.75)
QUADRATIC = -2.0
QUARTIC = 1.0


@dataclass(frozen=True)
class CuspParams:
    A: tuple[float, float, float] = DEFAULT_A

    def __post_init__(self):
        a = tuple(float(x) for x in self.A)
        if len(a) != 3:
            raise ValueError("the triple cusp needs exactly three A values")
        object.__setattr__(self, "A", a)

    def wells_per_block(self) -> tuple[int, ...]:
        """Stationary points of each 1D potential (3 inside the spinodal, else 1)."""
        return tuple(3 if abs(a) < SPINODAL else 1 for a in self.A)


def cusp_1d(A: float = 0.0, name: str = "A") -> HamiltonianSpec:
    """Single cusp block ``p^2/2 + A q - 2 q^2 + q^4`` with parameter ``name``."""
    terms = (
        Term(0.5, (2, 0)),
        Term(1.0, (0, 1), name),
        Term(QUADRATIC, (0, 2)),
        Term(QUARTIC, (0, 4)),
    )
    return HamiltonianSpec(("p1", "q1"), terms, {name: float(A)}, ((0, 1),), "cusp1")


def build(params: CuspParams | None = None) -> HamiltonianSpec:
    """Separable three-block triple-cusp Hamiltonian with parameters ``A1..A3``."""
    params = params or CuspParams()
    f = 3
    terms = []
    for i in range(f):
        def ex(var, power):
            e = [0] * (2 * f)
            e[var] = power
            return tuple(e)

        terms += [
            Term(0.5, ex(i, 2)),
            Term(1.0, ex(f + i, 1), f"A{i + 1}"),
            Term(QUADRATIC, ex(f + i, 2)),
            Term(QUARTIC, ex(f + i, 4)),
        ]
    return HamiltonianSpec(
        variables=phase_variables(f),
        terms=tuple(terms),
        parameters={f"A{i + 1}": a for i, a in enumerate(params.A)},
        separable_blocks=tuple((i, f + i) for i in range(f)),
        name="cusp3",
    )


def potential_coefficients(A: float) -> tuple[float, float, float, float, float]:
    """Coefficients of ``V(q) = sum_k c_k q^k`` for k = 0..4."""
    return (0.0, float(A), QUADRATIC, 0.0, QUARTIC)


def stationary_1d(A: float) -> list[tuple[float, float, int]]:
    """Real roots of ``V'(q)`` as ``(q, V(q), index)`` sorted by ``q``."""
    roots = np.roots([4.0 * QUARTIC, 0.0, 2.0 * QUADRATIC, A])
    out = []
    for z in roots:
        if abs(z.imag) > 1e-9:
            continue
        q = float(z.real)
        v = A * q + QUADRATIC * q * q + QUARTIC * q**4
        curv = 2.0 * QUADRATIC + 12.0 * QUARTIC * q * q
        out.append((q, v, 1 if curv < 0 else 0))
    return sorted(out)


@dataclass(frozen=True)
class TableRow:
    number: int
    energy: float
    coords: tuple[float, float, float]
    kind: str
    r: int


# Reference triple-cusp stationary points at A = (1/4, 1/2, 3/4): energies to
# three decimals, coordinates to two, ordered by energy.
_TABLE = """
 1 -4.551 -1.03 -1.06 -1.08 min 0
 2 -4.051 +0.97 -1.06 -1.08 min 0
 3 -3.553 -1.03 +0.93 -1.08 min 0
 4 -3.289 +0.06 -1.06 -1.08 sad 1
 5 -3.058 -1.03 -1.06 +0.89 min 0
 6 -3.053 +0.97 +0.93 -1.08 min 0
 7 -3.005 -1.03 +0.13 -1.08 sad 1
 8 -2.697 -1.03 -1.06 +0.20 sad 1
 9 -2.558 +0.97 -1.06 +0.89 min 0
10 -2.505 +0.97 +0.13 -1.08 sad 1
11 -2.291 +0.06 +0.93 -1.08 sad 1
12 -2.197 +0.97 -1.06 +0.20 sad 1
13 -2.060 -1.03 +0.93 +0.89 min 0
14 -1.796 +0.06 -1.06 +0.89 sad 1
15 -1.743 +0.06 +0.13 -1.08 sad 2
16 -1.699 -1.03 +0.93 +0.20 sad 1
17 -1.560 +0.97 +0.93 +0.89 min 0
18 -1.512 -1.03 +0.13 +0.89 sad 1
19 -1.435 +0.06 -1.06 +0.20 sad 2
20 -1.199 +0.97 +0.93 +0.20 sad 1
21 -1.151 -1.03 +0.13 +0.20 sad 2
22 -1.012 +0.97 +0.13 +0.89 sad 1
23 -0.798 +0.06 +0.93 +0.89 sad 1
24 -0.651 +0.97 +0.13 +0.20 sad 2
25 -0.437 +0.06 +0.93 +0.20 sad 2
26 -0.250 +0.06 +0.13 +0.89 sad 2
27 +0.111 +0.06 +0.13 +0.20 max 3
"""


def reference_table() -> list[TableRow]:
    rows = []
    for line in _TABLE.strip().splitlines():
        k, e, q1, q2, q3, kind, r = line.split()
        rows.append(TableRow(int(k), float(e), (float(q1), float(q2), float(q3)), kind, int(r)))
    return rows
