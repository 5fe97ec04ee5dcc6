"""Polynomial bases used to index moment variables and matrix rows.

A basis fixes two things: the decision variables ``y_c = L(P_c)`` and the
row scaling of moment/localizing matrices.  Row scaling is a diagonal
congruence, so it never changes feasibility, only conditioning.
"""
from __future__ import annotations

import math
from functools import lru_cache

from .measures import MeasureSpec, axis_moments, moments
from .poly import Exponent, Polynomial, monomials


class MonomialBasis:
    """Monomials, optionally rescaled to the reference measure.

    With scaling on, the variables are ``L(x^c) / v_c`` and matrix rows are
    indexed by ``x^a / sqrt(z_2a)``, where ``v_c`` is the typical size of the
    moment ``z_c``.  Both are diagonal changes of coordinates, so the optimal
    value is unchanged; only the conditioning improves.
    """

    def __init__(self, n: int, measure: MeasureSpec | None = None, scaled: bool = True):
        self.n = n
        self.measure = measure
        self.scaled = scaled and measure is not None
        self.name = "monomial" if self.scaled or measure is None else "monomial-unscaled"
        self._axis: list[list[float]] = [[1.0]] * n

    def _ensure(self, top: int) -> None:
        if self.scaled and len(self._axis[0]) <= top:
            self._axis = axis_moments(self.measure, self.n, max(top, 2) + 2)

    def _axis_size(self, k: int, j: int) -> float:
        m = self._axis[k]
        if j % 2 == 0:
            return abs(m[j]) / abs(m[0])
        return math.sqrt(abs(m[j - 1]) * abs(m[j + 1])) / abs(m[0])

    def var_scale(self, c: Exponent) -> float:
        if not self.scaled:
            return 1.0
        self._ensure(max(c) + 1)
        return math.prod(self._axis_size(k, j) for k, j in enumerate(c))

    def product(self, a: Exponent, b: Exponent) -> list[tuple[Exponent, float]]:
        c = tuple(x + y for x, y in zip(a, b))
        if not self.scaled:
            return [(c, 1.0)]
        return [(c, self.var_scale(c) / (self.var_scale(a) * self.var_scale(b)))]

    def expand(self, p: Polynomial) -> dict[Exponent, float]:
        if not self.scaled:
            return dict(p.terms)
        return {a: c * self.var_scale(a) for a, c in p.terms.items()}

    def reference_moments(self, degree: int) -> dict[Exponent, float]:
        z = moments(self.measure, self.n, degree).values
        return {a: v / self.var_scale(a) for a, v in z.items()}

    def row_weights(self, rows: list[Exponent]) -> list[float]:
        """Factor turning the variable-basis element P_a into the row element."""
        if not self.scaled:
            return [1.0] * len(rows)
        self._ensure(2 * max((max(a) for a in rows), default=0))
        out = []
        for a in rows:
            w = self.var_scale(a)
            for k, ak in enumerate(a):
                w /= math.sqrt(abs(self._axis[k][2 * ak]) / abs(self._axis[k][0]))
            out.append(w)
        return out


@lru_cache(maxsize=None)
def _power_in_chebyshev(j: int) -> tuple[tuple[int, float], ...]:
    """x^j = 2^(1-j) sum_i C(j,i) T_{j-2i}, halving the T_0 term for even j."""
    if j == 0:
        return ((0, 1.0),)
    out = {}
    for i in range(j // 2 + 1):
        k = j - 2 * i
        c = math.comb(j, i) * 2.0 ** (1 - j)
        if k == 0:
            c /= 2.0
        out[k] = out.get(k, 0.0) + c
    return tuple(sorted(out.items()))


class ChebyshevBasis:
    """Tensor Chebyshev polynomials T_c on [-1, 1]^n; Lebesgue measure only."""

    name = "chebyshev"

    def __init__(self, n: int, measure: MeasureSpec):
        if measure.kind != "lebesgue" or any(iv != (-1.0, 1.0) for iv in measure.box):
            raise ValueError("the Chebyshev basis needs Lebesgue measure on [-1, 1]^n")
        self.n = n
        self.measure = measure

    def product(self, a: Exponent, b: Exponent) -> list[tuple[Exponent, float]]:
        terms: list[tuple[Exponent, float]] = [((), 1.0)]
        for x, y in zip(a, b):
            if x == 0 or y == 0:
                opts = [(x + y, 1.0)]
            elif x == y:
                opts = [(2 * x, 0.5), (0, 0.5)]
            else:
                opts = [(x + y, 0.5), (abs(x - y), 0.5)]
            terms = [(e + (k,), c * ck) for e, c in terms for k, ck in opts]
        return terms

    def expand(self, p: Polynomial) -> dict[Exponent, float]:
        out: dict[Exponent, float] = {}
        for alpha, c in p.terms.items():
            parts: list[tuple[Exponent, float]] = [((), c)]
            for j in alpha:
                parts = [(e + (k,), v * ck) for e, v in parts for k, ck in _power_in_chebyshev(j)]
            for e, v in parts:
                out[e] = out.get(e, 0.0) + v
        return {e: v for e, v in out.items() if v != 0.0}

    def reference_moments(self, degree: int) -> dict[Exponent, float]:
        axis = [0.0] * (degree + 1)
        for k in range(0, degree + 1, 2):
            axis[k] = 2.0 / (1.0 - k * k)
        return {a: math.prod(axis[j] for j in a) for a in monomials(self.n, degree)}

    def row_weights(self, rows: list[Exponent]) -> list[float]:
        return [1.0] * len(rows)


BASES = ("monomial", "monomial-unscaled", "chebyshev")


def make_basis(name: str, n: int, measure: MeasureSpec):
    if name == "monomial":
        return MonomialBasis(n, measure, scaled=True)
    if name == "monomial-unscaled":
        return MonomialBasis(n, measure, scaled=False)
    if name == "chebyshev":
        return ChebyshevBasis(n, measure)
    raise ValueError(f"unknown basis {name!r}; choose from {BASES}")
