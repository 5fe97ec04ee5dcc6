"""Closed-form moments of the supported reference measures.

* ``lebesgue``: Lebesgue measure restricted to a box.
* ``gaussian``: density ``exp(-|x|^2 / sigma2)`` on R^n (not normalised).
* ``exponential``: density ``exp(-sum x_k)`` on the positive orthant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .poly import Exponent, Polynomial, monomials

KINDS = ("lebesgue", "gaussian", "exponential")


@dataclass(frozen=True)
class MeasureSpec:
    kind: str
    box: tuple[tuple[float, float], ...] | None = None
    sigma2: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}; expected one of {KINDS}")
        if self.box is not None:
            box = tuple((float(lo), float(hi)) for lo, hi in self.box)
            object.__setattr__(self, "box", box)
            for lo, hi in box:
                if not lo < hi:
                    raise ValueError(f"degenerate box interval [{lo}, {hi}]")
        if self.kind == "lebesgue" and self.box is None:
            raise ValueError("lebesgue measure requires a box")
        if self.kind == "gaussian":
            if self.sigma2 is None or not self.sigma2 > 0:
                raise ValueError("gaussian measure requires sigma2 > 0")
            object.__setattr__(self, "sigma2", float(self.sigma2))

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.box is not None:
            d["box"] = [list(iv) for iv in self.box]
        if self.sigma2 is not None:
            d["sigma2"] = self.sigma2
        return d


@dataclass(frozen=True)
class MomentVector:
    """Moments ``z_alpha`` for all |alpha| <= degree, keyed by exponent tuple."""

    n: int
    degree: int
    values: Mapping[Exponent, float] = field(repr=False)

    def __getitem__(self, alpha: Sequence[int]) -> float:
        alpha = tuple(alpha)
        if sum(alpha) > self.degree:
            raise KeyError(f"moment {alpha} beyond degree {self.degree}")
        return self.values[alpha]

    @property
    def mass(self) -> float:
        return self.values[(0,) * self.n]

    def as_array(self, order: Sequence[Exponent]) -> np.ndarray:
        return np.array([self.values[a] for a in order])

    def integrate(self, p: Polynomial) -> float:
        """Riesz functional: integral of ``p`` against the measure."""
        return sum(c * self[a] for a, c in p.terms.items())


def _from_axis_moments(axis: list[list[float]], degree: int) -> MomentVector:
    n = len(axis)
    vals = {a: math.prod(axis[k][a[k]] for k in range(n)) for a in monomials(n, degree)}
    return MomentVector(n, degree, vals)


def lebesgue_axis_moments(lo: float, hi: float, degree: int) -> list[float]:
    return [(hi ** (j + 1) - lo ** (j + 1)) / (j + 1) for j in range(degree + 1)]


def gaussian_axis_moments(sigma2: float, degree: int) -> list[float]:
    """int x^j exp(-x^2/sigma2) dx via m(2j) = sigma2 (2j-1)/2 m(2j-2)."""
    out = [0.0] * (degree + 1)
    out[0] = math.sqrt(math.pi * sigma2)  # sigma * Gamma(1/2)
    for j in range(2, degree + 1, 2):
        out[j] = out[j - 2] * sigma2 * (j - 1) / 2.0
    return out


def exponential_axis_moments(degree: int) -> list[float]:
    return [float(math.factorial(j)) for j in range(degree + 1)]


def lebesgue_moments(box: Sequence[Sequence[float]], degree: int) -> MomentVector:
    axis = [lebesgue_axis_moments(lo, hi, degree) for lo, hi in box]
    return _from_axis_moments(axis, degree)


def gaussian_moments(sigma2: float, n: int, degree: int) -> MomentVector:
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    axis = gaussian_axis_moments(sigma2, degree)
    return _from_axis_moments([axis] * n, degree)


def exponential_moments(n: int, degree: int) -> MomentVector:
    return _from_axis_moments([exponential_axis_moments(degree)] * n, degree)


def axis_moments(spec: MeasureSpec, n: int, degree: int) -> list[list[float]]:
    """One-dimensional moment sequences whose products give the n-D moments."""
    if spec.kind == "lebesgue":
        return [lebesgue_axis_moments(lo, hi, degree) for lo, hi in spec.box]
    if spec.kind == "gaussian":
        return [gaussian_axis_moments(spec.sigma2, degree)] * n
    return [exponential_axis_moments(degree)] * n


def moments(spec: MeasureSpec, n: int, degree: int) -> MomentVector:
    if spec.kind == "lebesgue":
        if len(spec.box) != n:
            raise ValueError("box dimension does not match n")
        return lebesgue_moments(spec.box, degree)
    if spec.kind == "gaussian":
        return gaussian_moments(spec.sigma2, n, degree)
    return exponential_moments(n, degree)


def total_mass(spec: MeasureSpec, n: int) -> float:
    return moments(spec, n, 0).mass


def density_factors(spec: MeasureSpec, n: int) -> tuple[Polynomial, Polynomial]:
    """Polynomials (q, r) with density q * exp(r) on the support."""
    q = Polynomial.constant(n, 1.0)
    if spec.kind == "lebesgue":
        return q, Polynomial.zero(n)
    if spec.kind == "gaussian":
        c = -1.0 / spec.sigma2
        return q, Polynomial(n, {tuple(2 if i == k else 0 for i in range(n)): c for k in range(n)})
    return q, Polynomial(n, {tuple(1 if i == k else 0 for i in range(n)): -1.0 for k in range(n)})
