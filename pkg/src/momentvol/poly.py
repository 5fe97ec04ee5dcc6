"""Sparse multivariate polynomials over the reals.

A :class:`Polynomial` is an immutable map ``exponent tuple -> float``.  Zero
coefficients are never stored (exact ``0.0`` test, no epsilon pruning).
Monomials are ordered graded-lexicographically wherever an order matters.

Expression grammar accepted by :func:`parse` (whitespace is insignificant)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { "*" , unary } ;
    unary   = ("-" | "+") , unary | power ;
    power   = atom , [ "^" , integer ] ;
    atom    = number | name | "(" , expr , ")" ;
    number  = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ]
            | "." , digits , [ exponent part ] ;
    name    = letter , { letter | digit | "_" } ;

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import product as iproduct
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]


def grlex_key(alpha: Exponent) -> tuple:
    """Sort key for graded-lex order: total degree first, then x1 power descending."""
    return (sum(alpha), tuple(-a for a in alpha))


def monomials(n: int, d: int) -> list[Exponent]:
    """All exponents of n variables with total degree <= d, graded-lex ordered."""
    out: list[Exponent] = []
    for deg in range(d + 1):
        out.extend(_monomials_of_degree(n, deg))
    return out


def _monomials_of_degree(n: int, deg: int) -> list[Exponent]:
    if n == 0:
        return [()] if deg == 0 else []
    if n == 1:
        return [(deg,)]
    res = []
    for first in range(deg, -1, -1):
        for rest in _monomials_of_degree(n - 1, deg - first):
            res.append((first,) + rest)
    return res


class Polynomial:
    """Immutable sparse polynomial in ``n`` variables."""

    __slots__ = ("_n", "_terms", "_hash")

    def __init__(self, n: int, terms: Mapping[Sequence[int], float] | None = None):
        if n < 0:
            raise ValueError("dimension must be non-negative")
        clean: dict[Exponent, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n:
                raise ValueError(f"exponent {alpha} does not have dimension {n}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
                if clean[alpha] == 0.0:
                    del clean[alpha]
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_terms", MappingProxyType(clean))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, n: int, c: float) -> "Polynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n)

    @classmethod
    def variable(cls, n: int, k: int) -> "Polynomial":
        """The coordinate x_k, with k counted from 0."""
        alpha = [0] * n
        alpha[k] = 1
        return cls(n, {tuple(alpha): 1.0})

    @classmethod
    def monomial(cls, alpha: Sequence[int], c: float = 1.0) -> "Polynomial":
        return cls(len(alpha), {tuple(alpha): c})

    # -- basic properties -------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def terms(self) -> Mapping[Exponent, float]:
        return self._terms

    @property
    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(a) for a in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def sorted_terms(self) -> list[tuple[Exponent, float]]:
        return sorted(self._terms.items(), key=lambda t: grlex_key(t[0]))

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._n == other._n and dict(self._terms) == dict(other._terms)
        if isinstance(other, (int, float)):
            return self == Polynomial.constant(self._n, other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self._n, frozenset(self._terms.items()))))
        return self._hash

    def __repr__(self) -> str:
        names = [f"x{i + 1}" for i in range(self._n)]
        return f"Polynomial({self.to_string(names)!r})"

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other._n != self._n:
                raise ValueError(f"dimension mismatch: {self._n} vs {other._n}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self._n, float(other))
        raise TypeError(f"cannot combine Polynomial with {type(other).__name__}")

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        terms = dict(self._terms)
        for a, c in other._terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return Polynomial(self._n, terms)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self._n, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        return mul(self, self._coerce(other))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Polynomial.constant(self._n, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self._n, {a: c * v for a, v in self._terms.items()})

    def shift(self, alpha: Sequence[int]) -> "Polynomial":
        """Multiply by the monomial x^alpha."""
        alpha = tuple(alpha)
        return Polynomial(self._n, {tuple(a + b for a, b in zip(e, alpha)): c
                                    for e, c in self._terms.items()})

    def diff(self, k: int) -> "Polynomial":
        return diff(self, k)

    def __call__(self, point) -> float:
        return evaluate(self, point)

    def to_string(self, names: Sequence[str]) -> str:
        return to_string(self, names)


def mul(a: Polynomial, b: Polynomial) -> Polynomial:
    """Sparse product of two polynomials of equal dimension."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    out: dict[Exponent, float] = {}
    for ea, ca in a.terms.items():
        for eb, cb in b.terms.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return Polynomial(a.n, out)


def diff(a: Polynomial, k: int) -> Polynomial:
    """Partial derivative with respect to x_k, k counted from 1."""
    if not 1 <= k <= a.n:
        raise IndexError(f"coordinate {k} out of range 1..{a.n}")
    i = k - 1
    out = {}
    for e, c in a.terms.items():
        if e[i] > 0:
            e2 = list(e)
            e2[i] -= 1
            out[tuple(e2)] = c * e[i]
    return Polynomial(a.n, out)


def evaluate(a: Polynomial, point) -> float:
    """Direct term-by-term evaluation at one point."""
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.size != a.n:
        raise ValueError(f"point has dimension {x.size}, polynomial has {a.n}")
    total = 0.0
    for e, c in a.terms.items():
        total += c * math.prod(xi ** ei for xi, ei in zip(x, e))
    return total


def evaluate_many(a: Polynomial, points: np.ndarray) -> np.ndarray:
    """Vectorised evaluation on an (N, n) array of points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != a.n:
        raise ValueError(f"expected shape (N, {a.n}), got {pts.shape}")
    out = np.zeros(pts.shape[0])
    for e, c in a.terms.items():
        term = np.full(pts.shape[0], c)
        for k, ek in enumerate(e):
            if ek:
                term *= pts[:, k] ** ek
        out += term
    return out


@dataclass(frozen=True)
class AffineMap:
    """Coordinate-wise map x -> scale * x + offset with positive scale."""

    scale: tuple[float, ...]
    offset: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "scale", tuple(float(s) for s in self.scale))
        object.__setattr__(self, "offset", tuple(float(s) for s in self.offset))
        if len(self.scale) != len(self.offset):
            raise ValueError("scale and offset lengths differ")
        if any(not s > 0 for s in self.scale):
            raise ValueError("scale entries must be strictly positive")

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls((1.0,) * n, (0.0,) * n)

    @property
    def n(self) -> int:
        return len(self.scale)

    def is_identity(self) -> bool:
        return all(s == 1.0 for s in self.scale) and all(o == 0.0 for o in self.offset)

    def inverse(self) -> "AffineMap":
        return AffineMap(tuple(1.0 / s for s in self.scale),
                         tuple(-o / s for s, o in zip(self.scale, self.offset)))

    def jacobian(self) -> float:
        return math.prod(self.scale)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x * np.asarray(self.scale) + np.asarray(self.offset)

    def to_dict(self) -> dict:
        return {"scale": list(self.scale), "offset": list(self.offset)}


def substitute_affine(a: Polynomial, m: AffineMap) -> Polynomial:
    """Return the composition a(m(x)), fully expanded."""
    if m.n != a.n:
        raise ValueError(f"dimension mismatch: map {m.n} vs polynomial {a.n}")
    n = a.n
    # per-axis powers (s*x + o)^j as coefficient lists in x
    maxdeg = [max((e[k] for e in a.terms), default=0) for k in range(n)]
    axis_pows: list[list[list[float]]] = []
    for k in range(n):
        s, o = m.scale[k], m.offset[k]
        pows = [[1.0]]
        for _ in range(maxdeg[k]):
            prev = pows[-1]
            nxt = [0.0] * (len(prev) + 1)
            for i, c in enumerate(prev):
                nxt[i] += c * o
                nxt[i + 1] += c * s
            pows.append(nxt)
        axis_pows.append(pows)
    out: dict[Exponent, float] = {}
    for e, c in a.terms.items():
        factors = [axis_pows[k][e[k]] for k in range(n)]
        for idx in iproduct(*(range(len(f)) for f in factors)):
            v = c
            for k, i in enumerate(idx):
                v *= factors[k][i]
            if v != 0.0:
                out[idx] = out.get(idx, 0.0) + v
    return Polynomial(n, out)


def product_of(polys: Iterable[Polynomial], n: int) -> Polynomial:
    result = Polynomial.constant(n, 1.0)
    for p in polys:
        result = result * p
    return result


# -- printing -------------------------------------------------------------

def _monomial_str(alpha: Exponent, names: Sequence[str]) -> str:
    parts = []
    for name, e in zip(names, alpha):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def to_string(a: Polynomial, names: Sequence[str]) -> str:
    """Render in graded-lex order; :func:`parse` reads the result back exactly."""
    if len(names) != a.n:
        raise ValueError("need one name per variable")
    if a.is_zero():
        return "0"
    pieces = []
    for i, (alpha, c) in enumerate(a.sorted_terms()):
        mono = _monomial_str(alpha, names)
        sign = "-" if c < 0 else "+"
        mag = repr(abs(c))
        body = mag if not mono else (mono if abs(c) == 1.0 else f"{mag}*{mono}")
        if i == 0:
            pieces.append(("-" if sign == "-" else "") + body)
        else:
            pieces.append(f" {sign} {body}")
    return "".join(pieces)


# -- parsing --------------------------------------------------------------

class PolynomialSyntaxError(ValueError):
    """Raised by :func:`parse`; ``pos`` is the 0-based character offset."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}" + (f" in {text!r}" if text else ""))


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if not m:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PolynomialSyntaxError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.names = {v: i for i, v in enumerate(names)}
        self.n = len(names)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise PolynomialSyntaxError(msg, tok[2], self.text)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            self.error("empty expression")
        p = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            p = p * self.unary()
        return p

    def unary(self) -> Polynomial:
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("-", "+"):
            self.take()
            p = self.unary()
            return -p if tok[1] == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[0] == "op" and tok[1] in ("-", "+"):
                if tok[1] == "-":
                    self.error("negative exponent", tok)
                self.take()
                tok = self.peek()
            if tok[0] != "num":
                self.error("exponent must be a non-negative integer literal", tok)
            if not tok[1].isdigit():
                self.error(f"fractional exponent {tok[1]!r}", tok)
            self.take()
            return base ** int(tok[1])
        return base

    def atom(self) -> Polynomial:
        tok = self.take()
        kind, val, pos = tok
        if kind == "num":
            return Polynomial.constant(self.n, float(val))
        if kind == "name":
            if val not in self.names:
                raise PolynomialSyntaxError(f"unknown variable {val!r}", pos, self.text)
            return Polynomial.variable(self.n, self.names[val])
        if kind == "op" and val == "(":
            p = self.expr()
            close = self.take()
            if close[1] != ")":
                self.error("expected ')'", close)
            return p
        self.error(f"unexpected token {val!r}" if kind != "end" else "unexpected end of input", tok)


def parse(text: str, names: Sequence[str]) -> Polynomial:
    """Parse an infix polynomial expression over the given variable names."""
    if len(set(names)) != len(names):
        raise ValueError("duplicate variable names")
    return _Parser(text, list(names)).parse()
