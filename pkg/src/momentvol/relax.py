"""Assembly of the moment relaxations Q_d and Q_d with Stokes rows.

Decision variables are p stacked pseudo-moment vectors y^1..y^p, each indexed
by the basis elements of degree <= 2d in graded-lex order.  Every PSD block is
stored as an affine map ``const + coef @ x`` on its upper triangle, packed
column by column.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .basis import make_basis
from .measures import density_factors
from .poly import Exponent, Polynomial, diff, monomials, product_of
from .semialg import ProblemSpec

PRUNE_TOL = 1e-14


class DegreeError(ValueError):
    pass


@dataclass(frozen=True)
class MonomialIndex:
    n: int
    d: int
    exponents: tuple[Exponent, ...]
    lookup: dict = field(repr=False, compare=False)

    @classmethod
    def build(cls, n: int, d: int) -> "MonomialIndex":
        exps = tuple(monomials(n, d))
        return cls(n, d, exps, {e: i for i, e in enumerate(exps)})

    def __len__(self) -> int:
        return len(self.exponents)

    def __getitem__(self, alpha) -> int:
        return self.lookup[tuple(alpha)]


def s(n: int, d: int) -> int:
    """Dimension of the space of polynomials of degree <= d in n variables."""
    return math.comb(n + d, d)


def tri_index(i: int, j: int) -> int:
    """Packed position of entry (i, j), i <= j, in a column-wise upper triangle."""
    if i > j:
        i, j = j, i
    return j * (j + 1) // 2 + i


def tri_len(size: int) -> int:
    return size * (size + 1) // 2


@dataclass(frozen=True)
class PsdBlock:
    """Symmetric matrix M(x) = const + coef @ x, stored as packed upper triangles."""

    name: str
    size: int
    const: np.ndarray
    coef: sp.csr_matrix

    def matrix(self, x: np.ndarray) -> np.ndarray:
        v = self.const + self.coef @ x
        return unpack(v, self.size)


def unpack(v: np.ndarray, size: int) -> np.ndarray:
    M = np.zeros((size, size))
    iu = np.triu_indices(size)
    # triu_indices is row-major; remap to our column-wise packing
    pos = iu[1] * (iu[1] + 1) // 2 + iu[0]
    M[iu] = v[pos]
    M[(iu[1], iu[0])] = v[pos]
    return M


@dataclass(frozen=True)
class StokesConstraint:
    piece: int
    alpha: Exponent
    k: int
    poly: Polynomial


@dataclass(frozen=True)
class ConicProblem:
    """maximize objective @ x  s.t.  every block PSD,  eq_matrix @ x == eq_rhs."""

    nvars: int
    objective: np.ndarray
    blocks: tuple[PsdBlock, ...]
    eq_matrix: sp.csr_matrix
    eq_rhs: np.ndarray
    p: int = 1
    n: int = 0
    d: int = 0
    basis: str = "monomial"
    var_index: MonomialIndex | None = None
    eq_labels: tuple = ()

    @property
    def piece_len(self) -> int:
        return self.nvars // self.p if self.p else 0

    def piece_slice(self, i: int) -> slice:
        L = self.piece_len
        return slice(i * L, (i + 1) * L)

    @property
    def n_eq(self) -> int:
        return self.eq_matrix.shape[0]

    def block_sizes(self) -> list[int]:
        return [b.size for b in self.blocks]

    def with_equalities(self, rows: sp.csr_matrix, rhs: np.ndarray, labels=()) -> "ConicProblem":
        A = sp.vstack([self.eq_matrix, rows], format="csr")
        b = np.concatenate([self.eq_rhs, rhs])
        return ConicProblem(self.nvars, self.objective, self.blocks, A, b, self.p, self.n, self.d,
                            self.basis, self.var_index, tuple(self.eq_labels) + tuple(labels))


# -- structural maps --------------------------------------------------------

def moment_matrix_map(n: int, d: int) -> list[list[Exponent]]:
    """Entry (a, b) of M_d is the moment of x^(a+b)."""
    rows = monomials(n, d)
    return [[tuple(x + y for x, y in zip(a, b)) for b in rows] for a in rows]


def localizing_radius(g: Polynomial) -> int:
    return math.ceil(g.degree / 2)


def localizing_matrix_map(g: Polynomial, n: int, d: int) -> list[list[dict[Exponent, float]]]:
    """Entry (a, b) of M_{d - r_g}(g y) as a linear form {exponent: coefficient}."""
    r = localizing_radius(g)
    if d < r:
        raise DegreeError(f"relaxation order {d} below localizing radius {r}")
    rows = monomials(n, d - r)
    out = []
    for a in rows:
        line = []
        for b in rows:
            entry: dict[Exponent, float] = {}
            for gam, c in g.terms.items():
                e = tuple(x + y + z for x, y, z in zip(a, b, gam))
                entry[e] = entry.get(e, 0.0) + c
            line.append(entry)
        out.append(line)
    return out


# -- assembly --------------------------------------------------------------

class _Assembler:
    def __init__(self, n: int, d: int, p: int, basis):
        self.n, self.d, self.p = n, d, p
        self.basis = basis
        self.var_index = MonomialIndex.build(n, 2 * d)
        self.L = len(self.var_index)
        self._prod_cache: dict = {}

    def prod(self, a: Exponent, b: Exponent):
        key = (a, b) if a <= b else (b, a)
        hit = self._prod_cache.get(key)
        if hit is None:
            hit = self.basis.product(*key)
            self._prod_cache[key] = hit
        return hit

    def riesz_row(self, poly_in_basis: dict[Exponent, float], piece: int) -> dict[int, float]:
        base = piece * self.L
        return {base + self.var_index[e]: c for e, c in poly_in_basis.items()}

    def localizing_entries(self, g_basis: dict[Exponent, float], rows: list[Exponent]):
        """Yield (i, j, {exponent: coef}) for the upper triangle of M(g y)."""
        for j, b in enumerate(rows):
            for i in range(j + 1):
                a = rows[i]
                entry: dict[Exponent, float] = {}
                for c, w in self.prod(a, b):
                    for gam, gc in g_basis.items():
                        for e, v in self.prod(c, gam):
                            entry[e] = entry.get(e, 0.0) + w * gc * v
                yield i, j, entry

    def block(self, name: str, g_basis, rows, pieces_coef: dict[int, float],
              ref: dict[Exponent, float] | None) -> PsdBlock:
        """Block sum_i pieces_coef[i] * M(g y^i) (+ M(g z) if ref given), row-scaled."""
        size = len(rows)
        w = self.basis.row_weights(rows)
        const = np.zeros(tri_len(size))
        ri, ci, vals = [], [], []
        for i, j, entry in self.localizing_entries(g_basis, rows):
            t = tri_index(i, j)
            scale = w[i] * w[j]
            for e, v in entry.items():
                v *= scale
                if abs(v) < PRUNE_TOL:
                    continue
                if ref is not None:
                    const[t] += v * ref[e]
                idx = self.var_index[e]
                for piece, pc in pieces_coef.items():
                    ri.append(t)
                    ci.append(piece * self.L + idx)
                    vals.append(pc * v)
        coef = sp.csr_matrix((vals, (ri, ci)), shape=(tri_len(size), self.p * self.L))
        coef.sum_duplicates()
        return PsdBlock(name, size, const, coef)


def _basis_for(spec: ProblemSpec, basis):
    if basis is None or isinstance(basis, str):
        return make_basis(basis or "monomial", spec.dimension, spec.measure)
    return basis


def min_order(spec: ProblemSpec) -> int:
    """d0: the largest localizing radius over all constraints (at least 1)."""
    return max([1] + [localizing_radius(g) for b in spec.union.pieces for g in b.inequalities])


def build_qd(spec: ProblemSpec, d: int, f: Polynomial | None = None, basis=None) -> ConicProblem:
    """Moment relaxation of order d for the union in ``spec`` (working coordinates)."""
    if not spec.normalized:
        raise ValueError("build_qd expects a normalised spec")
    d0 = min_order(spec)
    if d < d0:
        raise DegreeError(f"order d={d} is below d0={d0}")
    n, p = spec.dimension, spec.p
    basis = _basis_for(spec, basis)
    asm = _Assembler(n, d, p, basis)
    one = {(0,) * n: 1.0}
    rows_d = monomials(n, d)
    ref = basis.reference_moments(2 * d)

    blocks = [asm.block("M(z - sum y)", one, rows_d, {i: -1.0 for i in range(p)}, ref)]
    for i, piece in enumerate(spec.union.pieces):
        blocks.append(asm.block(f"M(y{i + 1})", one, rows_d, {i: 1.0}, None))
    for i, piece in enumerate(spec.union.pieces):
        for j, g in enumerate(piece.inequalities):
            rows = monomials(n, d - localizing_radius(g))
            blocks.append(asm.block(f"M(g{i + 1},{j + 1} y{i + 1})", basis.expand(g), rows, {i: 1.0}, None))

    f = f if f is not None else Polynomial.constant(n, 1.0)
    if f.degree > 2 * d:
        raise DegreeError("objective degree exceeds 2d")
    obj = np.zeros(p * asm.L)
    fb = basis.expand(f)
    for i in range(p):
        for k, v in asm.riesz_row(fb, i).items():
            obj[k] += v
    empty = sp.csr_matrix((0, p * asm.L))
    return ConicProblem(p * asm.L, obj, tuple(blocks), empty, np.zeros(0), p, n, d,
                        basis.name, asm.var_index)


def stokes_polynomial(alpha: Sequence[int], k: int, g: Polynomial, q: Polynomial,
                      r: Polynomial) -> Polynomial:
    """q d_k(x^a g) + 2 x^a g d_k q + x^a g q d_k r  (k counted from 1)."""
    xg = g.shift(alpha)
    return q * diff(xg, k) + 2.0 * xg * diff(q, k) + xg * q * diff(r, k)


def stokes_vanishing_product(spec: ProblemSpec, dedup: bool = True) -> Polynomial:
    """Product of every constraint polynomial across all pieces."""
    factors: list[Polynomial] = []
    for b in spec.union.pieces:
        for g in b.inequalities:
            if dedup and g in factors:
                continue
            factors.append(g)
    return product_of(factors, spec.dimension)


def stokes_polynomials(spec: ProblemSpec, d: int, dedup: bool = True) -> list[StokesConstraint]:
    """All rows L_{y^i}(p_{a,k}) = 0 whose polynomial stays within degree 2d."""
    n = spec.dimension
    q, r = density_factors(spec.measure, n)
    g = stokes_vanishing_product(spec, dedup=dedup)
    out = []
    # deg p_{a,k} >= |a| + deg g - 1, so larger |a| cannot pass the gate
    amax = 2 * d - g.degree + 1
    if amax < 0:
        return out
    polys = {}
    for alpha in monomials(n, amax):
        for k in range(1, n + 1):
            pk = stokes_polynomial(alpha, k, g, q, r)
            if pk.is_zero() or pk.degree > 2 * d:
                continue
            polys[(alpha, k)] = pk
    for i in range(spec.p):
        for (alpha, k), pk in polys.items():
            out.append(StokesConstraint(i, alpha, k, pk))
    return out


def stokes_rows(spec: ProblemSpec, d: int, basis=None, dedup: bool = True):
    basis = _basis_for(spec, basis)
    L = s(spec.dimension, 2 * d)
    index = MonomialIndex.build(spec.dimension, 2 * d)
    cons = stokes_polynomials(spec, d, dedup=dedup)
    ri, ci, vals = [], [], []
    for row, c in enumerate(cons):
        coeffs = basis.expand(c.poly)
        # rows are homogeneous (rhs 0), so normalising them is free
        top = max(abs(v) for v in coeffs.values())
        for e, v in coeffs.items():
            v /= top
            if abs(v) < PRUNE_TOL:
                continue
            ri.append(row)
            ci.append(c.piece * L + index[e])
            vals.append(v)
    A = sp.csr_matrix((vals, (ri, ci)), shape=(len(cons), spec.p * L))
    labels = tuple((c.piece, c.alpha, c.k) for c in cons)
    return A, np.zeros(len(cons)), labels


def build_qd_stokes(spec: ProblemSpec, d: int, basis=None, dedup: bool = True) -> ConicProblem:
    basis = _basis_for(spec, basis)
    prob = build_qd(spec, d, basis=basis)
    A, b, labels = stokes_rows(spec, d, basis=basis, dedup=dedup)
    if A.shape[0] == 0:
        return prob
    return prob.with_equalities(A, b, labels)


def monomial_moment_rows(problem: ConicProblem, basis, alphas: Sequence[Exponent]) -> np.ndarray:
    """Matrix R with (R @ y_piece)[t] = L_y(x^alphas[t]) for one piece's variables."""
    R = np.zeros((len(alphas), problem.piece_len))
    for t, a in enumerate(alphas):
        for e, v in basis.expand(Polynomial.monomial(a)).items():
            R[t, problem.var_index[e]] += v
    return R
