"""Unions of basic semi-algebraic sets and the problem file format."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from itertools import combinations, product
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .measures import MeasureSpec
from .poly import AffineMap, Polynomial, evaluate_many, parse, substitute_affine, to_string

SCHEMA_VERSION = 1
DEFAULT_PIECE_CAP = 256


class ProblemFileError(ValueError):
    pass


@dataclass(frozen=True)
class BasicSet:
    """{x : g(x) >= 0 for every g in inequalities}."""

    name: str
    inequalities: tuple[Polynomial, ...]

    def __post_init__(self):
        ineqs = tuple(self.inequalities)
        object.__setattr__(self, "inequalities", ineqs)
        if not ineqs:
            raise ValueError(f"basic set {self.name!r} needs at least one inequality")
        if len({g.n for g in ineqs}) != 1:
            raise ValueError(f"basic set {self.name!r} mixes dimensions")

    @property
    def n(self) -> int:
        return self.inequalities[0].n

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.ones(pts.shape[0], dtype=bool)
        for g in self.inequalities:
            ok &= evaluate_many(g, pts) >= 0.0
        return ok


@dataclass(frozen=True)
class UnionSet:
    pieces: tuple[BasicSet, ...]

    def __post_init__(self):
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not pieces:
            raise ValueError("a union needs at least one piece")
        if len({b.n for b in pieces}) != 1:
            raise ValueError("union pieces have different dimensions")

    @property
    def p(self) -> int:
        return len(self.pieces)


@dataclass(frozen=True)
class ProblemSpec:
    """Measure, union and the internal change of variables.

    ``scaling`` maps original coordinates to working coordinates; the
    polynomials in ``union`` are always expressed in working coordinates.
    ``mass_rescale`` converts working-measure values to original units.
    """

    dimension: int
    measure: MeasureSpec
    union: UnionSet
    variables: tuple[str, ...] = ()
    box: tuple[tuple[float, float], ...] | None = None
    scaling: AffineMap | None = None
    mass_rescale: float = 1.0
    normalized: bool = False
    name: str = ""

    def __post_init__(self):
        n = self.dimension
        if not self.variables:
            object.__setattr__(self, "variables", tuple(f"x{i + 1}" for i in range(n)))
        object.__setattr__(self, "variables", tuple(self.variables))
        if self.scaling is None:
            object.__setattr__(self, "scaling", AffineMap.identity(n))
        if self.box is None and self.measure.box is not None:
            object.__setattr__(self, "box", self.measure.box)
        if self.box is not None:
            box = tuple((float(lo), float(hi)) for lo, hi in self.box)
            object.__setattr__(self, "box", box)
            if len(box) != n or any(not lo < hi for lo, hi in box):
                raise ValueError("box must have one non-degenerate interval per axis")
        if self.measure.kind == "lebesgue" and self.box is None:
            raise ValueError("lebesgue measure requires a box")
        if self.union.pieces[0].n != n:
            raise ValueError("union dimension does not match problem dimension")
        if len(self.variables) != n:
            raise ValueError("need one variable name per dimension")

    @property
    def p(self) -> int:
        return self.union.p

    def piece_counts(self) -> list[int]:
        return [len(b.inequalities) for b in self.union.pieces]

    def box_polynomials(self) -> list[Polynomial]:
        """The n quadratics 1 - x_k^2 (working coordinates of a normalised box)."""
        n = self.dimension
        return [Polynomial(n, {(0,) * n: 1.0, tuple(2 if i == k else 0 for i in range(n)): -1.0})
                for k in range(n)]

    def fingerprint(self) -> str:
        blob = json.dumps(to_document(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def normalize(raw: ProblemSpec) -> ProblemSpec:
    """Rescale a Lebesgue box onto [-1, 1]^n; other measures pass through."""
    if raw.normalized:
        return raw
    n = raw.dimension
    if raw.measure.kind != "lebesgue":
        return replace(raw, normalized=True, scaling=AffineMap.identity(n), mass_rescale=1.0)
    if raw.box is None:
        raise ValueError("lebesgue problem has no box")
    half = tuple((hi - lo) / 2.0 for lo, hi in raw.box)
    mid = tuple((hi + lo) / 2.0 for lo, hi in raw.box)
    to_orig = AffineMap(half, mid)
    to_work = to_orig.inverse()
    if to_orig.is_identity():
        pieces = raw.union.pieces
    else:
        pieces = tuple(BasicSet(b.name, tuple(substitute_affine(g, to_orig) for g in b.inequalities))
                       for b in raw.union.pieces)
    unit = tuple((-1.0, 1.0) for _ in range(n))
    return replace(raw, union=UnionSet(pieces), box=unit,
                   measure=MeasureSpec("lebesgue", box=unit),
                   scaling=to_work, mass_rescale=raw.mass_rescale * to_orig.jacobian(),
                   normalized=True)


def _constraint_key(ineqs: Sequence[Polynomial]) -> tuple:
    return tuple(sorted(tuple(sorted(g.terms.items())) for g in ineqs))


def _is_null(ineqs: Sequence[Polynomial]) -> bool:
    """True if some non-constant h appears as both h >= 0 and -h >= 0.

    Such a piece lies in the zero set {h = 0}, which is null for every
    supported measure, so it can be dropped from a cover of the complement.
    """
    return any(h.degree > 0 and -h in ineqs for h in ineqs)


def complement_union(spec: ProblemSpec, cap: int = DEFAULT_PIECE_CAP) -> ProblemSpec:
    """Cover B \\ Omega (or R^n \\ Omega) by basic sets via De Morgan.

    Each piece reverses one chosen inequality from every original piece.
    Pieces confined to a polynomial zero set are dropped (they are null).
    """
    if not spec.normalized:
        raise ValueError("complement_union expects a normalised spec")
    counts = spec.piece_counts()
    total = math.prod(counts)
    if total > cap:
        raise ValueError(f"complement would need {total} pieces (cap {cap})")
    box_rows = spec.box_polynomials() if spec.measure.kind == "lebesgue" else []
    seen = set()
    pieces = []
    for choice in product(*(range(m) for m in counts)):
        ineqs = []
        for piece, j in zip(spec.union.pieces, choice):
            g = -piece.inequalities[j]
            if g not in ineqs:
                ineqs.append(g)
        ineqs.extend(box_rows)
        if _is_null(ineqs):
            continue
        key = _constraint_key(ineqs)
        if key in seen:
            continue
        seen.add(key)
        label = "not(" + ",".join(f"{b.name}[{j}]" for b, j in zip(spec.union.pieces, choice)) + ")"
        pieces.append(BasicSet(label, tuple(ineqs)))
    if not pieces:
        # every selection was null: keep one provably empty piece so the
        # relaxation machinery still applies (it forces y = 0)
        pieces.append(BasicSet("empty", (Polynomial.constant(spec.dimension, -1.0),)))
    name = f"complement of {spec.name}" if spec.name else "complement"
    return replace(spec, union=UnionSet(tuple(pieces)), name=name)


def k_intersections(spec: ProblemSpec, k: int) -> list[BasicSet]:
    if not 1 <= k <= spec.p:
        raise ValueError(f"k must lie in 1..{spec.p}")
    out = []
    for combo in combinations(spec.union.pieces, k):
        ineqs = tuple(g for b in combo for g in b.inequalities)
        out.append(BasicSet("&".join(b.name for b in combo), ineqs))
    return out


def with_pieces(spec: ProblemSpec, pieces: Sequence[BasicSet], name: str = "") -> ProblemSpec:
    return replace(spec, union=UnionSet(tuple(pieces)), name=name or spec.name)


def membership(spec: ProblemSpec, point) -> bool | np.ndarray:
    """Non-strict membership in the union; accepts one point or an (N, n) array."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != spec.dimension:
        raise ValueError("point dimension mismatch")
    hit = np.zeros(pts.shape[0], dtype=bool)
    for b in spec.union.pieces:
        hit |= b.contains(pts)
    return bool(hit[0]) if single else hit


# -- problem files --------------------------------------------------------

def _require(doc: dict, key: str):
    if key not in doc:
        raise ProblemFileError(f"missing field {key!r}")
    return doc[key]


def from_document(doc: dict, name: str = "") -> ProblemSpec:
    if not isinstance(doc, dict):
        raise ProblemFileError("problem document must be a mapping")
    version = doc.get("schema", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ProblemFileError(f"unsupported schema version {version}")
    n = int(_require(doc, "dimension"))
    variables = doc.get("variables") or [f"x{i + 1}" for i in range(n)]
    if len(variables) != n:
        raise ProblemFileError("variables list length differs from dimension")
    m = _require(doc, "measure")
    try:
        measure = MeasureSpec(kind=_require(m, "kind"), box=m.get("box"), sigma2=m.get("sigma2"))
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"measure: {exc}") from exc
    sets = _require(doc, "sets")
    if not sets:
        raise ProblemFileError("at least one set is required")
    pieces = []
    for i, s in enumerate(sets):
        ineqs = []
        for j, text in enumerate(_require(s, "inequalities")):
            try:
                ineqs.append(parse(str(text), variables))
            except ValueError as exc:
                raise ProblemFileError(f"sets[{i}].inequalities[{j}]: {exc}") from exc
        try:
            pieces.append(BasicSet(str(s.get("name", f"set{i + 1}")), tuple(ineqs)))
        except ValueError as exc:
            raise ProblemFileError(str(exc)) from exc
    try:
        return ProblemSpec(n, measure, UnionSet(tuple(pieces)), variables=tuple(variables),
                           box=measure.box, name=doc.get("name", name))
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc


def to_document(spec: ProblemSpec) -> dict:
    doc = {
        "schema": SCHEMA_VERSION,
        "name": spec.name,
        "dimension": spec.dimension,
        "variables": list(spec.variables),
        "measure": spec.measure.to_dict(),
        "sets": [{"name": b.name, "inequalities": [to_string(g, spec.variables) for g in b.inequalities]}
                 for b in spec.union.pieces],
    }
    return doc


def load_problem(path: str | Path) -> ProblemSpec:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ProblemFileError(f"{path}: malformed document{where}") from exc
    try:
        return from_document(doc, name=path.stem)
    except ProblemFileError as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc


def dump_problem(spec: ProblemSpec, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(to_document(spec), sort_keys=False))
