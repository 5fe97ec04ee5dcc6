"""Hierarchy driver: upper bounds, complement lower bounds, Bonferroni, moments.

Every value leaving this module is in the ORIGINAL measure units of the
problem (working-coordinate optima times ``mass_rescale``).
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .basis import BASES, make_basis
from .measures import total_mass
from .poly import Exponent, Polynomial, monomials, substitute_affine
from .relax import build_qd, build_qd_stokes, min_order, monomial_moment_rows
from .semialg import (DEFAULT_PIECE_CAP, ProblemSpec, complement_union, k_intersections,
                      normalize, with_pieces)
from .solve import SolveResult, SolverSettings, solve

CSV_COLUMNS = ("d", "side", "stokes", "value", "status", "gap_eps", "wall_ms", "gap_eps_ref")
SIDES = ("upper", "lower")


class BoundError(RuntimeError):
    """A sub-solve did not return a usable optimum."""

    def __init__(self, message: str, d: int, result: SolveResult | None = None):
        super().__init__(message)
        self.d = d
        self.result = result


@dataclass(frozen=True)
class BoundsConfig:
    settings: SolverSettings = field(default_factory=SolverSettings)
    basis: str = "monomial"
    stokes_dedup: bool = True
    piece_cap: int = DEFAULT_PIECE_CAP
    basis_fallback: bool = True


@dataclass(frozen=True)
class MomentEstimate:
    alpha: Exponent
    value: float
    d: int


@dataclass(frozen=True)
class BoundRow:
    d: int
    side: str
    stokes: bool
    value: float
    status: str
    wall_ms: float
    gap_eps: float | None = None
    gap_eps_ref: float | None = None
    primal: float = math.nan
    dual: float = math.nan
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "near_optimal")

    def csv_record(self) -> dict:
        def num(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))
        return {"d": self.d, "side": self.side, "stokes": "true" if self.stokes else "false",
                "value": num(self.value), "status": self.status, "gap_eps": num(self.gap_eps),
                "wall_ms": f"{self.wall_ms:.1f}", "gap_eps_ref": num(self.gap_eps_ref)}


@dataclass
class BoundsReport:
    problem: str
    fingerprint: str
    rows: list[BoundRow]
    moments: dict[tuple[int, bool], list[MomentEstimate]] = field(default_factory=dict)
    reference: float | None = None
    metadata: dict = field(default_factory=dict)

    def row(self, d: int, side: str, stokes: bool) -> BoundRow | None:
        for r in self.rows:
            if (r.d, r.side, r.stokes) == (d, side, stokes):
                return r
        return None

    def series(self, side: str, stokes: bool) -> list[tuple[int, float]]:
        return [(r.d, r.value) for r in self.rows if r.side == side and r.stokes == stokes and r.ok]

    @property
    def all_optimal(self) -> bool:
        return all(r.status == "optimal" for r in self.rows)

    @property
    def any_failed(self) -> bool:
        return any(not r.ok for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r.csv_record())
        return buf.getvalue()

    def to_dict(self) -> dict:
        moments = []
        for (d, stokes), ests in sorted(self.moments.items()):
            for m in ests:
                moments.append({"d": d, "stokes": stokes, "alpha": list(m.alpha), "value": m.value})
        return {
            "problem": self.problem,
            "fingerprint": self.fingerprint,
            "reference": self.reference,
            "metadata": self.metadata,
            "rows": [dict(r.csv_record(), primal=r.primal, dual=r.dual, reason=r.reason)
                     for r in self.rows],
            "moments": moments,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- single bounds ----------------------------------------------------------

def _build(spec: ProblemSpec, d: int, use_stokes: bool, cfg: BoundsConfig):
    basis = make_basis(cfg.basis, spec.dimension, spec.measure)
    if use_stokes:
        return build_qd_stokes(spec, d, basis=basis, dedup=cfg.stokes_dedup), basis
    return build_qd(spec, d, basis=basis), basis


_STATUS_RANK = {"optimal": 0, "near_optimal": 1}


def _build_and_solve(spec: ProblemSpec, d: int, use_stokes: bool, cfg: BoundsConfig):
    """Solve in cfg.basis; if that is not certified optimal, try the other bases.

    The relaxation's value does not depend on the basis (it is a change of
    coordinates), only its conditioning does, so the best-certified result
    over the bases is as valid as any one of them.  Infeasible/unbounded
    answers are genuine and never trigger a fallback.
    """
    problem, basis = _build(spec, d, use_stokes, cfg)
    res = solve(problem, cfg.settings)
    if not cfg.basis_fallback or res.status not in ("near_optimal", "numerical_failure"):
        return problem, basis, res
    best = (problem, basis, res)
    for name in BASES:
        if name == cfg.basis:
            continue
        try:
            alt_problem, alt_basis = _build(spec, d, use_stokes, replace(cfg, basis=name))
        except ValueError:  # e.g. Chebyshev outside Lebesgue on [-1, 1]^n
            continue
        alt = solve(alt_problem, cfg.settings)
        if _STATUS_RANK.get(alt.status, 9) < _STATUS_RANK.get(best[2].status, 9):
            note = f"{cfg.basis} basis gave {res.status}; solved in the {name} basis"
            best = (alt_problem, alt_basis, replace(alt, reason=f"{note}. {alt.reason}".rstrip(". ")))
        if best[2].status == "optimal":
            break
    return best


def _working_upper(spec: ProblemSpec, d: int, use_stokes: bool, cfg: BoundsConfig):
    problem, basis, res = _build_and_solve(spec, d, use_stokes, cfg)
    if not res.ok:
        raise BoundError(f"d={d}: solver returned {res.status} ({res.reason})", d, res)
    return res.primal, res, problem, basis


def upper_bound(spec: ProblemSpec, d: int, use_stokes: bool = True,
                config: BoundsConfig | None = None) -> tuple[float, SolveResult]:
    """rho_bar_d >= mu(Omega), in original units."""
    cfg = config or BoundsConfig()
    spec = normalize(spec)
    value, res, _, _ = _working_upper(spec, d, use_stokes, cfg)
    return value * spec.mass_rescale, res


def lower_bound(spec: ProblemSpec, d: int, use_stokes: bool = True,
                config: BoundsConfig | None = None) -> tuple[float, SolveResult]:
    """rho_underbar_d = mu(B) - (upper bound on the complement) <= mu(Omega)."""
    cfg = config or BoundsConfig()
    spec = normalize(spec)
    comp = complement_union(spec, cap=cfg.piece_cap)
    value, res, _, _ = _working_upper(comp, d, use_stokes, cfg)
    mass = total_mass(spec.measure, spec.dimension)
    return (mass - value) * spec.mass_rescale, res


# -- moments ----------------------------------------------------------------

def extract_moments(spec: ProblemSpec, problem, basis, result: SolveResult,
                    order: int) -> list[MomentEstimate]:
    """Estimates of int_Omega x^a dmu for |a| <= order, in original coordinates."""
    spec = normalize(spec)
    n = spec.dimension
    order = min(order, 2 * problem.d)
    alphas = monomials(n, order)
    R = monomial_moment_rows(problem, basis, alphas)
    total = sum(R @ y for y in result.y)  # working-coordinate moments of sum_i y^i
    work = dict(zip(alphas, total))
    to_orig = spec.scaling.inverse()
    out = []
    for a in alphas:
        # x^a with x = to_orig(w), integrated against the working pseudo-moments
        poly = substitute_affine(Polynomial.monomial(a), to_orig)
        val = sum(c * work[e] for e, c in poly.terms.items())
        out.append(MomentEstimate(a, float(val * spec.mass_rescale), problem.d))
    return out


# -- sweeps -----------------------------------------------------------------

def _job(spec: ProblemSpec, comp: ProblemSpec | None, d: int, side: str, stokes: bool,
         cfg: BoundsConfig, moment_order: int):
    t0 = time.perf_counter()
    target = spec if side == "upper" else comp
    try:
        problem, basis, res = _build_and_solve(target, d, stokes, cfg)
    except Exception as exc:  # a failed row must not sink the sweep
        wall = (time.perf_counter() - t0) * 1e3
        return BoundRow(d, side, stokes, math.nan, "numerical_failure", wall,
                        reason=f"{type(exc).__name__}: {exc}"), None
    wall = (time.perf_counter() - t0) * 1e3
    if not res.ok:
        return BoundRow(d, side, stokes, math.nan, res.status, wall, primal=res.primal,
                        dual=res.dual, reason=res.reason), None
    if side == "upper":
        value = res.primal * spec.mass_rescale
    else:
        value = (total_mass(spec.measure, spec.dimension) - res.primal) * spec.mass_rescale
    row = BoundRow(d, side, stokes, value, res.status, wall, primal=res.primal, dual=res.dual,
                   reason=res.reason)
    moments = None
    if side == "upper" and moment_order >= 0:
        moments = extract_moments(spec, problem, basis, res, moment_order)
    return row, moments


def _stokes_modes(use_stokes) -> list[bool]:
    if use_stokes == "both":
        return [False, True]
    return [bool(use_stokes)]


def _sides(sides) -> list[str]:
    if sides == "both":
        return list(SIDES)
    if isinstance(sides, str):
        sides = [sides]
    for s in sides:
        if s not in SIDES:
            raise ValueError(f"unknown side {s!r}")
    return list(sides)


def sweep(spec: ProblemSpec, d_min: int, d_max: int, use_stokes=True, sides="both",
          config: BoundsConfig | None = None, workers: int = 1, moment_order: int = 2,
          reference: float | None = None) -> BoundsReport:
    """Solve every (d, side, stokes) job for d_min..d_max; failures become marked rows."""
    cfg = config or BoundsConfig()
    spec = normalize(spec)
    d0 = min_order(spec)
    if d_min < d0:
        raise ValueError(f"d_min={d_min} is below the minimal order d0={d0}")
    if d_max < d_min:
        raise ValueError("d_max must be >= d_min")
    side_list = _sides(sides)
    comp = complement_union(spec, cap=cfg.piece_cap) if "lower" in side_list else None
    jobs = [(d, side, st) for d in range(d_min, d_max + 1) for st in _stokes_modes(use_stokes)
            for side in side_list]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _job(spec, comp, *j, cfg, moment_order), jobs))
    else:
        results = [_job(spec, comp, *j, cfg, moment_order) for j in jobs]

    rows = [r for r, _ in results]
    moments = {(r.d, r.stokes): m for r, m in results if m is not None}
    rows = _with_gaps(rows, reference)
    rows.sort(key=lambda r: (r.d, SIDES.index(r.side), r.stokes))
    return BoundsReport(spec.name, spec.fingerprint(), rows, moments, reference,
                        {"d_min": d_min, "d_max": d_max, "basis": cfg.basis,
                         "stokes_dedup": cfg.stokes_dedup,
                         "settings": {"backend": cfg.settings.backend,
                                      "gap_tol": cfg.settings.gap_tol,
                                      "feas_tol": cfg.settings.feas_tol,
                                      "max_iter": cfg.settings.max_iter}})


def _with_gaps(rows: list[BoundRow], reference: float | None) -> list[BoundRow]:
    by_key = {(r.d, r.side, r.stokes): r for r in rows}
    out = []
    for r in rows:
        gap = ref_gap = None
        up = by_key.get((r.d, "upper", r.stokes))
        lo = by_key.get((r.d, "lower", r.stokes))
        if up and lo and up.ok and lo.ok and up.value != 0.0:
            gap = (up.value - lo.value) / up.value
        if reference and r.ok:
            ref_gap = (r.value - reference) / reference if r.side == "upper" \
                else (reference - r.value) / reference
        out.append(replace(r, gap_eps=gap, gap_eps_ref=ref_gap))
    return out


# -- Bonferroni -------------------------------------------------------------

@dataclass(frozen=True)
class BonferroniResult:
    upper: float
    lower: float
    depth: int
    terms: dict  # k -> (sum of upper bounds, sum of lower bounds) over k-intersections


def bonferroni_bounds(spec: ProblemSpec, d: int, depth_limit: int | None = None,
                      use_stokes: bool = True, config: BoundsConfig | None = None
                      ) -> BonferroniResult:
    """Truncated inclusion-exclusion with each intersection bounded on both sides.

    A truncation after an odd number of terms over-estimates mu(Omega), after an
    even number it under-estimates; the full expansion is exact.  Terms entering
    with a plus sign take the bound matching the truncation's direction and
    terms with a minus sign the opposite one, so every candidate stays valid.
    """
    cfg = config or BoundsConfig()
    spec = normalize(spec)
    p = spec.p
    depth = p if depth_limit is None else depth_limit
    if not 1 <= depth <= p:
        raise ValueError(f"depth_limit must lie in 1..{p}")
    if p == 1:
        up, _ = upper_bound(spec, d, use_stokes, cfg)
        lo, _ = lower_bound(spec, d, use_stokes, cfg)
        return BonferroniResult(up, max(lo, 0.0), 1, {1: (up, lo)})
    terms = {}
    for k in range(1, depth + 1):
        su = sl = 0.0
        for piece in k_intersections(spec, k):
            sub = with_pieces(spec, [piece], name=piece.name)
            su += upper_bound(sub, d, use_stokes, cfg)[0]
            sl += max(lower_bound(sub, d, use_stokes, cfg)[0], 0.0)
        terms[k] = (su, sl)

    def truncation(t: int, want_upper: bool) -> float:
        total = 0.0
        for k in range(1, t + 1):
            su, sl = terms[k]
            plus = k % 2 == 1
            total += (su if plus == want_upper else sl) * (1 if plus else -1)
        return total

    uppers = [truncation(t, True) for t in range(1, depth + 1) if t % 2 == 1 or t == p]
    lowers = [truncation(t, False) for t in range(1, depth + 1) if t % 2 == 0 or t == p]
    return BonferroniResult(min(uppers), max(lowers + [0.0]), depth, terms)
