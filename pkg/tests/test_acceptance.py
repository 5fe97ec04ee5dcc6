"""Acceptance criteria, each run at its stated tolerance.

Every test records a one-line verdict (printed in the terminal summary) and
then asserts.  Published-table criteria compare against the printed values;
the analysis of the ones that do not reproduce lives in the decisions ledger
and the README, not in weakened tolerances here.
"""
import math
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from conftest import record
from momentvol.cli import SOLVER_SLACK
from momentvol.bounds import BoundsConfig, bonferroni_bounds, sweep
from momentvol.measures import MeasureSpec, density_factors
from momentvol.mc import estimate
from momentvol.poly import evaluate, parse
from momentvol.relax import build_qd_stokes, min_order, stokes_polynomials
from momentvol.sdpa import export_sdpa, read_sdpa
from momentvol.semialg import BasicSet, ProblemSpec, UnionSet, load_problem, normalize

ROOT = Path(__file__).resolve().parents[1]
EXAMPLES = ROOT / "examples" / "problems"
ALL_EXAMPLES = sorted(p.stem for p in EXAMPLES.glob("*.yaml"))

# highest order used for the per-example suites (5, 6, 8); kept moderate so the
# whole suite runs on a laptop — the published-table criteria go higher.
SUITE_DMAX = {1: 8, 2: 5, 3: 3}


def _load(name):
    return load_problem(EXAMPLES / f"{name}.yaml")


@lru_cache(maxsize=None)
def suite_report(name):
    spec = _load(name)
    d0 = min_order(normalize(spec))
    dmax = max(d0 + 1, SUITE_DMAX[spec.dimension])
    return sweep(spec, d0, dmax, use_stokes="both", sides="both", moment_order=-1)


@lru_cache(maxsize=None)
def table_report(name, d):
    t0 = time.perf_counter()
    rep = sweep(_load(name), d, d, use_stokes="both", sides="both", moment_order=-1)
    return rep, time.perf_counter() - t0


def _table_check(name, d, expected, tol):
    """expected = (upper, lower, upper_stokes, lower_stokes)."""
    rep, wall = table_report(name, d)
    got = (rep.row(d, "upper", False), rep.row(d, "lower", False),
           rep.row(d, "upper", True), rep.row(d, "lower", True))
    lines, ok = [], True
    for label, row, want in zip(("up", "lo", "up_S", "lo_S"), got, expected):
        good = row.status == "optimal" and abs(row.value - want) <= tol
        ok &= good
        lines.append(f"{label}={row.value:.4f}/{want}{'' if good else '!'}({row.status})")
    return ok, " ".join(lines), rep, wall


# -- 1-4: published tables -----------------------------------------------------

TABLE1 = {
    "gauss_two_ellipses_u00": (1.9649, 1.6129, 1.8571, 1.7948),
    "gauss_two_ellipses_u01_05": (1.9554, 1.5752, 1.8308, 1.7746),
    "gauss_two_ellipses_u05_05": (1.9484, 1.5369, 1.8156, 1.7618),
}


def test_criterion_1_table1():
    ok_all, parts, total = True, [], 0.0
    for name, expected in TABLE1.items():
        ok, line, _, wall = _table_check(name, 10, expected, 0.015)
        ok_all &= ok
        total += wall
        parts.append(f"{name.removeprefix('gauss_two_ellipses_')}: {line}")
    ok_all &= total <= 600
    record("1 Table 1", ok_all, f"{'; '.join(parts)}; {total:.0f}s")
    assert ok_all


def test_criterion_2_table2():
    ok, line, rep, _ = _table_check("gauss_noncompact_2d_a", 9, (2.0038, 1.8252, 1.9347, 1.9019),
                                    0.015)
    eps = rep.row(9, "upper", True).gap_eps
    ok &= eps is not None and eps <= 0.025
    record("2 Table 2", ok, f"{line} eps9_S={100 * eps:.1f}%" if eps is not None else line)
    assert ok


def test_criterion_3_table3():
    ok, line, _, _ = _table_check("gauss_noncompact_2d_b", 9, (2.0046, 1.8342, 1.9542, 1.9083),
                                  0.015)
    record("3 Table 3", ok, line)
    assert ok


def test_criterion_4_tables_4_5():
    ok4, line4, _, w4 = _table_check("gauss_noncompact_3d_a", 6, (2.8222, 2.3123, 2.6856, 2.5360),
                                     0.03)
    ok5, line5, _, w5 = _table_check("gauss_noncompact_3d_b", 7, (2.8143, 2.3494, 2.6887, 2.5338),
                                     0.03)
    record("4 Tables 4-5", ok4 and ok5, f"T4 d=6: {line4} ({w4:.0f}s); T5 d=7: {line5} ({w5:.0f}s)")
    assert ok4 and ok5


# -- 5, 6, 8: every shipped example ----------------------------------------------

def test_criterion_5_monotonicity():
    bad = []
    for name in ALL_EXAMPLES:
        rep = suite_report(name)
        for st in (False, True):
            ups = rep.series("upper", st)
            los = rep.series("lower", st)
            bad += [f"{name} up S={st} d={d}" for (_, a), (d, b) in zip(ups, ups[1:]) if b > a + 1e-6]
            bad += [f"{name} lo S={st} d={d}" for (_, a), (d, b) in zip(los, los[1:]) if b < a - 1e-6]
        if not rep.all_optimal:
            bad += [f"{name} d={r.d} {r.side} S={r.stokes}: {r.status}" for r in rep.rows
                    if r.status != "optimal"]
    record("5 monotonicity", not bad, f"{len(ALL_EXAMPLES)} examples" + (f"; {bad}" if bad else ""))
    assert not bad


def test_criterion_6_stokes_dominance():
    bad = []
    for name in ALL_EXAMPLES:
        rep = suite_report(name)
        for r in rep.rows:
            if r.side == "upper" and r.stokes:
                plain = rep.row(r.d, "upper", False)
                if not (r.ok and plain.ok) or r.value > plain.value + 1e-7:
                    bad.append(f"{name} d={r.d}: {r.value:.8f} vs {plain.value:.8f}")
    record("6 Stokes dominance", not bad, f"{len(ALL_EXAMPLES)} examples" + (f"; {bad}" if bad else ""))
    assert not bad


def test_criterion_8_sandwich_vs_mc():
    bad, n_rows = [], 0
    for name in ALL_EXAMPLES:
        spec = _load(name)
        mc = estimate(spec, 1_000_000, seed=2024)
        slack = SOLVER_SLACK * max(1.0, mc.estimate)  # bounds hold up to solver tolerance
        for r in suite_report(name).rows:
            if not r.ok:
                bad.append(f"{name} d={r.d} {r.side}: {r.status}")
                continue
            n_rows += 1
            if r.side == "lower" and r.value > mc.estimate + 3 * mc.std_error + slack:
                bad.append(f"{name} d={r.d} lower {r.value:.5f} > {mc.estimate:.5f}+3SE")
            if r.side == "upper" and r.value < mc.estimate - 3 * mc.std_error - slack:
                bad.append(f"{name} d={r.d} upper {r.value:.5f} < {mc.estimate:.5f}-3SE")
    record("8 sandwich vs MC", not bad, f"{n_rows} rows, N=1e6" + (f"; {bad}" if bad else ""))
    assert not bad


# -- 7: 1-D oracle -----------------------------------------------------------------

def test_criterion_7_one_dimensional_oracle():
    t0 = time.perf_counter()
    rep = sweep(_load("lebesgue_two_intervals_1d"), 8, 8, use_stokes=True, sides="both")
    wall = time.perf_counter() - t0
    up, lo = rep.row(8, "upper", True), rep.row(8, "lower", True)
    ok = (up.status == lo.status == "optimal" and lo.value - 1e-6 <= 1.6 <= up.value + 1e-6
          and up.value - lo.value <= 0.05 and wall <= 30)
    record("7 1-D oracle", ok, f"upper={up.value:.5f} ({up.status}) lower={lo.value:.5f} "
           f"({lo.status}) gap={up.value - lo.value:.4f} (need <= 0.05), {wall:.1f}s")
    assert ok


# -- 9: Stokes-row soundness ----------------------------------------------------------

def _one_d(sets, measure):
    pieces = tuple(BasicSet(f"s{i}", tuple(parse(g, ["x"]) for g in gs)) for i, gs in enumerate(sets))
    return ProblemSpec(1, measure, UnionSet(pieces), variables=("x",))


def _intervals(spec, piece):
    """Sub-intervals of a 1-D basic set (working coordinates) found from a fine grid."""
    lo, hi = (-1.0, 1.0) if spec.measure.kind == "lebesgue" else \
        ((0.0, 60.0) if spec.measure.kind == "exponential" else (-12.0, 12.0))
    grid = np.linspace(lo, hi, 240_001)
    inside = piece.contains(grid[:, None])
    edges = np.flatnonzero(np.diff(inside.astype(int)))
    cuts = [lo] + [0.5 * (grid[e] + grid[e + 1]) for e in edges] + [hi]
    out = []
    for a, b in zip(cuts, cuts[1:]):
        if piece.contains(np.array([[0.5 * (a + b)]]))[0]:
            out.append((a, b))
    return out


def _refine(coeffs, t):
    """Snap an approximate boundary point onto the nearest exact root of any constraint."""
    roots = [r.real for cf in coeffs for r in np.roots(cf) if abs(r.imag) < 1e-9]
    best = min(roots, key=lambda r: abs(r - t)) if roots else t
    return best if abs(best - t) < 1e-3 else t


STOKES_CASES = {
    "two intervals (Lebesgue)": (_load("lebesgue_two_intervals_1d"), 8),
    "interval (Lebesgue)": (_load("lebesgue_interval_moment_1d"), 8),
    "interval (Gaussian)": (_one_d([["-(x - 0.2)*(x - 1)"]], MeasureSpec("gaussian", sigma2=0.8)), 8),
    "two pieces (Gaussian)": (_one_d([["1 - x^2"], ["x - 0.5", "2 - x"]],
                                     MeasureSpec("gaussian", sigma2=0.8)), 8),
    "interval (exponential)": (_one_d([["(x - 0.5)*(3 - x)"]], MeasureSpec("exponential")), 8),
}


def test_criterion_9_stokes_row_soundness():
    worst, n_rows = 0.0, 0
    for label, (raw, d) in STOKES_CASES.items():
        spec = normalize(raw)
        q, r = density_factors(spec.measure, 1)
        factors = [g for b in spec.union.pieces for g in b.inequalities]
        coeffs = [[g.coefficient((k,)) for k in range(g.degree, -1, -1)] for g in factors]
        for c in stokes_polynomials(spec, d):
            piece = spec.union.pieces[c.piece]
            val = 0.0
            for a, b in _intervals(spec, piece):
                a, b = _refine(coeffs, a), _refine(coeffs, b)
                f = lambda t: evaluate(c.poly, [t]) * evaluate(q, [t]) * math.exp(evaluate(r, [t]))
                val += integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=400)[0]
            scale = max(abs(v) for v in c.poly.terms.values())
            worst = max(worst, abs(val) / scale)
            n_rows += 1
    ok = worst <= 1e-8
    record("9 Stokes soundness", ok, f"{n_rows} rows over {len(STOKES_CASES)} n=1 instances, "
           f"max |int p dmu| / max|coef| = {worst:.1e}")
    assert ok


# -- 10: SDPA round trip -----------------------------------------------------------------

def test_criterion_10_sdpa_round_trip(tmp_path):
    from test_sdpa import DATA, golden_problem
    ok, notes = True, []
    for name in ALL_EXAMPLES:
        spec = normalize(_load(name))
        prob = build_qd_stokes(spec, min_order(spec) + 1)
        back = read_sdpa(export_sdpa(prob, tmp_path / f"{name}.dat-s")).to_conic()
        same = (back.block_sizes() == prob.block_sizes() and back.n_eq == prob.n_eq
                and back.nvars == prob.nvars)
        ok &= same
        if not same:
            notes.append(name)
    first = export_sdpa(golden_problem(), tmp_path / "g1.dat-s").read_bytes()
    second = export_sdpa(golden_problem(), tmp_path / "g2.dat-s").read_bytes()
    golden = (DATA / "interval_d2_stokes.dat-s").read_bytes()
    stable = first == second == golden
    ok &= stable
    record("10 SDPA round trip", ok, f"{len(ALL_EXAMPLES)} examples re-imported with identical "
           f"block structure; golden file {'stable' if stable else 'CHANGED'}"
           + (f"; mismatched: {notes}" if notes else ""))
    assert ok


# -- figures: CSV series shape check (report only) -----------------------------------------

def test_figure_three_ellipses_bonferroni_report():
    """Direct Stokes upper vs Bonferroni upper on the three-ellipse instance (report, no assert)."""
    spec = _load("lebesgue_three_ellipses_2d")
    rep = suite_report("lebesgue_three_ellipses_2d")
    d = max(r.d for r in rep.rows)
    direct = rep.row(d, "upper", True).value
    bonf = bonferroni_bounds(spec, d, depth_limit=1)
    print(f"three ellipses d={d}: direct Stokes upper {direct:.5f}, "
          f"Bonferroni depth-1 upper {bonf.upper:.5f}")
    assert math.isfinite(direct) and math.isfinite(bonf.upper)
