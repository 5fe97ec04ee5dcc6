"""Bound-versus-order CSV series for every figure (no plotting).

One CSV per figure under results/figures/, columns

    figure,problem,d,side,stokes,value,status,gap_eps,reference

``reference`` is the exact value where one is known in closed form and a
Monte Carlo estimate (N=10^6, fixed seed) otherwise.  The three-ellipse
figure also gets Bonferroni rows (side ``bonferroni_upper`` /
``bonferroni_lower``, every relaxation with Stokes rows).

    python3 scripts/run_figures.py                  # all figures
    python3 scripts/run_figures.py --only vol1 ex2  # a subset
    python3 scripts/run_figures.py --dmax-2d 10     # go further
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from pathlib import Path

from momentvol.bounds import bonferroni_bounds, sweep
from momentvol.mc import estimate
from momentvol.relax import min_order
from momentvol.semialg import load_problem, normalize

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "examples" / "problems"

# figure id -> problem file; in order of appearance
FIGURES = {
    "vol1": "lebesgue_two_ellipses_2d",
    "vol2": "lebesgue_two_ellipsoids_3d",
    "vol3": "lebesgue_three_ellipses_2d",
    "gauss1": "gauss_two_ellipses_u00",
    "ex2": "gauss_noncompact_2d_a",
    "ex3": "gauss_noncompact_2d_b",
    "ex4": "gauss_noncompact_3d_a",
    "ex5": "gauss_noncompact_3d_b",
}
# closed forms: ellipses with semi-axes (2, 1) and (1, 2) cross at |x1| = |x2| = 2/sqrt(5)
EXACT = {"vol1": 4 * (math.pi - 2 * math.atan(0.5))}
FIELDS = ("figure", "problem", "d", "side", "stokes", "value", "status", "gap_eps", "reference")


def series(fig: str, dmax: dict[int, int], mc_n: int, seed: int) -> list[dict]:
    spec = load_problem(PROBLEMS / f"{FIGURES[fig]}.yaml")
    d0 = min_order(normalize(spec))
    d1 = max(d0, dmax[spec.dimension])
    ref = EXACT.get(fig)
    if ref is None:
        ref = estimate(spec, mc_n, seed).estimate
    rep = sweep(spec, d0, d1, use_stokes="both", sides="both", moment_order=-1, reference=ref)
    rows = [{"figure": fig, "problem": spec.name, "d": r.d, "side": r.side, "stokes": r.stokes,
             "value": r.value, "status": r.status, "gap_eps": r.gap_eps, "reference": ref}
            for r in rep.rows]
    if fig == "vol3":
        for d in range(d0, d1 + 1):
            b = bonferroni_bounds(spec, d, use_stokes=True)
            for side, val in (("bonferroni_upper", b.upper), ("bonferroni_lower", b.lower)):
                rows.append({"figure": fig, "problem": spec.name, "d": d, "side": side,
                             "stokes": True, "value": val, "status": "optimal",
                             "gap_eps": "", "reference": ref})
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", nargs="*", choices=sorted(FIGURES), default=list(FIGURES))
    ap.add_argument("--dmax-1d", type=int, default=12)
    ap.add_argument("--dmax-2d", type=int, default=8)
    ap.add_argument("--dmax-3d", type=int, default=5)
    ap.add_argument("--mc-n", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "figures")
    args = ap.parse_args(argv)

    dmax = {1: args.dmax_1d, 2: args.dmax_2d, 3: args.dmax_3d}
    args.out.mkdir(parents=True, exist_ok=True)
    for fig in args.only:
        t0 = time.perf_counter()
        rows = series(fig, dmax, args.mc_n, args.seed)
        path = args.out / f"{fig}.csv"
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=FIELDS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        bad = sum(r["status"] not in ("optimal", "near_optimal") for r in rows)
        print(f"{fig:7s} {len(rows):3d} rows -> {path} ({time.perf_counter() - t0:.0f}s"
              f"{f', {bad} failed' if bad else ''})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
