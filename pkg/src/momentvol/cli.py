"""Command-line entry point: ``momentvol solve`` and ``momentvol check``.

Exit codes: 0 success, 1 usage or input error, 2 solver failure, 3 sandwich
violated (``check`` only).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .basis import BASES
from .bounds import BoundRow, BoundsConfig, BoundsReport, bonferroni_bounds, sweep
from .mc import estimate
from .relax import build_qd, build_qd_stokes, min_order
from .sdpa import export_sdpa
from .semialg import complement_union, load_problem, normalize
from .solve import BACKENDS, SolverSettings

log = logging.getLogger("momentvol")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_SANDWICH = 0, 1, 2, 3
DEGREE_CAP = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which we reserve
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    problem: Path
    d_min: int
    d_max: int
    stokes: object = True  # True, False or "both"
    sides: str = "upper"
    bonferroni_depth: int | None = None
    basis: str = "monomial"
    stokes_dedup: bool = True
    mc_n: int = 0
    mc_seed: int = 0
    export_sdpa: Path | None = None
    no_solve: bool = False
    csv: Path | None = None
    json: Path | None = None
    workers: int = 1
    moment_order: int = 2
    allow_high_degree: bool = False
    settings: SolverSettings = field(default_factory=SolverSettings)
    basis_fallback: bool = True


def parse_degrees(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+)\s*)?", text)
    if not m:
        raise UsageError(f"--d expects A..B or A, got {text!r}")
    lo = int(m.group(1))
    hi = int(m.group(2)) if m.group(2) else lo
    if hi < lo:
        raise UsageError(f"empty degree range {text!r}")
    return lo, hi


def _versions() -> dict:
    out = {"momentvol": __version__, "python": platform.python_version(),
           "numpy": np.__version__, "scipy": scipy.__version__}
    for mod in ("cvxopt", "clarabel"):
        try:
            out[mod] = __import__(mod).__version__
        except Exception:  # optional backend missing or without a version
            out[mod] = "unavailable"
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="momentvol", description="Certified bounds on the measure of a union of "
                "basic semi-algebraic sets via moment relaxations.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="compute bounds for a problem file")
    s.add_argument("problem", type=Path)
    s.add_argument("--d", dest="degrees", default=None, help="relaxation orders A..B (default d0)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--stokes", dest="stokes", action="store_const", const=True, default=True,
                   help="add Stokes rows (default)")
    g.add_argument("--no-stokes", dest="stokes", action="store_const", const=False)
    g.add_argument("--stokes-compare", dest="stokes", action="store_const", const="both",
                   help="solve with and without Stokes rows")
    s.add_argument("--stokes-literal", action="store_true",
                   help="use the full product of constraints without deduplication")
    s.add_argument("--sides", choices=("upper", "lower", "both"), default="upper")
    s.add_argument("--bonferroni-depth", type=int, default=None)
    s.add_argument("--basis", choices=BASES, default="monomial")
    s.add_argument("--no-basis-fallback", action="store_true",
                   help="report a non-optimal solve as is instead of retrying in another basis")
    s.add_argument("--mc-n", type=int, default=0, help="Monte Carlo samples for a cross-check")
    s.add_argument("--mc-seed", type=int, default=0)
    s.add_argument("--export-sdpa", type=Path, default=None)
    s.add_argument("--no-solve", action="store_true", help="only export, do not solve")
    s.add_argument("--csv", type=Path, default=None)
    s.add_argument("--json", type=Path, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--moment-order", type=int, default=2)
    s.add_argument("--allow-high-degree", action="store_true")
    _solver_flags(s)

    c = sub.add_parser("check", help="Monte Carlo sandwich check of an existing report")
    c.add_argument("problem", type=Path)
    c.add_argument("--report", type=Path, required=True, help="CSV or JSON report from solve")
    c.add_argument("--mc-n", type=int, default=1_000_000)
    c.add_argument("--mc-seed", type=int, default=0)
    c.add_argument("--sigmas", type=float, default=3.0)
    return p


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=sorted(BACKENDS), default=None)
    p.add_argument("--gap-tol", type=float, default=None)
    p.add_argument("--feas-tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)


def _settings(args) -> SolverSettings:
    base = SolverSettings.from_env()
    over = {k: v for k, v in (("backend", args.backend), ("gap_tol", args.gap_tol),
                              ("feas_tol", args.feas_tol), ("max_iter", args.max_iter))
            if v is not None}
    return SolverSettings(**{**base.__dict__, **over})


def _config(args, spec) -> RunConfig:
    d0 = min_order(normalize(spec))
    d_min, d_max = parse_degrees(args.degrees) if args.degrees else (d0, d0)
    if d_min < 1:
        raise UsageError("degrees start at 1")
    if d_min < d0:
        raise UsageError(f"d={d_min} is below the minimal order d0={d0} of this problem")
    if d_max > DEGREE_CAP:
        if not args.allow_high_degree:
            raise UsageError(f"d={d_max} exceeds the cap {DEGREE_CAP}; pass --allow-high-degree")
        log.warning("degree %d above the cap %d: expect very large SDPs", d_max, DEGREE_CAP)
    if args.no_solve and args.export_sdpa is None:
        raise UsageError("--no-solve only makes sense with --export-sdpa")
    if args.mc_n and args.mc_n < 100:
        raise UsageError("--mc-n needs at least 100 samples")
    if args.bonferroni_depth is not None and not 1 <= args.bonferroni_depth <= spec.p:
        raise UsageError(f"--bonferroni-depth must lie in 1..{spec.p}")
    if args.workers < 1:
        raise UsageError("--workers must be positive")
    return RunConfig(args.problem, d_min, d_max, args.stokes, args.sides, args.bonferroni_depth,
                     args.basis, not args.stokes_literal, args.mc_n, args.mc_seed,
                     args.export_sdpa, args.no_solve, args.csv, args.json, args.workers,
                     args.moment_order, args.allow_high_degree, _settings(args),
                     not args.no_basis_fallback)


def _export(cfg: RunConfig, spec) -> list[Path]:
    spec = normalize(spec)
    modes = [False, True] if cfg.stokes == "both" else [bool(cfg.stokes)]
    sides = ["upper", "lower"] if cfg.sides == "both" else [cfg.sides]
    jobs = [(d, side, st) for d in range(cfg.d_min, cfg.d_max + 1) for side in sides
            for st in modes]
    target = cfg.export_sdpa
    written = []
    for d, side, st in jobs:
        sub = spec if side == "upper" else complement_union(spec)
        prob = (build_qd_stokes(sub, d, basis=cfg.basis, dedup=cfg.stokes_dedup) if st
                else build_qd(sub, d, basis=cfg.basis))
        if len(jobs) == 1:
            path = target
        else:
            tag = f"-d{d}-{side}-{'stokes' if st else 'plain'}"
            path = target.with_name(target.stem + tag + target.suffix)
        export_sdpa(prob, path)
        written.append(path)
        log.info("wrote %s", path)
    return written


def _fmt(v) -> str:
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6f}"


def _summary(report: BoundsReport, mc=None) -> str:
    lines = [f"{'d':>3} {'side':<16} {'stokes':<6} {'value':>12} {'gap_eps':>9} status"]
    for r in report.rows:
        gap = "-" if r.gap_eps is None else f"{100 * r.gap_eps:.2f}%"
        lines.append(f"{r.d:>3} {r.side:<16} {str(r.stokes).lower():<6} {_fmt(r.value):>12} "
                     f"{gap:>9} {r.status}")
    if mc is not None:
        lines.append(f"Monte Carlo: {mc.estimate:.6f} +- {mc.std_error:.6f} "
                     f"(N={mc.n_samples}, seed={mc.seed})")
    return "\n".join(lines)


def cmd_solve(args) -> int:
    spec = load_problem(args.problem)
    cfg = _config(args, spec)
    log.info("problem %s hash %s", cfg.problem, spec.fingerprint())
    log.info("degrees %d..%d stokes=%s sides=%s basis=%s", cfg.d_min, cfg.d_max, cfg.stokes,
             cfg.sides, cfg.basis)
    log.info("solver %s", cfg.settings)
    log.info("versions %s", _versions())
    if cfg.export_sdpa is not None:
        _export(cfg, spec)
        if cfg.no_solve:
            return EXIT_OK

    bcfg = BoundsConfig(settings=cfg.settings, basis=cfg.basis, stokes_dedup=cfg.stokes_dedup,
                        basis_fallback=cfg.basis_fallback)
    mc = estimate(spec, cfg.mc_n, cfg.mc_seed) if cfg.mc_n else None
    report = sweep(spec, cfg.d_min, cfg.d_max, use_stokes=cfg.stokes, sides=cfg.sides,
                   config=bcfg, workers=cfg.workers, moment_order=cfg.moment_order,
                   reference=mc.estimate if mc else None)
    failed = report.any_failed
    if cfg.bonferroni_depth is not None:
        extra = []
        for d in range(cfg.d_min, cfg.d_max + 1):
            try:
                b = bonferroni_bounds(spec, d, cfg.bonferroni_depth, use_stokes=cfg.stokes is not False,
                                      config=bcfg)
                status = "optimal"
                vals = (b.upper, b.lower)
            except Exception as exc:
                log.error("bonferroni d=%d failed: %s", d, exc)
                status, vals, failed = "numerical_failure", (math.nan, math.nan), True
            for side, v in zip(("bonferroni_upper", "bonferroni_lower"), vals):
                extra.append(BoundRow(d, side, cfg.stokes is not False, v, status, 0.0))
        report.rows.extend(extra)
    report.metadata["versions"] = _versions()
    if mc is not None:
        report.metadata["monte_carlo"] = mc.to_dict()
    if cfg.csv:
        cfg.csv.write_text(report.to_csv())
    if cfg.json:
        cfg.json.write_text(report.to_json())
    print(_summary(report, mc))
    if failed:
        for r in report.rows:
            if not r.ok:
                log.error("d=%d %s stokes=%s: %s %s", r.d, r.side, r.stokes, r.status, r.reason)
        return EXIT_SOLVER
    return EXIT_OK


def read_report(path: Path) -> list[dict]:
    """Rows of a CSV or JSON report as dicts with d, side, stokes, value."""
    if not path.exists():
        raise UsageError(f"report {path} does not exist")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        rows = json.loads(text)["rows"]
    else:
        rows = list(csv.DictReader(text.splitlines()))
    out = []
    for r in rows:
        value = r.get("value", "")
        out.append({"d": int(r["d"]), "side": r["side"],
                    "stokes": str(r["stokes"]).lower() == "true",
                    "value": float(value) if value not in ("", None) else math.nan,
                    "status": r.get("status", "")})
    return out


# Certified bounds hold up to the solver's feasibility tolerance; without this
# slack an exact answer (e.g. the whole box, where the MC error is 0) would
# be flagged for a 1e-10 undershoot.
SOLVER_SLACK = 1e-6


def sandwich_violations(rows: list[dict], mu: float, se: float, sigmas: float = 3.0) -> list[str]:
    bad = []
    slack = SOLVER_SLACK * max(1.0, abs(mu))
    for r in rows:
        v = r["value"]
        if math.isnan(v):
            continue
        if r["side"].endswith("lower") and v > mu + sigmas * se + slack:
            bad.append(f"d={r['d']} {r['side']} stokes={r['stokes']}: {v:.6f} > MC {mu:.6f} + "
                       f"{sigmas:g}*{se:.2e}")
        if r["side"].endswith("upper") and v < mu - sigmas * se - slack:
            bad.append(f"d={r['d']} {r['side']} stokes={r['stokes']}: {v:.6f} < MC {mu:.6f} - "
                       f"{sigmas:g}*{se:.2e}")
    pairs: dict = {}
    for r in rows:
        family, _, kind = r["side"].rpartition("_")  # "" for direct, "bonferroni" otherwise
        pairs.setdefault((r["d"], r["stokes"], family), {})[kind] = r["value"]
    for (d, st, _), sides in pairs.items():
        lo, up = sides.get("lower"), sides.get("upper")
        if lo is not None and up is not None and lo > up + 1e-6:
            bad.append(f"d={d} stokes={st}: lower {lo:.6f} exceeds upper {up:.6f}")
    return bad


def cmd_check(args) -> int:
    spec = load_problem(args.problem)
    rows = read_report(args.report)
    if args.mc_n < 100:
        raise UsageError("--mc-n needs at least 100 samples")
    mc = estimate(spec, args.mc_n, args.mc_seed)
    log.info("problem %s hash %s; MC %s", args.problem, spec.fingerprint(), mc.to_dict())
    bad = sandwich_violations(rows, mc.estimate, mc.std_error, args.sigmas)
    print(f"Monte Carlo: {mc.estimate:.6f} +- {mc.std_error:.6f} (N={mc.n_samples}, seed={mc.seed})")
    for line in bad:
        print(f"VIOLATION {line}")
    if bad:
        return EXIT_SANDWICH
    print(f"sandwich holds for {len(rows)} rows")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_check(args)
    except (UsageError, ValueError, OSError) as exc:  # includes problem-file and degree errors
        print(f"momentvol: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
