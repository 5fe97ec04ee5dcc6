"""Conic backend bridge.

Backends receive a :class:`~momentvol.relax.ConicProblem` and return a
:class:`SolveResult`.  CVXOPT (Schur-complement interior point) is the
default; Clarabel (native PSD triangle cones) is an independent cross-check.
"""
from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .relax import ConicProblem, PsdBlock, unpack

log = logging.getLogger(__name__)

STATUSES = ("optimal", "near_optimal", "infeasible", "unbounded", "numerical_failure")
SETTINGS_ENV = "MOMENTVOL_SOLVER"


@dataclass(frozen=True)
class SolverSettings:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    backend: str = "cvxopt"
    verbose: bool = False

    @classmethod
    def from_env(cls, base: "SolverSettings | None" = None) -> "SolverSettings":
        """Apply overrides such as ``gap_tol=1e-9,max_iter=300`` from MOMENTVOL_SOLVER."""
        base = base or cls()
        raw = os.environ.get(SETTINGS_ENV, "").strip()
        if not raw:
            return base
        kw = {}
        for item in raw.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            if key in ("gap_tol", "feas_tol"):
                kw[key] = float(val)
            elif key == "max_iter":
                kw[key] = int(val)
            elif key == "backend":
                kw[key] = val.strip()
            elif key == "verbose":
                kw[key] = val.strip().lower() in ("1", "true", "yes")
            elif key:
                raise ValueError(f"unknown solver setting {key!r} in {SETTINGS_ENV}")
        return replace(base, **kw)


@dataclass(frozen=True)
class SolveResult:
    status: str
    primal: float
    dual: float
    y: tuple[np.ndarray, ...] = field(repr=False)
    iterations: int = 0
    wall_time: float = 0.0
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "near_optimal")

    @property
    def value(self) -> float:
        return self.primal


def _svec_scale(size: int) -> np.ndarray:
    """sqrt(2) on off-diagonal packed positions, 1 on the diagonal."""
    out = np.full(size * (size + 1) // 2, math.sqrt(2.0))
    for j in range(size):
        out[j * (j + 1) // 2 + j] = 1.0
    return out


def _split_y(problem: ConicProblem, x: np.ndarray | None) -> tuple[np.ndarray, ...]:
    if x is None:
        x = np.full(problem.nvars, np.nan)
    return tuple(np.array(x[problem.piece_slice(i)]) for i in range(problem.p))


# -- Clarabel ---------------------------------------------------------------

_CLARABEL_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "near_optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def _solve_clarabel(problem: ConicProblem, settings: SolverSettings) -> SolveResult:
    import clarabel

    A_parts, b_parts, cones = [], [], []
    if problem.n_eq:
        A_parts.append(problem.eq_matrix)
        b_parts.append(problem.eq_rhs)
        cones.append(clarabel.ZeroConeT(problem.n_eq))
    for blk in problem.blocks:
        w = _svec_scale(blk.size)
        # const + coef x in PSD  <=>  (-coef) x + s = const, s in PSD
        A_parts.append(-sp.diags(w) @ blk.coef)
        b_parts.append(w * blk.const)
        cones.append(clarabel.PSDTriangleConeT(blk.size))
    A = sp.vstack(A_parts, format="csc")
    b = np.concatenate(b_parts)
    P = sp.csc_matrix((problem.nvars, problem.nvars))
    q = -np.asarray(problem.objective, dtype=float)

    st = clarabel.DefaultSettings()
    st.verbose = settings.verbose
    st.max_iter = settings.max_iter
    st.tol_gap_abs = settings.gap_tol
    st.tol_gap_rel = settings.gap_tol
    st.tol_feas = settings.feas_tol
    st.presolve_enable = True
    st.max_threads = 1
    t0 = time.perf_counter()
    try:
        solver = clarabel.DefaultSolver(P, q, A, b, cones, st)
        sol = solver.solve()
    except Exception as exc:  # backend breakdown must not escape
        return SolveResult("numerical_failure", math.nan, math.nan, _split_y(problem, None),
                           0, time.perf_counter() - t0, f"clarabel raised: {exc}")
    wall = time.perf_counter() - t0
    raw = str(sol.status)
    status = _CLARABEL_STATUS.get(raw, "numerical_failure")
    x = np.asarray(sol.x, dtype=float) if status in ("optimal", "near_optimal") else None
    primal = -float(sol.obj_val) if x is not None else math.nan
    dual = -float(sol.obj_val_dual) if x is not None else math.nan
    if status == "unbounded":
        primal = dual = math.inf
    if status == "infeasible":
        primal = dual = -math.inf
    return SolveResult(status, primal, dual, _split_y(problem, x), int(sol.iterations), wall,
                       "" if status == "optimal" else f"clarabel: {raw}")


# -- CVXOPT -----------------------------------------------------------------

def _affine_parametrisation(A: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    """Return (x0, N) with {x : A x = b} = {x0 + N t}, or None if inconsistent.

    Uses one SVD, so dependent rows (Stokes rows are heavily redundant) cost
    nothing and the solver never sees an ill-posed equality system.
    """
    U, S, Vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(S > tol * max(S[0], 1.0))) if S.size else 0
    x0 = Vt[:rank].T @ ((U[:, :rank].T @ b) / S[:rank])
    if np.linalg.norm(A @ x0 - b) > 1e-8 * (1.0 + np.linalg.norm(b)):
        return None
    return x0, Vt[rank:].T


def _fixed_point(problem: ConicProblem, x: np.ndarray) -> SolveResult:
    """The equalities pin x down completely; only PSD feasibility is left to check."""
    worst = min((np.linalg.eigvalsh(b.matrix(x))[0] for b in problem.blocks), default=0.0)
    if worst < -1e-8:
        return SolveResult("infeasible", -math.inf, -math.inf, _split_y(problem, None), 0, 0.0,
                           "equalities fix a point outside the PSD cone")
    val = float(problem.objective @ x)
    return SolveResult("optimal", val, val, _split_y(problem, x), 0, 0.0, "")


def _solve_cvxopt(problem: ConicProblem, settings: SolverSettings) -> SolveResult:
    import cvxopt
    from cvxopt import solvers

    if problem.n_eq:
        raise ValueError("the cvxopt bridge expects equalities to be eliminated first")
    Gs, hs = [], []
    for blk in problem.blocks:
        size = blk.size
        # cvxopt wants G x + S = h with S PSD in column-major full storage
        coef = blk.coef.tocoo()
        col = np.floor((np.sqrt(8.0 * coef.row + 1.0) - 1.0) / 2.0).astype(np.int64)
        row = coef.row - col * (col + 1) // 2
        off = row != col
        pos = np.concatenate([col * size + row, (row * size + col)[off]])
        var = np.concatenate([coef.col, coef.col[off]])
        vals = -np.concatenate([coef.data, coef.data[off]])
        Gs.append(cvxopt.spmatrix(vals.tolist(), pos.tolist(), var.tolist(),
                                  (size * size, problem.nvars)))
        hs.append(cvxopt.matrix(unpack(blk.const, size)))
    c = cvxopt.matrix(-np.asarray(problem.objective, dtype=float))
    opts = {"show_progress": settings.verbose, "abstol": settings.gap_tol,
            "reltol": settings.gap_tol, "feastol": settings.feas_tol,
            "maxiters": settings.max_iter}
    t0 = time.perf_counter()
    try:
        sol = solvers.sdp(c, Gs=Gs, hs=hs, options=opts)
    except Exception as exc:
        return SolveResult("numerical_failure", math.nan, math.nan, _split_y(problem, None),
                           0, time.perf_counter() - t0, f"cvxopt raised: {exc}")
    wall = time.perf_counter() - t0
    raw = sol["status"]
    if raw == "optimal":
        status = "optimal"
    elif raw == "primal infeasible":
        status = "infeasible"
    elif raw == "dual infeasible":
        status = "unbounded"
    elif sol.get("x") is not None and sol.get("primal objective") is not None and \
            max(sol.get("primal infeasibility") or math.inf,
                sol.get("dual infeasibility") or math.inf) <= max(1e2 * settings.feas_tol, 1e-6):
        # stalled but with small residuals; solve() still certifies the gap
        status = "near_optimal"
    else:
        status = "numerical_failure"
    x = np.array(sol["x"]).ravel() if status in ("optimal", "near_optimal") else None
    primal = -float(sol["primal objective"]) if x is not None else math.nan
    dual = -float(sol["dual objective"]) if x is not None else math.nan
    if status == "unbounded":
        primal = dual = math.inf
    if status == "infeasible":
        primal = dual = -math.inf
    return SolveResult(status, primal, dual, _split_y(problem, x), int(sol.get("iterations", 0)),
                       wall, "" if status == "optimal" else f"cvxopt: {raw}")


# -- equality elimination ---------------------------------------------------

def _eliminate(problem: ConicProblem):
    """Rewrite x = x0 + N t and drop the equalities; None if they are inconsistent."""
    param = _affine_parametrisation(problem.eq_matrix.toarray(), problem.eq_rhs)
    if param is None:
        return None
    x0, N = param
    blocks = tuple(PsdBlock(b.name, b.size, b.const + b.coef @ x0,
                            sp.csr_matrix(np.asarray(b.coef @ N))) for b in problem.blocks)
    reduced = ConicProblem(N.shape[1], N.T @ problem.objective, blocks,
                           sp.csr_matrix((0, N.shape[1])), np.zeros(0), p=1)
    return reduced, x0, N


def _lift(problem: ConicProblem, res: SolveResult, x0: np.ndarray, N: np.ndarray) -> SolveResult:
    shift = float(problem.objective @ x0)
    x = None
    if res.ok:
        x = x0 + N @ np.concatenate(res.y)
    return replace(res, primal=res.primal + shift, dual=res.dual + shift, y=_split_y(problem, x))


BACKENDS = {"clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}


RETRY_GAP_FACTOR = 100.0


def _attempt(problem: ConicProblem, settings: SolverSettings, backend) -> SolveResult:
    if not problem.n_eq:
        return backend(problem, settings)
    # Stokes rows are highly redundant; solving over their null space keeps
    # the interior-point iterations small and well conditioned.
    elim = _eliminate(problem)
    if elim is None:
        return SolveResult("infeasible", -math.inf, -math.inf, _split_y(problem, None), 0, 0.0,
                           "equality rows are inconsistent")
    reduced, x0, N = elim
    if reduced.nvars == 0:
        return _fixed_point(problem, x0)
    return _lift(problem, backend(reduced, settings), x0, N)


def _classify(res: SolveResult, settings: SolverSettings) -> SolveResult:
    """Certify the status on the objective gap |primal - dual|."""
    if not res.ok:
        return res
    gap = abs(res.primal - res.dual)
    scale = 1.0 + abs(res.primal)
    near_tol = max(1e3 * settings.gap_tol, 1e-6)
    if res.status == "optimal" and gap <= settings.gap_tol * scale:
        return res
    if gap <= near_tol * scale:
        return replace(res, status="near_optimal",
                       reason=res.reason or f"primal-dual gap {gap:.2e} above gap_tol")
    return replace(res, status="numerical_failure",
                   reason=f"{res.reason}; primal-dual gap {gap:.2e} too wide".lstrip("; "))


def solve(problem: ConicProblem, settings: SolverSettings | None = None) -> SolveResult:
    """Solve ``problem``; never raises on solver breakdown.

    If the backend stalls (common when Stokes rows leave the dual without an
    interior), the solve is repeated once with the backend's complementarity
    tolerance relaxed by RETRY_GAP_FACTOR while feasibility tolerances stay
    put.  Either way the status is certified on |primal - dual| against the
    caller's gap_tol.
    """
    settings = settings or SolverSettings()
    try:
        backend = BACKENDS[settings.backend]
    except KeyError:
        raise ValueError(f"unknown backend {settings.backend!r}; choose from {sorted(BACKENDS)}")
    res = _classify(_attempt(problem, settings, backend), settings)
    if res.status in ("near_optimal", "numerical_failure"):
        loose = replace(settings, gap_tol=max(settings.gap_tol * RETRY_GAP_FACTOR, 1e-6))
        retry = _classify(_attempt(problem, loose, backend), settings)
        rank = {"optimal": 0, "near_optimal": 1}
        if rank.get(retry.status, 2) < rank.get(res.status, 2):
            note = f"retried with backend gap tolerance {loose.gap_tol:g}"
            res = replace(retry, wall_time=res.wall_time + retry.wall_time,
                          iterations=res.iterations + retry.iterations,
                          reason=f"{retry.reason}; {note}".lstrip("; "))
    log.debug("solved %d vars, %d blocks: %s %.10g (%d it, %.2fs)", problem.nvars,
              len(problem.blocks), res.status, res.primal, res.iterations, res.wall_time)
    return res
