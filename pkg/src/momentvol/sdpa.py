"""SDPA sparse (.dat-s) export and a minimal reader for round trips.

Conventions of the writer:

* SDPA solves ``min c.x  s.t.  sum_i F_i x_i - F_0 >= 0``.  Our problems
  maximise ``objective . x`` subject to ``const + coef @ x >= 0`` (PSD), so
  ``c = -objective``, ``F_0 = -const`` and ``F_i`` is column i of ``coef``.
* Each equality row ``a . x = b`` is split into two diagonal LP entries,
  ``a . x - b >= 0`` followed (after all "+" rows) by ``-a . x + b >= 0``.
  They live in one trailing LP block of size ``-2m``.
* Entries are listed sorted by (matrix, block, i, j) with 1-based indices
  and i <= j; values are printed with ``repr`` so they round-trip exactly.
  Identical problems therefore produce byte-identical files.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .relax import ConicProblem, PsdBlock, tri_index, tri_len

SPLIT_MARK = "* equalities split as +rows then -rows in the LP block"


def _tri_coords(size: int) -> tuple[np.ndarray, np.ndarray]:
    """(i, j) of every packed position, column-wise upper triangle."""
    ii, jj = [], []
    for j in range(size):
        for i in range(j + 1):
            ii.append(i)
            jj.append(j)
    return np.array(ii, dtype=int), np.array(jj, dtype=int)


def _fmt(v: float) -> str:
    return repr(float(v) + 0.0)  # + 0.0 folds -0.0 into 0.0


def sdpa_lines(problem: ConicProblem) -> list[str]:
    m = problem.nvars
    n_eq = problem.n_eq
    struct = [b.size for b in problem.blocks] + ([-2 * n_eq] if n_eq else [])
    lines = [f'"momentvol export: {len(problem.blocks)} psd blocks, {n_eq} equalities"']
    if n_eq:
        lines.append(SPLIT_MARK)
    lines.append(str(m))
    lines.append(str(len(struct)))
    lines.append(" ".join(str(s) for s in struct))
    lines.append(" ".join(_fmt(-v) for v in problem.objective))

    entries = []  # (mat, blk, i, j, value)
    for b, blk in enumerate(problem.blocks, start=1):
        ii, jj = _tri_coords(blk.size)
        for t in np.flatnonzero(blk.const):
            entries.append((0, b, ii[t] + 1, jj[t] + 1, -blk.const[t]))
        coo = blk.coef.tocoo()
        for t, var, v in zip(coo.row, coo.col, coo.data):
            if v != 0.0:
                entries.append((int(var) + 1, b, ii[t] + 1, jj[t] + 1, v))
    if n_eq:
        lp = len(problem.blocks) + 1
        for r, rhs in enumerate(problem.eq_rhs):
            if rhs != 0.0:
                entries.append((0, lp, r + 1, r + 1, rhs))
                entries.append((0, lp, n_eq + r + 1, n_eq + r + 1, -rhs))
        coo = problem.eq_matrix.tocoo()
        for r, var, v in zip(coo.row, coo.col, coo.data):
            if v != 0.0:
                entries.append((int(var) + 1, lp, r + 1, r + 1, v))
                entries.append((int(var) + 1, lp, n_eq + r + 1, n_eq + r + 1, -v))
    entries.sort(key=lambda e: e[:4])
    # merge duplicates defensively (coef matrices are already summed)
    merged: list = []
    for e in entries:
        if merged and merged[-1][:4] == e[:4]:
            merged[-1] = (*e[:4], merged[-1][4] + e[4])
        else:
            merged.append(e)
    lines.extend(f"{a} {b} {i} {j} {_fmt(v)}" for a, b, i, j, v in merged)
    return lines


def export_sdpa(problem: ConicProblem, path) -> Path:
    path = Path(path)
    path.write_text("\n".join(sdpa_lines(problem)) + "\n")
    return path


@dataclass(frozen=True)
class SdpaData:
    m: int
    block_struct: tuple[int, ...]
    c: np.ndarray
    entries: tuple[tuple[int, int, int, int, float], ...]
    split_equalities: bool

    def to_conic(self) -> ConicProblem:
        """Rebuild a ConicProblem (maximisation form) from the SDPA data."""
        psd = [(b, s) for b, s in enumerate(self.block_struct, start=1) if s > 0]
        lp = [(b, -s) for b, s in enumerate(self.block_struct, start=1) if s < 0]
        consts = {b: np.zeros(tri_len(s)) for b, s in psd}
        trip = {b: ([], [], []) for b, _ in psd}
        lp_const = {b: np.zeros(s) for b, s in lp}
        lp_trip = {b: ([], [], []) for b, _ in lp}
        for mat, b, i, j, v in self.entries:
            if b in consts:
                t = tri_index(i - 1, j - 1)
                if mat == 0:
                    consts[b][t] = -v
                else:
                    trip[b][0].append(t)
                    trip[b][1].append(mat - 1)
                    trip[b][2].append(v)
            else:
                if i != j:
                    raise ValueError("off-diagonal entry in an LP block")
                if mat == 0:
                    lp_const[b][i - 1] = -v
                else:
                    lp_trip[b][0].append(i - 1)
                    lp_trip[b][1].append(mat - 1)
                    lp_trip[b][2].append(v)
        blocks = []
        for b, s in psd:
            r, c, v = trip[b]
            coef = sp.csr_matrix((v, (r, c)), shape=(tri_len(s), self.m))
            blocks.append(PsdBlock(f"block{b}", s, consts[b], coef))
        eq = sp.csr_matrix((0, self.m))
        rhs = np.zeros(0)
        for b, s in lp:
            r, c, v = lp_trip[b]
            rows = sp.csr_matrix((v, (r, c)), shape=(s, self.m))
            const = lp_const[b]
            if self.split_equalities and s % 2 == 0:
                half = s // 2
                eq = sp.vstack([eq, rows[:half]], format="csr")
                rhs = np.concatenate([rhs, -const[:half]])
            else:
                for k in range(s):
                    blocks.append(PsdBlock(f"lp{b}.{k + 1}", 1, np.array([const[k]]),
                                           sp.csr_matrix(rows[k])))
        return ConicProblem(self.m, -np.asarray(self.c), tuple(blocks), eq, rhs)


def _numbers(line: str) -> list[str]:
    return line.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ") \
        .replace(")", " ").split()


def read_sdpa(path) -> SdpaData:
    text = Path(path).read_text()
    split = False
    body = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped[0] in '"*':
            split |= stripped == SPLIT_MARK
            continue
        body.append(stripped)
    if len(body) < 4:
        raise ValueError("truncated SDPA file")
    m = int(_numbers(body[0])[0])
    nblocks = int(_numbers(body[1])[0])
    struct = tuple(int(x) for x in _numbers(body[2])[:nblocks])
    c = np.array([float(x) for x in _numbers(body[3])[:m]])
    entries = []
    for line in body[4:]:
        parts = _numbers(line)
        mat, blk, i, j = (int(x) for x in parts[:4])
        entries.append((mat, blk, i, j, float(parts[4])))
    return SdpaData(m, struct, c, tuple(entries), split)
