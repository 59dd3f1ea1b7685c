"""Dense two-phase tableau simplex for small linear programs.

Problems are stated as maximization with mixed-sense rows and per-variable
bounds. Fixed variables are substituted out before the tableau is built, so
branch-and-bound can tighten bounds without adding rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7

LE, GE, EQ = "<=", ">=", "="
_SENSES = (LE, GE, EQ)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LPProblem:
    """maximize c @ x  s.t.  A[i] @ x (sense[i]) b[i],  lower <= x <= upper."""

    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    b: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.senses = tuple(self.senses)
        if self.lower is None:
            self.lower = np.zeros(n)
        if self.upper is None:
            self.upper = np.full(n, np.inf)
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        m = self.A.shape[0]
        if self.b.size != m or len(self.senses) != m:
            raise ValueError("A, b and senses disagree on the number of rows")
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        if any(s not in _SENSES for s in self.senses):
            raise ValueError(f"senses must be drawn from {_SENSES}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A))
                and np.all(np.isfinite(self.b))):
            raise ValueError("objective and constraint coefficients must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("bounds admit no finite value")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def with_bounds(self, lower, upper) -> "LPProblem":
        return LPProblem(self.c, self.A, self.senses, self.b, lower, upper)

    def dumps(self) -> str:
        """Human-readable dump: objective line, constraints, bounds section."""
        def term_list(coeffs):
            parts = [f"{v:+g} x{j}" for j, v in enumerate(coeffs) if v != 0]
            return " ".join(parts) if parts else "0"

        lines = [f"max: {term_list(self.c)}", "subject to:"]
        for row, sense, rhs in zip(self.A, self.senses, self.b):
            lines.append(f"  {term_list(row)} {sense} {rhs:g}")
        lines.append("bounds:")
        for j, (lo, up) in enumerate(zip(self.lower, self.upper)):
            lines.append(f"  {lo:g} <= x{j} <= {up:g}")
        return "\n".join(lines) + "\n"


@dataclass
class LPSolution:
    status: str
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = float("nan")
    pivots: int = 0


@njit(cache=True)
def _pivot(T, row, col):
    m1, w = T.shape
    piv = T[row, col]
    for j in range(w):
        T[row, j] /= piv
    for i in range(m1):
        f = T[i, col]
        if i == row or f == 0.0:
            continue
        for j in range(w):
            v = T[row, j]
            if v != 0.0:
                T[i, j] -= f * v


@njit(cache=True)
def _run_simplex(T, basis, allowed, max_pivots):
    """Maximize in place; the last row holds reduced costs and -objective.

    Bland's rule on both the entering and the leaving choice, so degenerate
    pivots cannot cycle. Returns (status code, pivot count): 0 optimal,
    1 unbounded, 2 pivot limit hit.
    """
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    pivots = 0
    while pivots < max_pivots:
        col = -1
        for j in range(allowed):
            if T[m, j] > PIVOT_TOL:
                col = j
                break
        if col < 0:
            return 0, pivots
        row = -1
        best = np.inf
        for i in range(m):
            a = T[i, col]
            if a > PIVOT_TOL:
                r = T[i, rhs] / a
                tie_tol = PIVOT_TOL * max(1.0, abs(best)) if best < np.inf else 0.0
                if r < best - tie_tol:
                    best = r
                    row = i
                elif abs(r - best) <= tie_tol and basis[i] < basis[row]:
                    row = i
        if row < 0:
            return 1, pivots
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
    return 2, pivots


def _simplex(T, basis, allowed, max_pivots):
    code, pivots = _run_simplex(T, basis, allowed, max_pivots)
    if code == 2:
        raise RuntimeError("simplex exceeded its pivot limit")
    return (OPTIMAL if code == 0 else UNBOUNDED), pivots


def solve_lp(p: LPProblem) -> LPSolution:
    """Solve with the two-phase tableau method. Deterministic."""
    n = p.n_vars
    lo, up = p.lower, p.upper

    # variable transform x = offset + sign * y (+ free part), y >= 0
    fixed = np.isclose(lo, up, rtol=0.0, atol=0.0)
    offset = np.where(fixed, lo, 0.0)
    cols: list[tuple[int, float]] = []  # (original index, sign)
    extra_rows: list[tuple[int, float]] = []  # (y column, bound) for y <= bound
    for j in range(n):
        if fixed[j]:
            continue
        if np.isfinite(lo[j]):
            offset[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(up[j]):
                extra_rows.append((len(cols) - 1, up[j] - lo[j]))
        elif np.isfinite(up[j]):
            offset[j] = up[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))

    ny = len(cols)
    idx = np.array([j for j, _ in cols], dtype=int)
    signs = np.array([sign for _, sign in cols])
    M = p.A[:, idx] * signs
    cy = p.c[idx] * signs
    rhs = p.b - p.A @ offset
    senses = list(p.senses)

    nonzero = np.any(M != 0.0, axis=1)
    for i in np.flatnonzero(~nonzero):
        r, s = rhs[i], senses[i]
        if (s == LE and r < -FEAS_TOL) or (s == GE and r > FEAS_TOL) or (s == EQ and abs(r) > FEAS_TOL):
            return LPSolution(INFEASIBLE)
    keep = np.flatnonzero(nonzero)
    M = M[keep]
    rhs = rhs[keep]
    senses = [senses[i] for i in keep]
    if extra_rows:
        ub_rows = np.zeros((len(extra_rows), ny))
        ub_rows[np.arange(len(extra_rows)), [k for k, _ in extra_rows]] = 1.0
        M = np.vstack([M, ub_rows])
        rhs = np.concatenate([rhs, [bound for _, bound in extra_rows]])
        senses.extend([LE] * len(extra_rows))

    m = M.shape[0]
    for i in range(m):
        if rhs[i] < 0:
            M[i] = -M[i]
            rhs[i] = -rhs[i]
            senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]

    n_slack = sum(s != EQ for s in senses)
    art_rows = [i for i, s in enumerate(senses) if s != LE]
    n_art = len(art_rows)
    width = ny + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :ny] = M
    T[:m, -1] = rhs
    basis = np.zeros(m, dtype=int)
    k = ny
    for i, s in enumerate(senses):
        if s == LE:
            T[i, k] = 1.0
            basis[i] = k
            k += 1
        elif s == GE:
            T[i, k] = -1.0
            k += 1
    for a, i in enumerate(art_rows):
        T[i, ny + n_slack + a] = 1.0
        basis[i] = ny + n_slack + a

    max_pivots = 50 * (m + width + 10)
    pivots = 0
    if n_art:
        # phase 1: maximize -sum(artificials)
        T[-1, :] = 0.0
        T[-1, ny + n_slack:width] = -1.0
        for i in art_rows:
            T[-1] += T[i]
        status, pivots = _simplex(T, basis, width, max_pivots)
        if T[-1, -1] > FEAS_TOL * max(1.0, np.abs(rhs).max(initial=0.0)):
            return LPSolution(INFEASIBLE, pivots=pivots)
        # drive remaining artificials out of the basis; drop redundant rows
        first_art = ny + n_slack
        drop = []
        for i in range(m):
            if basis[i] >= first_art:
                nz = np.flatnonzero(np.abs(T[i, :first_art]) > PIVOT_TOL)
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                    pivots += 1
                else:
                    drop.append(i)
        if drop:
            keep_rows = [i for i in range(m) if i not in drop]
            T = np.vstack([T[keep_rows], T[-1:]])
            basis = basis[keep_rows]
            m = len(keep_rows)
        T = np.hstack([T[:, :first_art], T[:, -1:]])
        width = first_art

    # phase 2
    T[-1, :] = 0.0
    T[-1, :ny] = cy
    for i in range(m):
        cb = T[-1, basis[i]]
        if cb != 0.0:
            T[-1] -= cb * T[i]
    status, more = _simplex(T, basis, width, max_pivots)
    pivots += more
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, pivots=pivots)

    y = np.zeros(width)
    y[basis] = T[:m, -1]
    y[np.abs(y) < PIVOT_TOL] = 0.0
    x = offset.copy()
    for k, (j, sign) in enumerate(cols):
        x[j] += sign * y[k]
    x = np.clip(x, lo, up)
    return LPSolution(OPTIMAL, x, float(p.c @ x), pivots)


def is_feasible(p: LPProblem, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
    if np.any(x < p.lower - tol) or np.any(x > p.upper + tol):
        return False
    lhs = p.A @ x
    for v, s, r in zip(lhs, p.senses, p.b):
        if s == LE and v > r + tol:
            return False
        if s == GE and v < r - tol:
            return False
        if s == EQ and abs(v - r) > tol:
            return False
    return True
