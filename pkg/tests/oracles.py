"""Independent brute-force oracles shared by unit and acceptance tests."""

import itertools

import numpy as np

from copier.lp import EQ, GE, LE


def half_integral_cover_lp(n, edges):
    """min sum(x) over x in {0, 1/2, 1}^n with x_u + x_v >= 1; returns the maximized objective."""
    best = -np.inf
    for x in itertools.product((0.0, 0.5, 1.0), repeat=n):
        if all(x[u] + x[v] >= 1.0 for u, v in edges):
            best = max(best, -sum(x))
    return best


def vertex_enumeration(p):
    """Best objective over all basic feasible points of a bounded LP, or None if infeasible."""
    n = p.n_vars
    rows, rhs = [], []
    for a, s, b in zip(p.A, p.senses, p.b):
        rows.append(a)
        rhs.append(b)
    for j in range(n):
        for bound in (p.lower[j], p.upper[j]):
            if np.isfinite(bound):
                e = np.zeros(n)
                e[j] = 1.0
                rows.append(e)
                rhs.append(bound)
    rows, rhs = np.array(rows), np.array(rhs)
    best = None
    for subset in itertools.combinations(range(len(rows)), n):
        M = rows[list(subset)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs[list(subset)])
        if _feasible(p, x):
            v = float(p.c @ x)
            best = v if best is None else max(best, v)
    return best


def _feasible(p, x, tol=1e-9):
    if np.any(x < p.lower - tol) or np.any(x > p.upper + tol):
        return False
    for a, s, b in zip(p.A, p.senses, p.b):
        v = a @ x
        if (s == LE and v > b + tol) or (s == GE and v < b - tol) or (s == EQ and abs(v - b) > tol):
            return False
    return True
