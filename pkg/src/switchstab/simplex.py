"""Dense two-phase tableau simplex.

Solves ``min c.x  s.t.  A x = b, x >= 0``. Entering columns follow Dantzig's
most-negative reduced cost; the leaving row is chosen by the lexicographic
ratio test on the rows of the current basis inverse, which rules out cycling.
The artificial columns are kept in the tableau for the whole run, so the basis
inverse (and therefore the dual solution) is always available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverCycle


@dataclass
class LPResult:
    status: str                  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    objective: float | None
    duals: np.ndarray | None     # y with A^T y <= c at optimum
    phase1_objective: float
    phase1_duals: np.ndarray     # duals of the phase-1 problem
    iterations: int


class _Tableau:
    def __init__(self, a, b, tol):
        m, n = a.shape
        self.m, self.n, self.tol = m, n, tol
        self.sign = np.where(b < 0, -1.0, 1.0)
        t = np.zeros((m + 1, n + m + 1))
        t[:m, :n] = a * self.sign[:, None]
        t[:m, n:n + m] = np.eye(m)
        t[:m, -1] = b * self.sign
        self.t = t
        self.basis = np.arange(n, n + m)
        self.iterations = 0

    @property
    def binv(self):
        # columns of the artificial block hold B^-1 times the sign flips
        return self.t[:self.m, self.n:self.n + self.m] * self.sign[None, :]

    def set_objective(self, cost):
        """Load the reduced-cost row for ``cost`` (length n + m) in the current basis."""
        row = np.zeros(self.t.shape[1])
        row[:-1] = cost
        cb = cost[self.basis]
        row -= cb @ self.t[:self.m]
        self.t[-1] = row

    def _leaving(self, col):
        m = self.m
        column = self.t[:m, col]
        rows = np.nonzero(column > self.tol)[0]
        if rows.size == 0:
            return None
        ratios = self.t[rows, -1] / column[rows]
        best = ratios.min()
        scale = max(1.0, abs(best))
        cand = rows[ratios <= best + self.tol * scale]
        if cand.size == 1:
            return int(cand[0])
        # lexicographic tie break on rows of the basis inverse
        lex = self.t[cand, self.n:self.n + m] / column[cand, None]
        order = np.lexsort(lex.T[::-1])
        return int(cand[order[0]])

    def pivot(self, row, col):
        t = self.t
        t[row] /= t[row, col]
        others = np.nonzero(t[:, col])[0]
        others = others[others != row]
        t[others] -= np.outer(t[others, col], t[row])
        self.basis[row] = col
        self.iterations += 1

    def run(self, allowed, max_iter):
        """Iterate until optimal; returns False if unbounded."""
        while True:
            reduced = np.where(allowed, self.t[-1, :-1], 0.0)
            col = int(np.argmin(reduced))
            if reduced[col] >= -self.tol:
                return True
            row = self._leaving(col)
            if row is None:
                return False
            if self.iterations >= max_iter:
                raise SolverCycle(f"simplex exceeded {max_iter} pivots")
            self.pivot(row, col)


def solve_standard(c, a_eq, b_eq, max_iter: int = 50_000, tol: float = 1e-9) -> LPResult:
    """Two-phase simplex on ``min c.x, A x = b, x >= 0``."""
    a = np.atleast_2d(np.asarray(a_eq, dtype=float))
    b = np.asarray(b_eq, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    m, n = a.shape
    if b.shape != (m,) or c.shape != (n,):
        raise ValueError("inconsistent LP dimensions")
    tab = _Tableau(a, b, tol)

    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab.set_objective(phase1)
    allowed = np.ones(n + m, dtype=bool)
    tab.run(allowed, max_iter)
    w = -tab.t[-1, -1]
    y1 = phase1[tab.basis] @ tab.binv
    scale = max(1.0, float(np.max(np.abs(b))))
    if w > tol * scale:
        return LPResult("infeasible", None, None, None, float(w), y1, tab.iterations)

    # drive artificial variables out of the basis where possible
    for row in range(m):
        if tab.basis[row] >= n:
            entries = np.abs(tab.t[row, :n])
            col = int(np.argmax(entries))
            if entries[col] > tol:
                tab.pivot(row, col)

    phase2 = np.concatenate([c, np.zeros(m)])
    tab.set_objective(phase2)
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    if not tab.run(allowed, max_iter):
        return LPResult("unbounded", None, None, None, float(w), y1, tab.iterations)
    x = np.zeros(n + m)
    x[tab.basis] = tab.t[:m, -1]
    y = phase2[tab.basis] @ tab.binv
    return LPResult("optimal", x[:n], float(c @ x[:n]), y, float(w), y1, tab.iterations)


@dataclass
class StrictSolution:
    feasible: bool
    direction: np.ndarray | None   # z with unit(g_i) . z <= -1 for every row
    margin: float                  # normalized separation (phase-1 optimum)
    iterations: int


def strict_feasibility(rows, max_iter: int = 50_000, tol: float = 1e-9) -> StrictSolution:
    """Decide whether some z has ``g_i . z < 0`` for every row ``g_i``.

    By Gordan's alternative this fails exactly when zero is a convex
    combination of the rows. The phase-1 problem ``sum y_i n_i = 0, sum y_i =
    1, y >= 0`` on the unit-normalized rows has optimum equal to the distance
    certificate ``t`` of its dual, ``n_i . z + t <= 0``; a positive optimum
    hands back ``z`` directly.
    """
    g = np.atleast_2d(np.asarray(rows, dtype=float))
    norms = np.linalg.norm(g, axis=1)
    if np.any(norms == 0.0):
        return StrictSolution(False, None, 0.0, 0)
    nrm = g / norms[:, None]
    k, dim = nrm.shape
    a_eq = np.vstack([nrm.T, np.ones((1, k))])
    b_eq = np.concatenate([np.zeros(dim), [1.0]])
    res = solve_standard(np.zeros(k), a_eq, b_eq, max_iter=max_iter, tol=tol)
    margin = res.phase1_objective
    if res.status == "infeasible" and margin > tol:
        y = res.phase1_duals
        z = y[:dim] / y[dim]
        return StrictSolution(True, z, float(margin), res.iterations)
    return StrictSolution(False, None, float(margin), res.iterations)
