"""Sampled linear-feasibility search for homogeneous polynomial CLFs.

A candidate ``V(x) = sum_j c_j x1^(d-j) x2^j`` must satisfy, at every sample
``x_s`` on the unit circle, ``V(x_s) >= 1`` and ``grad V(x_s) . D x_s <= -eps``
for ``D`` in ``{A, B}``. Checking the two extreme fields is enough because the
decrease is affine in the switching value ``u``. Every constraint is
homogeneous in ``c`` up to its right-hand side, so the system is solvable
exactly when the strict version is, and that is settled by Gordan's
alternative with the hand-written simplex in :mod:`.simplex`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .classifier import Outcome, cc_factor, classify
from .config import settings
from .core2d import as_mat2
from .errors import BracketFailure, InvalidInput
from .io import csv_text
from .normal_form import cc_pair_from_kappa
from .polynomial import (HomogeneousPolynomial, binomial_scale, decrease_rows, monomials,
                         unit_circle)
from .simplex import strict_feasibility

MAX_CUT_ROUNDS = 5


@dataclass
class FeasibilityProblem:
    degree: int
    samples: np.ndarray
    epsilon: float
    a: np.ndarray
    b: np.ndarray

    def constraints(self):
        """(G, h) with ``G c <= h`` encoding the sampled CLF conditions."""
        n = len(self.samples)
        g = np.vstack([-monomials(self.samples, self.degree),
                       decrease_rows(self.samples, self.degree, self.a),
                       decrease_rows(self.samples, self.degree, self.b)])
        h = np.concatenate([-np.ones(n), -self.epsilon * np.ones(2 * n)])
        return g, h


@dataclass
class DegreeOutcome:
    degree: int
    status: str                    # "feasible", "infeasible" or "unverified"
    coeffs: np.ndarray | None = None
    margin: float = 0.0
    rounds: int = 0
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def polynomial(self) -> HomogeneousPolynomial | None:
        return None if self.coeffs is None else HomogeneousPolynomial(self.coeffs)

    def as_dict(self):
        return {"degree": self.degree, "status": self.status,
                "coeffs": None if self.coeffs is None else self.coeffs.tolist(),
                "margin": self.margin, "rounds": self.rounds}


@dataclass
class ScanResult:
    outcomes: list = field(default_factory=list)
    d_cap: int = 0

    @property
    def d_min(self) -> int | None:
        for o in self.outcomes:
            if o.feasible:
                return o.degree
        return None

    @property
    def exceeds_cap(self) -> bool:
        return self.d_min is None

    def as_dict(self):
        return {"d_min": self.d_min if self.d_min is not None else "exceeds_cap",
                "d_cap": self.d_cap, "outcomes": [o.as_dict() for o in self.outcomes]}


def _solve(problem: FeasibilityProblem):
    g, h = problem.constraints()
    scale = binomial_scale(problem.degree)
    gs = g * scale
    sol = strict_feasibility(gs, max_iter=settings.lp_max_iter, tol=settings.lp_tol)
    if not sol.feasible:
        return None, sol
    z = sol.direction
    # unit(g_i) . z <= -1, so lam z meets g_i . c <= h_i once lam >= |h_i| / |g_i|
    lam = float(np.max(np.abs(h) / np.linalg.norm(gs, axis=1)))
    return scale * (lam * z), sol


def verify_coefficients(a, b, coeffs, n: int, epsilon: float):
    """Fine-grid check; returns the sample points where it fails."""
    poly = HomogeneousPolynomial(coeffs)
    x = unit_circle(n)
    bad = poly(x) <= 0.0
    for d in (a, b):
        bad |= poly.decrease(x, d) > -0.5 * epsilon
    return x[bad]


def feasible_degree(a, b, d: int, n_samples: int | None = None,
                    epsilon: float | None = None) -> DegreeOutcome:
    """Search a degree-``d`` homogeneous CLF on sampled constraints.

    A solution is accepted only after the decrease inequalities hold with
    margin ``eps/2`` on a grid ``verify_factor`` times denser; failing fine
    points are added as cuts and the problem re-solved a few times.
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    if d < 2 or d % 2:
        raise InvalidInput(f"degree must be even and >= 2, got {d}")
    n_samples = int(n_samples or settings.n_samples)
    epsilon = float(settings.epsilon if epsilon is None else epsilon)
    samples = unit_circle(n_samples)
    iterations = 0
    for rounds in range(MAX_CUT_ROUNDS + 1):
        problem = FeasibilityProblem(d, samples, epsilon, a, b)
        coeffs, sol = _solve(problem)
        iterations += sol.iterations
        if coeffs is None:
            return DegreeOutcome(d, "infeasible", None, sol.margin, rounds, iterations)
        bad = verify_coefficients(a, b, coeffs, settings.verify_factor * n_samples, epsilon)
        if len(bad) == 0:
            return DegreeOutcome(d, "feasible", coeffs, sol.margin, rounds, iterations)
        samples = np.vstack([samples, bad])
    return DegreeOutcome(d, "unverified", coeffs, sol.margin, MAX_CUT_ROUNDS, iterations)


def min_degree(a, b, d_cap: int, n_samples: int | None = None) -> ScanResult:
    """Escalate d = 2, 4, ... up to ``d_cap`` and stop at the first verified degree.

    This estimates the minimal degree of a homogeneous polynomial CLF at a
    fixed sampling; an infeasible answer is evidence, not a proof.
    """
    if d_cap < 2:
        raise InvalidInput("d_cap must be at least 2")
    result = ScanResult(d_cap=d_cap)
    for d in range(2, d_cap + 1, 2):
        out = feasible_degree(a, b, d, n_samples)
        result.outcomes.append(out)
        if out.feasible:
            break
    return result


# ---------------------------------------------------------------------------
# unbounded degree near the marginal curve


def diagonal_marginal_rho(kappa: float) -> float:
    """rho* with equal eigenvalue ratios rho_A = rho_B = rho* and half-turn
    contraction exactly 1 at cross invariant ``kappa``.

    The marginal curve joins (sqrt(kappa^2 - 1), 0) to (0, sqrt(kappa^2 - 1)),
    so the diagonal meets it in (0, sqrt(kappa^2 - 1)).
    """
    if not kappa > 1.0:
        raise InvalidInput(f"kappa must exceed 1, got {kappa}")
    hi = math.sqrt(kappa * kappa - 1.0)
    lo = 1e-9 * hi

    def f(r):
        return cc_factor(r, r, kappa) - 1.0

    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo > 0.0 > f_hi):
        raise BracketFailure(f"no sign change on the diagonal: f({lo})={f_lo}, f({hi})={f_hi}")
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass
class GrowthRow:
    k: int
    rho: float
    rho_cc: float
    d_min: int | None
    outcome: str
    wall_time: float

    def csv_row(self):
        d = "exceeds_cap" if self.d_min is None else str(self.d_min)
        return [self.k, self.rho, self.rho_cc, d, f"{self.wall_time:.3f}"]


@dataclass
class GrowthResult:
    kappa: float
    rho_star: float
    dd_star: float
    d_cap: int
    rows: list

    def d_min_sequence(self):
        return [r.d_min if r.d_min is not None else math.inf for r in self.rows]

    @property
    def non_decreasing(self) -> bool:
        seq = self.d_min_sequence()
        return all(x <= y for x, y in zip(seq, seq[1:]))

    def to_csv(self, include_time: bool = True) -> str:
        header = ["k", "rho", "rho_cc", "d_min", "wall_time"]
        rows = [r.csv_row() for r in self.rows]
        if not include_time:
            header, rows = header[:-1], [row[:-1] for row in rows]
        return csv_text(header, rows)


def sequence_pairs(kappa: float, n_steps: int):
    """Equal-ratio pairs rho_k = rho* (1 + 2^-k), k = 0..n_steps-1, on the
    stable side of the marginal curve and approaching it."""
    rho_star = diagonal_marginal_rho(kappa)
    # the stable side is the one where the contraction drops below 1
    side = 1.0 if cc_factor(rho_star * 1.001, rho_star * 1.001, kappa) < 1.0 else -1.0
    out = []
    for k in range(n_steps):
        rho = rho_star * (1.0 + side * 2.0 ** (-(k + (1 if side < 0 else 0))))
        out.append((k, rho, cc_pair_from_kappa(rho, rho, kappa)))
    return rho_star, out


def theorem2_experiment(kappa: float, n_steps: int, d_cap: int,
                        n_samples: int | None = None) -> GrowthResult:
    rho_star, pairs = sequence_pairs(kappa, n_steps)
    r2 = rho_star * rho_star
    dd_star = kappa * kappa + 2 * r2 * kappa - (1 + 2 * r2)
    rows = []
    for k, rho, (a, b) in pairs:
        start = time.perf_counter()
        verdict = classify(a, b)
        scan = min_degree(a, b, d_cap, n_samples)
        rows.append(GrowthRow(k, rho, cc_factor(rho, rho, kappa), scan.d_min,
                                verdict.outcome.value, time.perf_counter() - start))
    return GrowthResult(kappa, rho_star, dd_star, d_cap, rows)


def gues_sequence(result: GrowthResult) -> bool:
    return all(r.outcome == Outcome.GUES.value for r in result.rows)
