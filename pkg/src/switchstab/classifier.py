"""Closed-form stability decision for planar switched pairs.

The three contraction factors below give the radius ratio of the worst
trajectory after one half turn around the origin. Each is defined only on its
own subcase and raises :class:`DomainError` elsewhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .config import settings
from .core2d import (CaseTag, Failure, HypothesisReport, Invariants, as_mat2, eig2,
                     hypotheses, invariants)
from .errors import DomainError


class Outcome(str, enum.Enum):
    GUES = "GUES"
    MARGINAL = "MarginallyStable"
    UNSTABLE = "Unstable"
    UNSUPPORTED = "UnsupportedClosedForm"


CONTRACTION_SUBCASES = ("CC.2.2", "RC.2.2.B", "RR.2.2.B")


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    subcase: str
    contraction: float | None = None
    near_boundary: bool = False
    swapped: bool = False
    invariants: Invariants | None = field(default=None, compare=False)
    report: HypothesisReport | None = field(default=None, compare=False)
    destabilizing_u: float | None = None

    def as_dict(self):
        out = {
            "outcome": self.outcome.value,
            "subcase": self.subcase,
            "contraction": self.contraction,
            "near_boundary": self.near_boundary,
            "swapped": self.swapped,
        }
        if self.destabilizing_u is not None:
            out["destabilizing_u"] = self.destabilizing_u
        if self.invariants is not None:
            out["invariants"] = self.invariants.as_dict()
        if self.report is not None:
            out["hypotheses"] = self.report.as_dict()
        return out


# ---------------------------------------------------------------------------
# contraction factors


def _require(case, inv: Invariants, expected: CaseTag):
    if inv.case_tag is not expected:
        raise DomainError(f"{case} needs a {expected.value} pair, got {inv.case_tag.value}")


def cc_factor(ra: float, rb: float, k: float) -> float:
    """Half-turn contraction of two fields with complex eigenvalues.

    ``ra, rb`` are the (positive) ratios -Re/Im of the eigenvalues and ``k``
    the cross invariant; defined for ``k > 1`` and a positive discriminant.
    """
    d = k * k + 2 * ra * rb * k - (1 + ra * ra + rb * rb)
    if not d > 0.0:
        raise DomainError(f"complex-complex factor needs D > 0, got {d!r}")
    if not k > 1.0:
        raise DomainError(f"complex-complex factor needs K > 1, got {k!r}")
    sd = math.sqrt(d)
    expo = (-ra * math.atan((-ra * k + rb) / sd)
            - rb * math.atan((ra - rb * k) / sd)
            - 0.5 * math.pi * (ra + rb))
    ratio = (ra * rb + k + sd) / (ra * rb + k - sd)
    return math.exp(expo) * math.sqrt(ratio)


def rho_cc(inv: Invariants) -> float:
    _require("rho_cc", inv, CaseTag.CC)
    return cc_factor(inv.ra, inv.rb, inv.k)


@dataclass(frozen=True)
class RCDetails:
    """Closed-form quantities of the mixed case, for oracle comparison."""
    value: float
    m_plus: float
    m_minus: float
    t1: float
    t_bar: float


def rc_details(a: float, b: float, k: float) -> RCDetails:
    """Mixed case with ``a = rho_A/i`` (real field), ``b = rho_B`` and
    ``k = K/i``. The slopes are those of the two collinearity lines in the
    normal form; ``t1`` is the time spent on the real field and ``t_bar`` the
    time spent on the rotating field.
    """
    d = -k * k - 2 * a * b * k - 1 + a * a - b * b
    chi = -a * k - b
    if not (d < 0.0 and chi < 0.0 and k > 0.0):
        raise DomainError(f"mixed factor needs D < 0, chi < 0, K/i > 0; got D={d!r}, "
                          f"chi={chi!r}, K/i={k!r}")
    s = math.sqrt(1 + k * k)
    sq = math.sqrt(-d)
    den = (-a - 1) * s
    mp = (-chi + sq) / den
    mm = (-chi - sq) / den
    cos_arg = (-a + b * k) / math.sqrt((1 + k * k) * (1 + b * b))
    t_bar = math.acos(min(1.0, max(-1.0, cos_arg)))
    ratio = mp / mm
    value = (ratio ** (-0.5 * (a - 1)) * math.exp(-b * t_bar)
             * (s * mm * math.sin(t_bar) - (math.cos(t_bar) - k * math.sin(t_bar))))
    return RCDetails(value, mp, mm, 0.5 * math.log(ratio), t_bar)


def rc_factor(a: float, b: float, k: float) -> float:
    return rc_details(a, b, k).value


def rho_rc(inv: Invariants) -> float:
    _require("rho_rc", inv, CaseTag.RC)
    return rc_factor(inv.ra, inv.rb, inv.k)


def rr_factor(a: float, b: float, k: float) -> float:
    """Both fields with real eigenvalues; ``a, b`` are rho/i (> 1)."""
    d = k * k - 2 * a * b * k - 1 + a * a + b * b
    if not (d > 0.0 and k < a * b and k < -1.0):
        raise DomainError(f"real-real factor needs D > 0, K < -rho_A rho_B, K < -1; "
                          f"got D={d!r}, K={k!r}")
    sd = math.sqrt(d)
    f_sym = (1 + a + b + k - sd) / (1 + a + b + k + sd)

    def f_asym(p, q):
        return ((q - k * p - sd) / (q - k * p + sd)) ** (0.5 * (p - 1))

    return -f_sym * f_asym(a, b) * f_asym(b, a)


def rho_rr(inv: Invariants) -> float:
    _require("rho_rr", inv, CaseTag.RR)
    return rr_factor(inv.ra, inv.rb, inv.k)


def contraction_factor(inv: Invariants) -> float:
    return {CaseTag.CC: rho_cc, CaseTag.RC: rho_rc, CaseTag.RR: rho_rr}[inv.case_tag](inv)


# ---------------------------------------------------------------------------
# case tree


def destabilizing_u(a, b) -> float | None:
    """Exact search for u in [0, 1] with M(u) = uA + (1-u)B not Hurwitz.

    tr M(u) is affine and det M(u) is quadratic in u, so it suffices to look
    at the endpoints and at the vertex of the determinant parabola.
    """
    a = as_mat2(a)
    b = as_mat2(b)
    dm = a - b
    c0 = np.linalg.det(b)
    c2 = np.linalg.det(dm)
    c1 = np.linalg.det(a) - c0 - c2

    def det(u):
        return c0 + c1 * u + c2 * u * u

    candidates = [0.0, 1.0]
    if c2 > 0.0:
        vertex = -c1 / (2 * c2)
        if 0.0 < vertex < 1.0:
            candidates.append(vertex)
    worst = None
    for u in candidates:
        if np.trace(b + u * dm) >= 0.0 or det(u) <= 0.0:
            if worst is None or det(u) < det(worst):
                worst = u
    return worst


def _with_boundary(subcase, rho, inv, **kw) -> Verdict:
    tol = settings.boundary_tol
    if abs(rho - 1.0) <= tol:
        return Verdict(Outcome.MARGINAL, subcase, rho, True, invariants=inv, **kw)
    outcome = Outcome.GUES if rho < 1.0 else Outcome.UNSTABLE
    return Verdict(outcome, subcase, rho, invariants=inv, **kw)


def _classify_cc(inv: Invariants, **kw) -> Verdict:
    tol = settings.boundary_tol
    d, k = inv.dd, inv.k
    if abs(d) <= tol:
        outcome = Outcome.GUES if k > 1 else Outcome.MARGINAL
        return Verdict(outcome, "CC.3", near_boundary=True, invariants=inv, **kw)
    if d < 0:
        return Verdict(Outcome.GUES, "CC.1", invariants=inv, **kw)
    if k < -1:
        return Verdict(Outcome.UNSTABLE, "CC.2.1", invariants=inv, **kw)
    return _with_boundary("CC.2.2", rho_cc(inv), inv, **kw)


def _classify_rc(inv: Invariants, **kw) -> Verdict:
    tol = settings.boundary_tol
    d, chi, k = inv.dd, inv.chi, inv.k
    if abs(d) <= tol:
        outcome = Outcome.GUES if chi < 0 else Outcome.MARGINAL
        return Verdict(outcome, "RC.3", near_boundary=True, invariants=inv, **kw)
    if d > 0:
        return Verdict(Outcome.GUES, "RC.1", invariants=inv, **kw)
    if chi > 0:
        return Verdict(Outcome.UNSTABLE, "RC.2.1", invariants=inv, **kw)
    if k <= 0:
        return Verdict(Outcome.GUES, "RC.2.2.A", invariants=inv, **kw)
    return _with_boundary("RC.2.2.B", rho_rc(inv), inv, **kw)


def _classify_rr(inv: Invariants, **kw) -> Verdict:
    tol = settings.boundary_tol
    d, k = inv.dd, inv.k
    ab = inv.ra * inv.rb  # equals -rho_A rho_B for imaginary rho
    if abs(d) <= tol:
        outcome = Outcome.GUES if k < ab else Outcome.MARGINAL
        return Verdict(outcome, "RR.3", near_boundary=True, invariants=inv, **kw)
    if d < 0:
        return Verdict(Outcome.GUES, "RR.1", invariants=inv, **kw)
    if k > ab:
        return Verdict(Outcome.UNSTABLE, "RR.2.1", invariants=inv, **kw)
    if k > -1:
        return Verdict(Outcome.GUES, "RR.2.2.A", invariants=inv, **kw)
    return _with_boundary("RR.2.2.B", rho_rr(inv), inv, **kw)


def classify(a, b) -> Verdict:
    """Decide stability of x' = u A x + (1-u) B x under arbitrary switching."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    report = hypotheses(a, b)
    if not report.h1:
        u = 1.0 if not eig2(a).hurwitz else 0.0
        return Verdict(Outcome.UNSTABLE, "NonHurwitz", report=report, destabilizing_u=u)
    if not report.h2:
        return Verdict(Outcome.GUES, "Commuting", report=report)
    if report.failure_detail in (Failure.NON_DIAGONALIZABLE, Failure.EIGENVALUE_MULTIPLICITY):
        u = destabilizing_u(a, b)
        if u is not None:
            return Verdict(Outcome.UNSTABLE, "NonDiagonalizable", report=report,
                           destabilizing_u=u)
        return Verdict(Outcome.UNSUPPORTED, "NonDiagonalizable", report=report)
    if not report.h4:
        return Verdict(Outcome.GUES, "SharedEigenvector", report=report)
    inv = invariants(a, b, report)
    kw = {"swapped": inv.swapped, "report": report}
    if inv.case_tag is CaseTag.CC:
        return _classify_cc(inv, **kw)
    if inv.case_tag is CaseTag.RC:
        return _classify_rc(inv, **kw)
    return _classify_rr(inv, **kw)
