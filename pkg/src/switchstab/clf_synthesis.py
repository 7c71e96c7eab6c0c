"""Common Lyapunov functions built from the worst trajectory and value function.

Three constructions:

* :func:`levelset_clf` shrinks the decay rates of both fields by a common
  factor ``zeta`` until the pair becomes marginal; the closed worst trajectory
  of the shrunk pair is then the unit ball of ``V(x) = |x| / r_tilde(angle x)``.
* :func:`poly_clf` takes gradients ``w_k`` of the square-root value function at
  points of its unit level set and returns ``sum_k (w_k . x)^(2p)`` for the
  first ``p = 1, 2, 4, ...`` that passes a sampled decrease check.
* :func:`polytope_clf` keeps the same forms and uses ``max_k |w_k . x|``.

Every CLF object offers ``log_value(x)`` and ``decrease(x, D)``, the latter
being the time derivative of ``log F`` along ``x' = D x``. Working with
logarithms keeps powers such as 2^15 inside floating-point range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .classifier import Outcome, cc_factor, classify, rc_factor, rr_factor
from .config import settings
from .core2d import CaseTag, as_mat2, expm2, invariants, scale_decay
from .degree_scan import min_degree
from .errors import (ConvexityFailure, DomainError, EscalationExceeded, InvalidInput,
                     NotGUES, NumericalFailure, RootBracketFailure, SubcaseUnsupported)
from .normal_form import to_normal_form
from .polynomial import HomogeneousPolynomial, unit_circle
from .value_function import (is_strictly_convex, decrease_constants, level_gradient, level_point,
                             solve_value)
from .worst_trajectory import collinearity, integrate_worst

TWO_PI = 2.0 * math.pi
LEVELSET_SUBCASES = ("CC.2.2", "RC.2.2.B", "RR.2.2.B")
QUADRATIC_SUBCASES = ("CC.1", "RC.1", "RR.1", "RC.2.2.A", "RR.2.2.A",
                      "Commuting", "SharedEigenvector")


def _cross(x, y):
    return x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0]


def _polar_rates(x, d):
    """(d log r / dt, d angle / dt) along x' = D x."""
    v = x @ np.asarray(d).T
    r2 = np.einsum("ni,ni->n", x, x)
    return np.einsum("ni,ni->n", x, v) / r2, _cross(x, v) / r2


# ---------------------------------------------------------------------------
# level-set construction


class ClosedCurve:
    """Star-shaped closed curve ``r = r_tilde(angle)`` traced by exact arcs.

    Each arc keeps its own Hermite interpolant of ``log r`` in the swept angle,
    with the exact slope ``(x . Fx) / (s x cross Fx)`` at every node, so corners
    where the active field changes are reproduced rather than smoothed. A
    residual closure gap is spread multiplicatively over the turn.
    """

    def __init__(self, traj, n_per_arc: int = 400):
        self.orientation = traj.orientation
        s = self.orientation
        self.theta0 = math.atan2(traj.x0[1], traj.x0[0])
        us, logs, slopes, fields = [], [], [], []
        u_prev = 0.0
        for arc in traj.arcs:
            f = traj.matrix(arc.field)
            ts = np.linspace(0.0, arc.duration, n_per_arc + 1)
            xs = expm2(f, ts) @ arc.start
            theta = np.unwrap(np.arctan2(xs[:, 1], xs[:, 0]))
            u = s * (theta - theta[0]) + u_prev
            radial, angular = _polar_rates(xs, f)
            us.append(u)
            logs.append(np.log(np.linalg.norm(xs, axis=1)))
            slopes.append(radial / (s * angular))
            fields.append(arc.field)
            u_prev = u[-1]
        self.sweep = u_prev
        gap = logs[-1][-1] - logs[0][0]
        self.gap = float(gap)
        self.splines = []
        for u, lg, sl in zip(us, logs, slopes):
            self.splines.append(CubicHermiteSpline(u, lg - gap * u / u_prev,
                                                   sl - gap / u_prev))
        self.breaks = np.array([u[0] for u in us] + [u_prev])
        self.fields = fields

    def _locate(self, theta):
        u = np.mod(self.orientation * (np.asarray(theta, dtype=float) - self.theta0), TWO_PI)
        u = u * (self.sweep / TWO_PI)
        idx = np.clip(np.searchsorted(self.breaks, u, side="right") - 1, 0, len(self.splines) - 1)
        return u, idx

    def _eval(self, theta, nu):
        u, idx = self._locate(theta)
        out = np.empty_like(u)
        for i, sp in enumerate(self.splines):
            m = idx == i
            if m.any():
                out[m] = sp(u[m], nu)
        return out

    def log_r(self, theta):
        return self._eval(theta, 0)

    def __call__(self, theta):
        return np.exp(self.log_r(theta))

    def log_slope(self, theta):
        """d log r_tilde / d angle."""
        return self.orientation * self._eval(theta, 1) * (self.sweep / TWO_PI)

    def switch_angles(self):
        return [self.theta0 + self.orientation * u for u in self.breaks[1:-1]]

    def rows(self, n: int = 720):
        theta = TWO_PI * np.arange(n) / n
        return [(float(t), float(r)) for t, r in zip(theta, self(theta))]


rescale = scale_decay


@dataclass
class LevelSetCLF:
    zeta: float
    pair_tilde: tuple
    r_tilde: ClosedCurve
    subcase: str
    det_checks: dict = field(default_factory=dict)
    degree: int = 1

    def log_value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        theta = np.arctan2(x[:, 1], x[:, 0])
        return np.log(np.linalg.norm(x, axis=1)) - self.r_tilde.log_r(theta)

    def decrease(self, x, d):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        theta = np.arctan2(x[:, 1], x[:, 0])
        radial, angular = _polar_rates(x, d)
        return radial - self.r_tilde.log_slope(theta) * angular

    def to_dict(self):
        at, bt = self.pair_tilde
        return {"type": "levelset", "zeta": self.zeta, "degree": 1, "subcase": self.subcase,
                "pair_tilde": {"a": at.tolist(), "b": bt.tolist()},
                "curve": [list(r) for r in self.r_tilde.rows()]}

    def level_curve(self, n: int = 720):
        return [(t, r * math.cos(t), r * math.sin(t)) for t, r in self.r_tilde.rows(n)]


def _factor_function(case: CaseTag):
    return {CaseTag.CC: cc_factor, CaseTag.RC: rc_factor, CaseTag.RR: rr_factor}[case]


def marginal_zeta(a, b):
    """Common factor ``zeta`` in (0, 1) making the shrunk pair marginal.

    In the complex case the contraction at ``zeta -> 0`` exceeds one (the
    marginal curve separates the origin from every stable pair), which gives
    the bracket. In the other two cases the factor is only defined while the
    shrunk pair stays inside its subcase, so the bracket is found by scanning
    ``zeta`` downward and the call fails if the subcase is left first.
    """
    inv = invariants(a, b)
    f = _factor_function(inv.case_tag)
    ra, rb, k = inv.ra, inv.rb, inv.k

    def g(z):
        return f(z * ra, z * rb, k) - 1.0

    if inv.case_tag is CaseTag.CC:
        lo, hi = 0.0, 1.0
        if not (g(lo) > 0.0 > g(hi)):
            raise RootBracketFailure(f"no sign change for zeta in (0, 1): "
                                     f"g(0)={g(lo)!r}, g(1)={g(hi)!r}")
    else:
        hi, lo = 1.0, None
        if not g(hi) < 0.0:
            raise RootBracketFailure("pair is not contracting")
        for z in np.linspace(1.0, 0.0, 801)[1:]:
            if inv.case_tag is CaseTag.RC and z * ra <= 1.0:
                break
            if inv.case_tag is CaseTag.RR and min(z * ra, z * rb) <= 1.0:
                break
            try:
                val = g(z)
            except DomainError:
                break
            if val >= 0.0:
                lo = float(z)
                break
            hi = float(z)
        if lo is None:
            raise SubcaseUnsupported(f"{inv.case_tag.value} pair leaves its subcase before "
                                     "becoming marginal under a common rescaling")
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def det_checks(a, b, zeta: float, n: int = 720):
    """Sign checks ``det(A~ x, A x) > 0`` and ``det(B~ x, B x) > 0`` in the
    canonical coordinates of the pair, with the closed-form right-hand sides
    ``rho_A (1 - zeta) (E x1^2 + x2^2 / E)`` and ``rho_B (1 - zeta) |x|^2``."""
    nf = to_normal_form(a, b)
    if nf.case_tag is not CaseTag.CC:
        return {"applicable": False}
    x = unit_circle(n)
    an, bn = nf.a_nf, nf.b_nf
    ra, rb, e = nf.params["rho_a"], nf.params["rho_b"], nf.params["E"]
    det_a = _cross(x @ rescale(an, zeta).T, x @ an.T)
    det_b = _cross(x @ rescale(bn, zeta).T, x @ bn.T)
    ref_a = ra * (1 - zeta) * (e * x[:, 0] ** 2 + x[:, 1] ** 2 / e)
    ref_b = rb * (1 - zeta) * np.ones(n)
    return {"applicable": True,
            "min_a": float(det_a.min()), "min_b": float(det_b.min()),
            "identity_error_a": float(np.max(np.abs(det_a - ref_a))),
            "identity_error_b": float(np.max(np.abs(det_b - ref_b))),
            "positive": bool(det_a.min() > 0.0 and det_b.min() > 0.0)}


def levelset_clf(a, b, n_per_arc: int = 400) -> LevelSetCLF:
    """Level-set CLF ``V = r / r_tilde(angle)`` of a contracting pair.

    Works for the three subcases decided by a contraction factor; the
    remaining stable subcases admit a quadratic CLF (see :func:`synthesize`).
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    verdict = classify(a, b)
    if verdict.outcome is not Outcome.GUES:
        raise NotGUES(f"pair classifies {verdict.outcome.value} ({verdict.subcase})")
    if verdict.subcase not in LEVELSET_SUBCASES:
        raise SubcaseUnsupported(f"level-set construction covers {LEVELSET_SUBCASES}, "
                                 f"got {verdict.subcase}")
    zeta = marginal_zeta(a, b)
    at, bt = rescale(a, zeta), rescale(b, zeta)
    checks = det_checks(a, b, zeta, settings.det_directions)
    if checks["applicable"] and not checks["positive"]:
        raise NumericalFailure(f"determinant check failed: {checks}")
    x0 = collinearity(at, bt).directions()[0]
    traj = integrate_worst(at, bt, x0, stop="full-turn")
    if not traj.rotates or not traj.closed:
        raise NumericalFailure(f"shrunk pair has no closed worst trajectory "
                               f"(factor {traj.half_turn_factor})")
    curve = ClosedCurve(traj, n_per_arc)
    return LevelSetCLF(float(zeta), (at, bt), curve, verdict.subcase, checks)


# ---------------------------------------------------------------------------
# constructions from the value function


def _gauge_curve(clf, n: int):
    """(theta, x1, x2) on the unit level set of a homogeneous CLF."""
    theta = TWO_PI * np.arange(n) / n
    r = np.exp(-clf.log_value(unit_circle(n)) / clf.degree)
    return [(float(t), float(ri * math.cos(t)), float(ri * math.sin(t)))
            for t, ri in zip(theta, r)]


def _log_power_sum(proj, power):
    """log sum_k proj_k^power (power even) and the normalized weights, row-wise."""
    m = np.max(np.abs(proj), axis=1, keepdims=True)
    r = proj / m
    s = np.sum(r ** power, axis=1)
    return power * np.log(m[:, 0]) + np.log(s), r, m[:, 0], s


@dataclass
class PolyCLF:
    forms: np.ndarray          # (N, 2)
    power: int                 # 2p
    coefficients: np.ndarray | None = None

    @property
    def p(self) -> int:
        return self.power // 2

    @property
    def degree(self) -> int:
        return self.power

    def log_value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return _log_power_sum(x @ self.forms.T, self.power)[0]

    def value(self, x):
        return np.exp(self.log_value(x))

    def decrease(self, x, d):
        """d/dt log W~ = 2p sum r_k^(2p-1) (w_k . Dx) / (m sum r_k^2p)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, r, m, s = _log_power_sum(x @ self.forms.T, self.power)
        wd = (x @ np.asarray(d).T) @ self.forms.T
        return self.power * np.sum(r ** (self.power - 1) * wd, axis=1) / (m * s)

    def expanded(self) -> HomogeneousPolynomial:
        """Monomial coefficients of the sum; only meaningful for moderate degree."""
        n = self.power
        if n > 64:
            raise InvalidInput(f"monomial expansion of degree {n} is not representable")
        j = np.arange(n + 1)
        binom = np.array([math.comb(n, i) for i in j], dtype=float)
        w1, w2 = self.forms[:, :1], self.forms[:, 1:2]
        coeffs = binom * np.sum(w1 ** (n - j) * w2 ** j, axis=0)
        return HomogeneousPolynomial(coeffs)

    def to_dict(self):
        out = {"type": "poly", "forms": self.forms.tolist(), "power": self.power,
               "degree": self.power}
        if self.coefficients is not None:
            out["coefficients"] = self.coefficients.tolist()
        return out

    def level_curve(self, n: int = 720):
        return _gauge_curve(self, n)


@dataclass
class PolytopeCLF:
    forms: np.ndarray
    tie_tol: float = 1e-9
    degree: int = 1

    def log_value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.log(np.max(np.abs(x @ self.forms.T), axis=1))

    def decrease(self, x, d):
        """Largest one-sided rate of log max_k |w_k . x| over the active forms."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        proj = x @ self.forms.T
        mag = np.abs(proj)
        top = mag.max(axis=1, keepdims=True)
        active = mag >= top * (1.0 - self.tie_tol)
        rate = np.sign(proj) * ((x @ np.asarray(d).T) @ self.forms.T) / top
        return np.max(np.where(active, rate, -np.inf), axis=1)

    def vertices(self):
        """Corners x_k with w_k . x_k = w_(k+1) . x_k = 1 (forms in angular order)."""
        w0 = self.forms
        w1 = np.roll(w0, -1, axis=0)
        det = w0[:, 0] * w1[:, 1] - w0[:, 1] * w1[:, 0]
        return np.stack([(w1[:, 1] - w0[:, 1]) / det, (w0[:, 0] - w1[:, 0]) / det], axis=1)

    def vertex_rates(self, d):
        """w_k . D x at both ends of face k; the rate is affine along the face,
        so these bound it over the whole face."""
        x = self.vertices()
        dx = x @ np.asarray(d).T
        after = np.einsum("ni,ni->n", self.forms, dx)
        before = np.einsum("ni,ni->n", self.forms, np.roll(dx, 1, axis=0))
        return np.concatenate([after, before])

    def to_dict(self):
        return {"type": "polytope", "forms": self.forms.tolist(), "degree": 1}

    def level_curve(self, n: int = 720):
        return _gauge_curve(self, n)


@dataclass
class MonomialCLF:
    """Homogeneous polynomial found by the degree scan."""
    poly: HomogeneousPolynomial

    @property
    def degree(self) -> int:
        return self.poly.degree

    def log_value(self, x):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.log(self.poly(np.atleast_2d(x)))

    def decrease(self, x, d):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.poly.decrease(x, d) / self.poly(x)

    def to_dict(self):
        return {"type": "monomial", "coefficients": self.poly.coeffs.tolist(),
                "degree": self.degree}

    def level_curve(self, n: int = 720):
        return _gauge_curve(self, n)


def level_representatives(clf, n: int, extra=None):
    """``n`` equally spaced directions, plus any ``extra`` points, scaled onto
    the unit level set of ``clf``."""
    x = unit_circle(n)
    if extra is not None:
        e = np.atleast_2d(np.asarray(extra, dtype=float))
        x = np.vstack([x, e / np.linalg.norm(e, axis=1, keepdims=True)])
    scale = np.exp(-clf.log_value(x) / clf.degree)
    return x * scale[:, None]


def decrease_margin(clf, a, b, n: int, extra=None):
    """Worst normalized decrease over ``n`` directions and both fields.

    Rates are taken on the unit level set, where homogeneity keeps their signs
    and fixes their scale; the result is ``max rate / max |rate|`` (negative
    means every direction decreases).
    """
    y = level_representatives(clf, n, extra)
    rates = np.stack([clf.decrease(y, d) for d in (a, b)])
    return float(np.max(rates) / np.max(np.abs(rates)))


GRID_CAP = 16384


def _gues_value(a, b):
    """Value function on the first grid (doubling from ``n_theta``) whose level
    polygon is strictly convex and decreases along both fields."""
    verdict = classify(a, b)
    if verdict.outcome is not Outcome.GUES:
        raise NotGUES(f"pair classifies {verdict.outcome.value} ({verdict.subcase})")
    n = int(settings.n_theta)
    while True:
        v = solve_value(a, b, n_theta=n, check=False)
        if not is_strictly_convex(v):
            raise ConvexityFailure("value function level set is not strictly convex")
        m, _ = decrease_constants(v, a, b, 4 * n)
        if m > 0.0 or 2 * n > GRID_CAP:
            return v
        n *= 2


def balancing_transform(v):
    """S with det 1 that makes the unit level set of the value function
    roughly round: the inverse square root of the second moment of the level
    polygon vertices."""
    r = 1.0 / np.sqrt(v.values)
    y = np.stack([r * np.cos(v.grid), r * np.sin(v.grid)], axis=1)
    w, q = np.linalg.eigh(y.T @ y / len(y))
    s = q @ np.diag(w ** -0.5) @ q.T
    return s / math.sqrt(np.linalg.det(s))


BALANCE_PASSES = 2


def _working_value(a, b, value=None):
    """Value function in coordinates z = S x where its level set is nearly round.

    Equally spaced cover angles are wasteful on a very eccentric level set;
    a sum of powers of linear forms stays one under linear coordinates, so the
    forms are built for (S A S^-1, S B S^-1) and mapped back by w -> S^T w.
    """
    if value is not None:
        return value, np.eye(2)
    s = np.eye(2)
    v = _gues_value(a, b)
    for _ in range(BALANCE_PASSES):
        ratio = float(v.values.max() / v.values.min())
        if ratio < 4.0:
            break
        s = balancing_transform(v) @ s
        v = _gues_value(s @ a @ np.linalg.inv(s), s @ b @ np.linalg.inv(s))
    return v, s


def cover_forms(v, n_points: int):
    """Gradients of sqrt(V) at ``n_points`` equally spaced points of {V = 1}."""
    if n_points < 3:
        raise InvalidInput("need at least 3 cover points")
    theta = TWO_PI * np.arange(n_points) / n_points
    return level_gradient(v, theta), level_point(v, theta)


def _polytope_margin(forms, a, b, n: int) -> float:
    """Worst decrease rate of max_k |w_k . x| at ``n`` circle samples and at
    every corner; positive means some face grows somewhere."""
    clf = PolytopeCLF(forms)
    x = unit_circle(n)
    sampled = max(float(np.max(clf.decrease(x, d))) for d in (a, b))
    corners = max(float(np.max(clf.vertex_rates(d))) for d in (a, b))
    return max(sampled, corners)


def _cover_sizes(n_points: int, limit: int):
    n = n_points
    while True:
        yield n
        if n >= limit:
            return
        n = min(2 * n, limit)


def poly_clf(a, b, n_points: int | None = None, value=None) -> PolyCLF:
    """Sum of even powers of the supporting forms, with power escalation.

    ``p`` runs through 1, 2, 4, ... up to ``p_cap`` and the first ``p`` whose
    decrease margin falls below ``-margin_rel`` on ``check_samples``
    directions is returned. Large powers approach the polytope function of
    the same forms, which itself needs enough cover points to decrease; the
    cover is doubled (up to the value-function grid) until it does.
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    n_points = int(n_points or settings.n_points)
    v, s = _working_value(a, b, value)
    for n in _cover_sizes(n_points, len(v.grid)):
        forms = cover_forms(v, n)[0] @ s
        if _polytope_margin(forms, a, b, settings.check_samples) >= 0.0 and n < len(v.grid):
            continue
        # the corners of the limiting polytope are where high powers turn sharply
        corners = PolytopeCLF(forms).vertices()
        p = 1
        while p <= settings.p_cap:
            clf = PolyCLF(forms, 2 * p)
            margin = decrease_margin(clf, a, b, settings.check_samples, corners)
            if margin < -settings.margin_rel:
                if clf.power <= 16:
                    clf.coefficients = clf.expanded().coeffs
                return clf
            p *= 2
    raise EscalationExceeded(f"no p <= {settings.p_cap} passes the decrease check "
                             f"with up to {len(v.grid)} cover points")


def polytope_clf(a, b, n_points: int | None = None, value=None) -> PolytopeCLF:
    """``max_k |w_k . x|`` with Clarke-sense decrease checked at the samples.

    The cover is doubled from ``n_points`` until the check passes.
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    n_points = int(n_points or settings.n_points)
    v, s = _working_value(a, b, value)
    worst = math.inf
    for n in _cover_sizes(n_points, len(v.grid)):
        forms = cover_forms(v, n)[0] @ s
        worst = _polytope_margin(forms, a, b, settings.check_samples)
        if worst < 0.0:
            return PolytopeCLF(forms)
    raise EscalationExceeded(f"polytope fails the decrease check with up to "
                             f"{len(v.grid)} faces (worst rate {worst:.3e})")


def quadratic_clf(a, b) -> MonomialCLF:
    scan = min_degree(a, b, 2)
    if scan.d_min != 2:
        raise NumericalFailure("degree-2 search did not return a verified quadratic")
    return MonomialCLF(scan.outcomes[-1].polynomial)


def synthesize(a, b, method: str = "levelset", n_points: int | None = None):
    """Dispatch by method; the level-set method falls back to a quadratic CLF
    in subcases where one is known to exist."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    if method == "levelset":
        verdict = classify(a, b)
        if verdict.outcome is Outcome.GUES and verdict.subcase in QUADRATIC_SUBCASES:
            return quadratic_clf(a, b)
        return levelset_clf(a, b)
    if method == "poly":
        return poly_clf(a, b, n_points)
    if method == "polytope":
        return polytope_clf(a, b, n_points)
    raise InvalidInput(f"unknown method {method!r}")


def from_dict(data):
    """Rebuild a CLF exported by ``to_dict``."""
    kind = data.get("type")
    if kind == "poly":
        return PolyCLF(np.asarray(data["forms"], dtype=float), int(data["power"]))
    if kind == "polytope":
        return PolytopeCLF(np.asarray(data["forms"], dtype=float))
    if kind == "monomial":
        return MonomialCLF(HomogeneousPolynomial(data["coefficients"]))
    if kind == "levelset":
        at = as_mat2(data["pair_tilde"]["a"])
        bt = as_mat2(data["pair_tilde"]["b"])
        x0 = collinearity(at, bt).directions()[0]
        traj = integrate_worst(at, bt, x0, stop="full-turn")
        return LevelSetCLF(float(data["zeta"]), (at, bt), ClosedCurve(traj),
                           data.get("subcase", ""))
    raise InvalidInput(f"unknown CLF type {kind!r}")


def verify_clf(clf, a, b, n: int | None = None) -> dict:
    """Re-check positivity and decrease of an exported CLF against a pair."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    n = int(n or settings.fine_samples)
    x = unit_circle(n)
    logv = clf.log_value(x)
    positive = bool(np.all(np.isfinite(logv)))
    rates = np.stack([clf.decrease(level_representatives(clf, n), d) for d in (a, b)]) \
        if positive else np.array([[np.inf]])
    worst = float(np.max(rates))
    return {"positive": positive, "worst_rate": worst,
            "ok": positive and worst < 0.0, "samples": n}
