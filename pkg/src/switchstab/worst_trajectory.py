"""Worst trajectory of a planar switched pair, built from exact arcs.

At every point the trajectory follows the field that pushes it outward the
most per unit of angle swept in the direction of rotation, i.e. it maximizes
``(x . Dx) / (s * x cross Dx)`` among the fields ``D`` that turn with
orientation ``s``. Where both fields turn the same way this is the field whose
velocity forms the smallest angle with the outgoing radial direction. The
choice can only change where ``Q(x) = det(Ax, Bx)`` vanishes, so each sector
between consecutive collinearity half-lines uses a single matrix exponential
and switches are located by root finding on the polar angle.

Nothing here uses the closed-form contraction factors: this module is the
independent oracle against which they are checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .config import settings
from .core2d import as_mat2, eig2, expm2
from .errors import DegenerateQ, NoRotation, InvalidInput

TWO_PI = 2.0 * math.pi
_CHUNK = 512
_STALL_RADIUS = 1e-12
_MAX_STEPS = 4_000_000


@dataclass(frozen=True)
class CollinearityForm:
    """Q(x) = q0 x1^2 + q1 x1 x2 + q2 x2^2 and its real zero lines."""
    q: tuple[float, float, float]
    angles: tuple[float, ...]

    @property
    def discriminant(self) -> float:
        q0, q1, q2 = self.q
        return q1 * q1 - 4.0 * q0 * q2

    @property
    def slopes(self) -> tuple[float, ...]:
        return tuple(math.tan(a) if abs(math.cos(a)) > 1e-15 else math.inf
                     for a in self.angles)

    def value(self, x) -> float:
        q0, q1, q2 = self.q
        x = np.asarray(x, dtype=float)
        return q0 * x[..., 0] ** 2 + q1 * x[..., 0] * x[..., 1] + q2 * x[..., 1] ** 2

    def directions(self):
        return [np.array([math.cos(a), math.sin(a)]) for a in self.angles]


def q_coefficients(a, b):
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    q0 = a[0, 0] * b[1, 0] - a[1, 0] * b[0, 0]
    q1 = a[0, 0] * b[1, 1] + a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1] - a[1, 1] * b[0, 0]
    q2 = a[0, 1] * b[1, 1] - a[1, 1] * b[0, 1]
    return float(q0), float(q1), float(q2)


def collinearity(a, b) -> CollinearityForm:
    """Zero lines of Q, written as Q(cos t, sin t) = m + R cos(2t - phi)."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    q0, q1, q2 = q_coefficients(a, b)
    scale = max(float(np.max(np.abs(a))) * float(np.max(np.abs(b))), 1e-300)
    if max(abs(q0), abs(q1), abs(q2)) <= 1e-14 * scale:
        raise DegenerateQ("det(Ax, Bx) vanishes identically: the fields are proportional")
    mean = 0.5 * (q0 + q2)
    amp = 0.5 * math.hypot(q0 - q2, q1)
    phi = math.atan2(q1, q0 - q2)
    angles: list[float] = []
    if amp > 0.0 and abs(mean) <= amp:
        w = math.acos(max(-1.0, min(1.0, -mean / amp)))
        for two_t in (phi + w, phi - w):
            angles.append((0.5 * two_t) % math.pi)
        if abs(angles[0] - angles[1]) < 1e-15:
            angles = angles[:1]
    return CollinearityForm((q0, q1, q2), tuple(sorted(angles)))


@dataclass(frozen=True)
class Arc:
    field: str
    duration: float
    start: np.ndarray


@dataclass
class WorstTrajectory:
    a: np.ndarray
    b: np.ndarray
    x0: np.ndarray
    arcs: list[Arc]
    orientation: int
    rotates: bool
    angle_swept: float
    end: np.ndarray
    half_turn_factor: float | None = None
    period: float | None = None
    closed: bool = False
    reason: str | None = None
    extra: dict = field(default_factory=dict)

    def matrix(self, name):
        return self.a if name == "A" else self.b

    @property
    def switch_times(self) -> list[float]:
        """Cumulative times at which the active field changes."""
        return list(np.cumsum([arc.duration for arc in self.arcs])[:-1])

    @property
    def total_time(self) -> float:
        return float(sum(arc.duration for arc in self.arcs))

    def sample(self, n_per_arc: int = 50):
        """(t, x1, x2, field) rows along the arcs, arc endpoints included."""
        rows = []
        t0 = 0.0
        for arc in self.arcs:
            ts = np.linspace(0.0, arc.duration, n_per_arc + 1)
            xs = expm2(self.matrix(arc.field), ts) @ arc.start
            for t, x in zip(ts, xs):
                rows.append((t0 + t, float(x[0]), float(x[1]), arc.field))
            t0 += arc.duration
        return rows

    def as_signal_arcs(self):
        return [(1.0 if arc.field == "A" else 0.0, arc.duration) for arc in self.arcs]


def _cross(x, y):
    return x[0] * y[1] - x[1] * y[0]


def _unit(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def _pick(fields, x, s):
    """Index of the worst field at direction ``x`` for orientation ``s``.

    Returns None when no field turns with orientation ``s`` at ``x``.
    """
    best, best_g = None, -math.inf
    for i, d in enumerate(fields):
        v = d @ x
        c = s * _cross(x, v)
        if c > 0.0:
            g = float(x @ v) / c
            if g > best_g:
                best, best_g = i, g
    return best


def _pick_unsigned(fields, x):
    cosines = []
    for d in fields:
        v = d @ x
        nv = np.linalg.norm(v)
        cosines.append(float(x @ v) / (np.linalg.norm(x) * nv) if nv > 0 else -math.inf)
    return int(np.argmax(cosines))


def _boundaries(a, b, form: CollinearityForm | None):
    """Directions (mod 2 pi) where the worst-field choice may change."""
    base = list(form.angles) if form is not None else []
    for m in (a, b):
        sm = eig2(m)
        if sm.is_real and sm.is_diagonalizable:
            for v in sm.eigenvectors:
                base.append(math.atan2(v[1].real, v[0].real) % math.pi)
    out = sorted({round(t % TWO_PI, 15) for t0 in base for t in (t0, t0 + math.pi)})
    return out


def orientation(a, b, form: CollinearityForm | None, x0):
    """Rotation sign of the worst trajectory; None if the fields are opposed
    on a collinearity line (some convex combination is then singular)."""
    if form is not None and form.angles:
        signs = []
        for d in form.directions():
            ad, bd = a @ d, b @ d
            if float(ad @ bd) <= 0.0:
                return None
            signs.append(1 if _cross(d, ad) > 0.0 else -1)
        return signs[0]
    fields = (a, b)
    for i, m in enumerate(fields):
        if not eig2(m).is_real:
            return 1 if _cross(x0, m @ x0) > 0.0 else -1
    i = _pick_unsigned(fields, x0)
    return 1 if _cross(x0, fields[i] @ x0) > 0.0 else -1


class _Mover:
    """Follow one matrix from a start point until the polar angle reaches a target."""

    def __init__(self, d, x, theta, s, r_ref):
        self.d = d
        self.x = x
        self.theta = theta
        self.s = s
        self.r_ref = r_ref
        self.dt = settings.angle_step / max(np.linalg.norm(d, 2), 1e-300)

    def _state(self, t):
        return expm2(self.d, t) @ self.x

    def run(self, target, t_max=math.inf):
        """Return (t_hit, x_hit, theta_hit, status) with status in
        {"hit", "timeout", "stall"}."""
        s = self.s
        t_prev, ang_prev = 0.0, self.theta
        steps = 0
        while True:
            ts = t_prev + self.dt * np.arange(1, _CHUNK + 1)
            xs = expm2(self.d, ts) @ self.x
            raw = np.arctan2(xs[:, 1], xs[:, 0])
            start = math.atan2(math.sin(ang_prev), math.cos(ang_prev))
            incr = np.diff(np.concatenate([[start], raw]))
            incr = (incr + math.pi) % TWO_PI - math.pi
            angs = ang_prev + np.cumsum(incr)
            crossed = np.nonzero(s * (angs - target) >= 0.0)[0]
            limit = np.nonzero(ts >= t_max)[0]
            i_hit = int(crossed[0]) if crossed.size else None
            i_lim = int(limit[0]) if limit.size else None
            if i_hit is not None and (i_lim is None or i_hit <= i_lim):
                lo = t_prev if i_hit == 0 else float(ts[i_hit - 1])
                hi = float(ts[i_hit])
                t_hit = self._root(target, lo, hi)
                if t_hit <= t_max:
                    return t_hit, self._state(t_hit), target, "hit"
            if i_lim is not None:
                x_end = self._state(t_max)
                i0 = max(i_lim - 1, 0)
                ang_end = float(angs[i0]) + (
                    (math.atan2(x_end[1], x_end[0]) - float(raw[i0]) + math.pi) % TWO_PI
                    - math.pi)
                return t_max, x_end, ang_end, "timeout"
            radius = np.hypot(xs[:, 0], xs[:, 1])
            steps += _CHUNK
            if radius[-1] < _STALL_RADIUS * self.r_ref or steps > _MAX_STEPS:
                return float(ts[-1]), xs[-1], float(angs[-1]), "stall"
            t_prev, ang_prev = float(ts[-1]), float(angs[-1])

    def _root(self, target, lo, hi):
        d = _unit(target)
        s = self.s

        def g(t):
            return s * _cross(d, self._state(t))

        glo, ghi = g(lo), g(hi)
        if glo >= 0.0:
            return lo
        if ghi <= 0.0:
            return hi
        return brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def integrate_worst(a, b, x0=None, stop: str = "half-turn", t_end: float | None = None,
                    ) -> WorstTrajectory:
    """Integrate the worst trajectory from ``x0``.

    ``stop`` is "half-turn" (polar angle advances by pi), "full-turn" (2 pi) or
    "time" (until ``t_end``). The default start point is the first
    collinearity direction, or (1, 0) if there is none.
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    if stop not in ("half-turn", "full-turn", "time"):
        raise InvalidInput(f"unknown stop rule {stop!r}")
    if stop == "time" and (t_end is None or not t_end >= 0.0):
        raise InvalidInput("stop='time' needs t_end >= 0")
    try:
        form = collinearity(a, b)
    except DegenerateQ:
        form = None
    if x0 is None:
        x0 = form.directions()[0] if form is not None and form.angles else np.array([1.0, 0.0])
    x0 = np.asarray(x0, dtype=float).reshape(2)
    r0 = float(np.linalg.norm(x0))
    if not r0 > 0.0:
        raise InvalidInput("x0 must be non-zero")
    theta0 = math.atan2(x0[1], x0[0])
    fields = (a, b)

    if form is None:
        # proportional fields: the trajectory is a single linear flow
        single = _pick_unsigned(fields, x0)
        s = 1 if _cross(x0, fields[single] @ x0) > 0.0 else -1
        bounds = []
    else:
        single = None
        s = orientation(a, b, form, x0)
        if s is None:
            return WorstTrajectory(a, b, x0, [], 0, False, 0.0, x0.copy(),
                                   reason="opposed-fields", extra={"form": form})
        bounds = _boundaries(a, b, form)

    names = ("A", "B")
    sweep = {"half-turn": math.pi, "full-turn": TWO_PI, "time": math.inf}[stop]
    theta_stop = theta0 + s * sweep
    t_left = t_end if stop == "time" else math.inf

    arcs: list[list] = []
    x, theta = x0.copy(), theta0
    status = "hit"
    while True:
        if s * (theta - theta_stop) >= -1e-15 or t_left <= 0.0:
            break
        if bounds:
            nxt, mid = _next_boundary(bounds, theta, s)
        else:
            nxt, mid = math.inf * s, theta + s * 1e-3
        i = single if single is not None else _pick(fields, _unit(mid), s)
        if i is None:
            status = "stall"
            break
        # a boundary within rounding of the stop angle is the stop angle itself
        target = nxt if s * (nxt - theta_stop) < -1e-12 else theta_stop
        mover = _Mover(fields[i], x, theta, s, r0)
        t_hit, x_new, theta_new, status = mover.run(target, t_left)
        if arcs and arcs[-1][0] == names[i]:
            arcs[-1][1] += t_hit
        else:
            arcs.append([names[i], t_hit, x.copy()])
        x, theta = x_new, theta_new
        t_left -= t_hit
        if status != "hit":
            break
    arc_list = [Arc(n, float(t), st) for n, t, st in arcs]
    rotates = status != "stall"
    swept = abs(theta - theta0)
    traj = WorstTrajectory(a, b, x0, arc_list, s, rotates, swept, x,
                           reason=None if rotates else "stall",
                           extra={"form": form})
    if rotates and stop != "time":
        ratio = float(np.linalg.norm(x)) / r0
        traj.half_turn_factor = ratio if stop == "half-turn" else math.sqrt(ratio)
        traj.closed = abs(traj.half_turn_factor - 1.0) <= 1e-6
        if traj.closed:
            traj.period = traj.total_time * (2.0 if stop == "half-turn" else 1.0)
    return traj


def _next_boundary(bounds, theta, s):
    """Next boundary angle strictly beyond ``theta`` in direction ``s`` and the
    midpoint of the sector containing the motion just after ``theta``."""
    arr = np.asarray(bounds)
    fwd = (s * (arr - theta)) % TWO_PI
    fwd = np.where(fwd < 1e-12, fwd + TWO_PI, fwd)
    back = (s * (theta - arr)) % TWO_PI
    back = np.where(back > TWO_PI - 1e-12, 0.0, back)
    step_f = float(fwd.min())
    step_b = float(back.min())
    nxt = theta + s * step_f
    mid = theta + s * 0.5 * (step_f - step_b)
    return nxt, mid


def contraction(traj: WorstTrajectory) -> float:
    """Radius ratio after one half turn."""
    if not traj.rotates or traj.half_turn_factor is None:
        raise NoRotation(f"worst trajectory does not turn around the origin ({traj.reason})")
    return traj.half_turn_factor


def half_turn_factor(a, b) -> float:
    return contraction(integrate_worst(a, b, stop="half-turn"))


def oracle_factor(a, b) -> float:
    """Signed evidence of stability from the worst trajectory alone.

    Returns the half-turn factor when the trajectory rotates, 0.0 when it
    decays without turning and ``inf`` when the two fields point in opposite
    directions on a collinearity line.
    """
    traj = integrate_worst(a, b, stop="half-turn")
    if traj.reason == "opposed-fields":
        return math.inf
    if not traj.rotates:
        return 0.0
    return traj.half_turn_factor
