"""Value function of the worst switching signal, reduced to the unit circle.

V(x) = sup over signals of the integral of |x(t)|^2 is homogeneous of degree
2, so V(r e(theta)) = r^2 v(theta). The function ``v`` is the fixed point of a
dynamic-programming update: run one extreme field for a while, collect the
exact running cost, and continue from the direction reached. ``W = sqrt(V)``
is then a convex, degree-1 homogeneous CLF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_continuous_lyapunov
from scipy.sparse.linalg import spsolve

from .classifier import Outcome, classify
from .config import settings
from .core2d import as_mat2, expm2
from .errors import DegenerateQ, InvalidInput, NoConvergence, NotGUES
from .worst_trajectory import collinearity, orientation

TWO_PI = 2.0 * math.pi


@dataclass
class AngularFunction:
    """Positive periodic function on [0, 2 pi) sampled on a uniform grid."""
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        closed_x = np.append(self.grid, self.grid[0] + TWO_PI)
        closed_y = np.append(self.values, self.values[0])
        self._spline = CubicSpline(closed_x, closed_y, bc_type="periodic")

    @classmethod
    def from_function(cls, f, n: int):
        grid = TWO_PI * np.arange(n) / n
        return cls(grid, np.array([f(t) for t in grid]))

    def _wrap(self, theta):
        return self.grid[0] + np.mod(np.asarray(theta, dtype=float) - self.grid[0], TWO_PI)

    def __call__(self, theta, nu: int = 0):
        return self._spline(self._wrap(theta), nu)

    def derivative(self, theta, nu: int = 1):
        return self._spline(self._wrap(theta), nu)

    def r_level(self, theta):
        """Radius of the level set {V = 1} in direction theta."""
        return 1.0 / np.sqrt(self(theta))

    def rows(self):
        return [(float(t), float(v), float(1.0 / math.sqrt(v)))
                for t, v in zip(self.grid, self.values)]


def lyapunov_form(d):
    """P with D^T P + P D = -I, so x^T P x = integral of |exp(D t) x|^2 over [0, inf)."""
    p = solve_continuous_lyapunov(as_mat2(d).T, -np.eye(2))
    return 0.5 * (p + p.T)


def hop_times(d, x, target):
    """First t > 0 with exp(D t) x parallel to ``target`` (same ray), per row.

    Writes exp(D t) = exp(tau t) (C(t) I + S(t) N) with N traceless, so the
    condition cross(target, exp(D t) x) = 0 reads C(t) p + S(t) q = 0 with
    p = cross(target, x), q = cross(target, N x). Returns inf where the ray
    is never reached.
    """
    d = as_mat2(d)
    tau = 0.5 * np.trace(d)
    n = d - tau * np.eye(2)
    delta2 = -np.linalg.det(n)
    nx = x @ n.T
    p = target[:, 0] * x[:, 1] - target[:, 1] * x[:, 0]
    q = target[:, 0] * nx[:, 1] - target[:, 1] * nx[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        if delta2 < 0.0:
            w = math.sqrt(-delta2)
            alpha = np.mod(np.arctan2(-p * w, q), math.pi)
            alpha = np.where(alpha <= 0.0, math.pi, alpha)
            t = alpha / w
        elif delta2 > 0.0:
            dl = math.sqrt(delta2)
            r = -dl * p / q
            ok = (r > 0.0) & (r < 1.0)
            t = np.where(ok, np.arctanh(np.where(ok, r, 0.0)) / dl, np.inf)
        else:
            t = -p / q
            t = np.where(t > 0.0, t, np.inf)
    return t


@dataclass
class _Operator:
    cost: np.ndarray          # (2, n)
    transfer: list            # two sparse (n, n) matrices


def _build_operator(a, b, n):
    """One move per grid direction and field: follow the field until the
    adjacent grid ray in its direction of rotation is reached (exact cost and
    gain, no interpolation), or forever if that ray is never reached."""
    grid = TWO_PI * np.arange(n) / n
    dirs = np.stack([np.cos(grid), np.sin(grid)], axis=1)
    costs, transfers = [], []
    for d in (a, b):
        p_inf = lyapunov_form(d)
        vel = dirs @ d.T
        turn = np.sign(dirs[:, 0] * vel[:, 1] - dirs[:, 1] * vel[:, 0]).astype(int)
        nxt = np.mod(np.arange(n) + turn, n)
        t = np.where(turn != 0, hop_times(d, dirs, dirs[nxt]), np.inf)
        finite = np.isfinite(t)
        z = np.zeros_like(dirs)
        if finite.any():
            z[finite] = np.einsum("nij,nj->ni", expm2(d, t[finite]), dirs[finite])
        full = np.einsum("ni,ij,nj->n", dirs, p_inf, dirs)
        tail = np.einsum("ni,ij,nj->n", z, p_inf, z)
        costs.append(full - tail)
        gain = np.einsum("ni,ni->n", z, z)
        mat = sparse.csr_matrix((gain[finite], (np.nonzero(finite)[0], nxt[finite])),
                                shape=(n, n))
        transfers.append(mat)
    return _Operator(np.array(costs), transfers)


def _bellman(op: _Operator, v):
    cand = np.stack([op.cost[k] + op.transfer[k] @ v for k in (0, 1)])
    return cand.max(axis=0), cand.argmax(axis=0)


def _initial_policy(a, b, n):
    """Worst-trajectory field choice per grid direction.

    Starting policy iteration from the greedy running cost leaves long chains
    of directions near a real eigenvector trapped under the wrong field; the
    worst-trajectory rule is already close to optimal.
    """
    grid = TWO_PI * np.arange(n) / n
    dirs = np.stack([np.cos(grid), np.sin(grid)], axis=1)
    try:
        form = collinearity(a, b)
    except DegenerateQ:
        return np.zeros(n, dtype=int)
    s = orientation(a, b, form, dirs[0])
    vel = np.stack([dirs @ a.T, dirs @ b.T])
    radial = np.einsum("kni,ni->kn", vel, dirs)
    turn = (dirs[None, :, 0] * vel[:, :, 1] - dirs[None, :, 1] * vel[:, :, 0])
    if s is None:
        return np.argmax(radial / np.linalg.norm(vel, axis=2), axis=0)
    turn = s * turn
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(turn > 0.0, radial / turn, -np.inf)
    policy = np.argmax(score, axis=0)
    stuck = ~np.isfinite(score.max(axis=0))
    policy[stuck] = np.argmax(radial, axis=0)[stuck]
    return policy


def _check_gues(a, b):
    verdict = classify(a, b)
    if verdict.outcome is not Outcome.GUES:
        raise NotGUES(f"value function needs a GUES pair, got {verdict.outcome.value} "
                      f"({verdict.subcase})")


def value_iterates(a, b, n_iter: int, n_theta: int | None = None):
    """Plain value iteration from v = 0, returning every iterate (for tests)."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    n_theta = int(n_theta or settings.n_theta)
    op = _build_operator(a, b, n_theta)
    v = np.zeros(n_theta)
    out = [v]
    for _ in range(n_iter):
        v, _ = _bellman(op, v)
        out.append(v)
    return out


def _policy_iteration(op: _Operator, policy, max_iters: int):
    n = len(policy)
    eye = sparse.identity(n, format="csr")
    for it in range(max_iters):
        rows = policy[:, None] == np.array([0, 1])[None, :]
        cost = np.where(policy == 0, op.cost[0], op.cost[1])
        trans = (sparse.diags(rows[:, 0].astype(float)) @ op.transfer[0]
                 + sparse.diags(rows[:, 1].astype(float)) @ op.transfer[1])
        v = spsolve((eye - trans).tocsc(), cost)
        if not np.all(np.isfinite(v)):
            raise NoConvergence("policy evaluation is singular (pair too close to marginal)")
        tv, new_policy = _bellman(op, v)
        # keep the current action on ties to guarantee termination
        cur = np.where(policy == 0, op.cost[0] + op.transfer[0] @ v,
                       op.cost[1] + op.transfer[1] @ v)
        improve = tv > cur + 1e-14 * np.abs(cur)
        if not improve.any():
            return v, policy, it + 1
        policy = np.where(improve, new_policy, policy)
    raise NoConvergence("policy iteration did not settle")


COARSE_GRID = 64


def solve_value(a, b, n_theta: int | None = None, check: bool = True) -> AngularFunction:
    """Fixed point of the one-move update, found by policy iteration.

    Each move follows one field until the neighbouring grid ray is reached, so
    the tabulated values are exact worst-case costs of genuine switching
    signals that switch on grid rays. All weights are positive, hence policy
    iteration improves monotonically and terminates.

    Improvements spread only a few grid steps per iteration (chattering
    regions of fields that turn in opposite directions grow slowly), so the
    problem is solved on a coarse grid first and the policy is carried over
    to successively doubled grids. A grid size that is not a power-of-two
    multiple of the coarse grid starts from the worst-trajectory rule.
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    if check:
        _check_gues(a, b)
    n_theta = int(n_theta or settings.n_theta)
    if n_theta < 8:
        raise InvalidInput("need n_theta >= 8")
    levels = [n_theta]
    while levels[-1] % 2 == 0 and levels[-1] // 2 >= COARSE_GRID:
        levels.append(levels[-1] // 2)
    levels.reverse()

    policy = _initial_policy(a, b, levels[0])
    for i, n in enumerate(levels):
        if i > 0:
            policy = np.repeat(policy, 2)
        op = _build_operator(a, b, n)
        v, policy, _ = _policy_iteration(op, policy, settings.max_iters)
    tv, _ = _bellman(op, v)
    residual = float(np.max(np.abs(tv - v)))
    if residual > settings.fixed_point_tol * max(1.0, float(np.max(np.abs(v)))):
        raise NoConvergence(f"fixed-point residual {residual:.3e} above tolerance")
    if np.min(v) <= 0.0:
        raise NoConvergence("value function is not positive")
    grid = TWO_PI * np.arange(n_theta) / n_theta
    return AngularFunction(grid, v)


def _level_vertices(v: AngularFunction):
    r = 1.0 / np.sqrt(v.values)
    return np.stack([r * np.cos(v.grid), r * np.sin(v.grid)], axis=1)


def _edge_normals(v: AngularFunction):
    """n_i with n_i . y_i = n_i . y_(i+1) = 1 for consecutive level vertices."""
    y0 = _level_vertices(v)
    y1 = np.roll(y0, -1, axis=0)
    det = y0[:, 0] * y1[:, 1] - y0[:, 1] * y1[:, 0]
    return np.stack([(y1[:, 1] - y0[:, 1]) / det, (y0[:, 0] - y1[:, 0]) / det], axis=1)


def _edge_index(v: AngularFunction, theta):
    t = v._wrap(theta)
    idx = np.searchsorted(v.grid, t, side="right") - 1
    return np.clip(idx, 0, len(v.grid) - 1)


def level_gradient(v: AngularFunction, theta):
    """Gradient of the gauge of the level polygon at direction(s) theta.

    The level set {V = 1} is replaced by the polygon through its grid points,
    whose gauge is a degree-1 homogeneous convex function equal to sqrt(V) at
    the grid directions. On the edge containing theta the gradient is the edge
    normal; near a corner of the value function this normal is a convex
    combination of the one-sided gradients, which a spline derivative is not.
    """
    return _edge_normals(v)[_edge_index(v, theta)]


def smooth_gradient(v: AngularFunction, theta):
    """Gradient of W(x) = |x| sqrt(v(angle x)) from the periodic spline of v.

    Accurate where v is smooth (for instance a single field, where V is
    quadratic); near corners of v use :func:`level_gradient` instead.
    """
    theta = np.asarray(theta, dtype=float)
    val = v(theta)
    dv = v.derivative(theta)
    root = np.sqrt(val)
    e_r = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    e_t = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    return root[..., None] * e_r + (0.5 * dv / root)[..., None] * e_t


def level_point(v: AngularFunction, theta):
    """Point of the level polygon in direction(s) theta."""
    theta = np.asarray(theta, dtype=float)
    n = level_gradient(v, theta)
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    r = 1.0 / np.einsum("...i,...i->...", n, e)
    return e * r[..., None]


def turning_ratio(v: AngularFunction):
    """Discrete curvature of the level polygon through the grid level points.

    For each vertex, the sine of the turning angle between the incoming and
    outgoing edges divided by the angular grid step. Strictly positive at every
    vertex exactly when the polygon is strictly convex. The value function may
    have corners, so a spline second derivative would be misleading here.
    """
    y = _level_vertices(v)
    e_in = y - np.roll(y, 1, axis=0)
    e_out = np.roll(y, -1, axis=0) - y
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    norms = np.linalg.norm(e_in, axis=1) * np.linalg.norm(e_out, axis=1)
    return cross / norms / (TWO_PI / len(v.grid))


def is_strictly_convex(v: AngularFunction) -> bool:
    return bool(np.min(turning_ratio(v)) > settings.curvature_tol)


def decrease_rates(v: AngularFunction, a, b, n: int = 720):
    """grad W(y) . D y at level-set points y for D in (A, B); shape (2, n)."""
    theta = TWO_PI * np.arange(n) / n
    y = level_point(v, theta)
    g = level_gradient(v, theta)
    return np.stack([np.einsum("ni,ni->n", g, y @ as_mat2(d).T) for d in (a, b)])


def decrease_constants(v: AngularFunction, a, b, n: int = 720):
    """Grid estimates of the uniform decrease M = min(-grad W . D y) and the
    bound K = max |grad W . D x| over the level set (both grid-biased)."""
    rates = decrease_rates(v, a, b, n)
    return float(np.min(-rates)), float(np.max(np.abs(rates)))
