"""Independent reference computations used to freeze expected values.

None of these call into the package's own integrators: the matrix
exponential is a truncated Taylor series, and the worst trajectory is
integrated with a general-purpose adaptive Runge-Kutta scheme with events.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp


def taylor_expm(m, t, terms=30):
    """exp(m t) by scaling and squaring of a 30-term Taylor series."""
    x = np.asarray(m, dtype=float) * t
    norm = np.max(np.sum(np.abs(x), axis=1))
    k = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    x = x / 2.0 ** k
    out = np.eye(2)
    term = np.eye(2)
    for j in range(1, terms):
        term = term @ x / j
        out = out + term
    for _ in range(k):
        out = out @ out
    return out


def _cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _worst_index(a, b, x, s):
    """Field turning in direction s with the largest outward radial cosine."""
    best, best_cos = None, -np.inf
    for i, d in enumerate((a, b)):
        dx = d @ x
        if s * _cross(x, dx) <= 0.0:
            continue
        c = np.dot(x, dx) / (np.linalg.norm(x) * np.linalg.norm(dx))
        if c > best_cos:
            best, best_cos = i, c
    return best


def rk_half_turn(a, b, x0, s=1, rtol=1e-12, atol=1e-14):
    """Radius ratio of the worst trajectory after a half turn."""
    return rk_worst(a, b, x0, s, rtol, atol)[0]


def rk_worst(a, b, x0, s=1, rtol=1e-12, atol=1e-14):
    """(radius ratio after a half turn, cumulative switching times, total time).

    Integrates the selected linear field with an adaptive RK method until
    either the collinearity form changes sign (switch) or the state reaches
    the ray opposite to ``x0``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x0, dtype=float)
    start = x.copy()

    def q(t, y):
        return _cross(a @ y, b @ y)

    def opposite(t, y):
        # crosses the line through x0 on the far side
        return _cross(start, y) if np.dot(start, y) < 0.0 else s * 1.0

    opposite.terminal = True
    opposite.direction = -s
    q.terminal = True

    x = x + 1e-13 * np.linalg.norm(x) * np.array([-x[1], x[0]]) * s
    swept, clock, switches = 0.0, 0.0, []
    for _ in range(64):
        probe = x + 1e-9 * np.linalg.norm(x) * np.array([-x[1], x[0]]) * s
        i = _worst_index(a, b, probe, s)
        if i is None:
            raise RuntimeError("worst field does not rotate")
        d = (a, b)[i]
        sol = solve_ivp(lambda t, y: d @ y, (0.0, 100.0), x, method="DOP853",
                        events=(q, opposite), rtol=rtol, atol=atol * np.linalg.norm(x))
        x_new = sol.y[:, -1]
        swept += abs(math.atan2(_cross(x, x_new), np.dot(x, x_new)))
        x = x_new
        clock += sol.t[-1]
        # the opposite ray is itself a collinearity line when x0 lies on one
        if sol.t_events[1].size or abs(swept - math.pi) < 1e-9:
            return np.linalg.norm(x) / np.linalg.norm(start), switches, clock
        if not sol.t_events[0].size:
            raise RuntimeError("no event reached")
        switches.append(clock)
        # step just past the collinearity line before re-selecting
        x = x + 1e-13 * np.linalg.norm(x) * np.array([-x[1], x[0]]) * s
    raise RuntimeError("too many switches")
