"""Exact simulation of x' = (u A + (1 - u) B) x under piecewise-constant u.

Each constant piece is propagated with the closed-form 2x2 exponential, so a
trajectory is exact up to rounding. Random signals, the decay statistics and
the convexification checks are built on top of :func:`simulate`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import classify
from .config import settings
from .core2d import as_mat2, expm2
from .errors import InvalidInput, SignalGap
from .io import csv_text
from .worst_trajectory import integrate_worst


def flow(d, t, x):
    """exp(D t) x."""
    return expm2(as_mat2(d), float(t)) @ np.asarray(x, dtype=float)


@dataclass
class SwitchSignal:
    """u(t) = values[i] on [breakpoints[i], breakpoints[i+1])."""
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float).ravel()
        self.values = np.asarray(self.values, dtype=float).ravel()
        if len(self.breakpoints) != len(self.values) + 1:
            raise InvalidInput("need one more breakpoint than values")
        if not np.all(np.isfinite(self.breakpoints)) or np.any(np.diff(self.breakpoints) <= 0.0):
            raise InvalidInput("breakpoints must be finite and strictly increasing")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise InvalidInput("signal values must lie in [0, 1]")

    @classmethod
    def constant(cls, u: float, t_end: float):
        return cls([0.0, t_end], [u])

    @classmethod
    def from_arcs(cls, arcs, t0: float = 0.0):
        """Signal from (u, duration) pairs; zero-length pieces are dropped."""
        arcs = [(u, d) for u, d in arcs if d > 0.0]
        times = t0 + np.concatenate([[0.0], np.cumsum([d for _, d in arcs])])
        return cls(times, [u for u, _ in arcs])

    @property
    def t_end(self) -> float:
        return float(self.breakpoints[-1])

    def value_at(self, t: float) -> float:
        i = int(np.searchsorted(self.breakpoints, t, side="right") - 1)
        return float(self.values[min(max(i, 0), len(self.values) - 1)])

    def to_csv(self) -> str:
        return csv_text(["t_start", "t_end", "u"],
                        zip(self.breakpoints[:-1], self.breakpoints[1:], self.values))

    @classmethod
    def from_csv(cls, text: str):
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise InvalidInput("empty signal file")
        try:
            starts = [float(r["t_start"]) for r in rows]
            ends = [float(r["t_end"]) for r in rows]
            values = [float(r["u"]) for r in rows]
        except (KeyError, ValueError) as exc:
            raise InvalidInput(f"bad signal file: {exc}") from exc
        if not np.allclose(starts[1:], ends[:-1], rtol=0.0, atol=1e-12):
            raise SignalGap("signal pieces are not contiguous")
        return cls(starts + [ends[-1]], values)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    signal: SwitchSignal
    a: np.ndarray = field(repr=False, default=None)
    b: np.ndarray = field(repr=False, default=None)

    def radii(self):
        return np.linalg.norm(self.states, axis=1)

    def residual(self) -> float:
        """Largest relative mismatch when each step is re-propagated on its own."""
        worst = 0.0
        for i in range(len(self.times) - 1):
            t0, t1 = self.times[i], self.times[i + 1]
            u = self.signal.value_at(0.5 * (t0 + t1))
            m = u * self.a + (1.0 - u) * self.b
            x1 = expm2(m, t1 - t0) @ self.states[i]
            scale = max(np.linalg.norm(self.states[i + 1]), 1e-300)
            worst = max(worst, float(np.linalg.norm(x1 - self.states[i + 1]) / scale))
        return worst

    def to_csv(self) -> str:
        """Rows t, x1, x2, u where u is the value on the piece that led to the state."""
        bp, vals = self.signal.breakpoints, self.signal.values
        idx = np.clip(np.searchsorted(bp, self.times, side="left") - 1, 0, len(vals) - 1)
        return csv_text(["t", "x1", "x2", "u"],
                        [(t, x[0], x[1], vals[i])
                         for t, x, i in zip(self.times, self.states, idx)])


def simulate(a, b, sig: SwitchSignal, x0, t_end: float, max_step: float | None = None
             ) -> Trajectory:
    """Trajectory on [breakpoints[0], t_end] sampled at every breakpoint, at
    ``t_end`` and, if given, at least every ``max_step``."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    x = np.asarray(x0, dtype=float).reshape(2)
    t0 = float(sig.breakpoints[0])
    if t0 > 0.0 or sig.t_end < t_end:
        raise SignalGap(f"signal covers [{t0}, {sig.t_end}] but [0, {t_end}] is needed")
    times, states = [t0], [x.copy()]
    for lo, hi, u in zip(sig.breakpoints[:-1], sig.breakpoints[1:], sig.values):
        if lo >= t_end:
            break
        hi = min(hi, t_end)
        m = u * a + (1.0 - u) * b
        pieces = 1 if max_step is None else max(1, int(math.ceil((hi - lo) / max_step)))
        ts = np.linspace(lo, hi, pieces + 1)[1:]
        xs = expm2(m, ts - lo) @ x
        times.extend(ts.tolist())
        states.extend(xs)
        x = xs[-1]
    return Trajectory(np.array(times), np.array(states), sig, a, b)


# ---------------------------------------------------------------------------
# random signals and decay statistics


def random_signal(rng, horizon: float, kind: str = "bang-bang",
                  mean_dwell: float | None = None) -> SwitchSignal:
    """Exponential dwell times; u in {0, 1} ("bang-bang") or uniform on [0, 1]
    ("relaxed")."""
    if kind not in ("bang-bang", "relaxed"):
        raise InvalidInput(f"unknown signal kind {kind!r}")
    mean_dwell = float(mean_dwell or settings.mean_dwell)
    times, values = [0.0], []
    while times[-1] < horizon:
        times.append(times[-1] + max(rng.exponential(mean_dwell), 1e-9))
        values.append(float(rng.integers(0, 2)) if kind == "bang-bang" else float(rng.random()))
    times[-1] = max(times[-1], horizon)
    return SwitchSignal(times, values)


def _streams(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def worst_signal(a, b, horizon: float):
    """Signal replaying the worst trajectory from its default start, or None
    where it does not rotate.

    After a half turn the state is a negative multiple of the start, so by
    homogeneity the half-turn switching pattern repeats for ever.
    """
    traj = integrate_worst(a, b, stop="half-turn")
    if not traj.rotates or not traj.arcs or traj.total_time <= 0.0:
        return None, traj
    arcs = traj.as_signal_arcs()
    reps = int(math.ceil(horizon / traj.total_time)) + 1
    return SwitchSignal.from_arcs(arcs * reps), traj


DECAY_THRESHOLD = 1e-2


@dataclass
class DecayStats:
    decay_observed: float
    max_growth: float
    worst_growth: float | None
    trials: int
    horizon: float

    def as_dict(self):
        return {"decay_observed": self.decay_observed, "max_growth": self.max_growth,
                "worst_growth": self.worst_growth, "trials": self.trials,
                "horizon": self.horizon}


def _ensemble(a, b, rngs, horizon, kinds):
    decayed, growth = 0, 0.0
    for i, rng in enumerate(rngs):
        x0 = rng.normal(size=2)
        x0 /= np.linalg.norm(x0)
        sig = random_signal(rng, horizon, kinds[i % len(kinds)])
        traj = simulate(a, b, sig, x0, horizon, max_step=0.1)
        r = traj.radii()
        growth = max(growth, float(r.max()))
        decayed += bool(r[-1] < DECAY_THRESHOLD)
    return decayed / len(rngs), growth


def empirical_gues(a, b, trials: int, horizon: float, seed: int,
                   kinds=("bang-bang", "relaxed")) -> DecayStats:
    """Seeded random trials from unit initial states.

    A trial counts as decayed when the final radius is below 1e-2.
    ``max_growth`` is the largest radius seen over all trials and the
    worst-policy replay; ``worst_growth`` is that replay's alone. Advisory:
    random signals rarely come close to the worst one.
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    if trials < 1:
        raise InvalidInput("trials must be at least 1")
    frac, growth = _ensemble(a, b, _streams(seed, trials), horizon, kinds)
    sig, traj = worst_signal(a, b, horizon)
    worst = None
    if sig is not None:
        replay = simulate(a, b, sig, traj.x0 / np.linalg.norm(traj.x0), horizon, max_step=0.1)
        worst = float(replay.radii().max())
        growth = max(growth, worst)
    return DecayStats(frac, growth, worst, trials, horizon)


# ---------------------------------------------------------------------------
# convexification


def chattering_signal(sig: SwitchSignal, tau: float) -> SwitchSignal:
    """Bang-bang approximation: every period of length tau spends u tau on A
    (u = 1) and (1 - u) tau on B (u = 0); the last period of each piece is
    shortened to fit."""
    times, values = [float(sig.breakpoints[0])], []
    for lo, hi, u in zip(sig.breakpoints[:-1], sig.breakpoints[1:], sig.values):
        n = max(1, int(math.ceil((hi - lo) / tau - 1e-12)))
        edges = np.linspace(lo, hi, n + 1)
        for p0, p1 in zip(edges[:-1], edges[1:]):
            split = p0 + u * (p1 - p0)
            for seg_end, val in ((split, 1.0), (p1, 0.0)):
                if seg_end > times[-1]:
                    times.append(float(seg_end))
                    values.append(val)
    return SwitchSignal(times, values)


def chattering_gap(a, b, sig: SwitchSignal, x0, horizon: float, tau: float) -> float:
    """Sup distance, at the chattering switch times, between the relaxed
    trajectory and its bang-bang approximation."""
    fast = chattering_signal(sig, tau)
    approx = simulate(a, b, fast, x0, horizon)
    ref = np.array([_state_at(a, b, sig, x0, t) for t in approx.times])
    return float(np.max(np.linalg.norm(ref - approx.states, axis=1)))


def _state_at(a, b, sig, x0, t):
    x = np.asarray(x0, dtype=float)
    for lo, hi, u in zip(sig.breakpoints[:-1], sig.breakpoints[1:], sig.values):
        if lo >= t:
            break
        m = u * a + (1.0 - u) * b
        x = expm2(m, min(hi, t) - lo) @ x
    return x


def convergence_order(taus, gaps) -> float:
    """Least-squares slope of log gap against log tau."""
    return float(np.polyfit(np.log(taus), np.log(gaps), 1)[0])


TAUS = (0.1, 0.05, 0.025, 0.0125)


@dataclass
class ConvexificationReport:
    scaling_ok: bool
    scaling_mismatches: list
    chattering_gaps: dict
    chattering_order: float
    chattering_ok: bool
    decay_bang_bang: float
    decay_relaxed: float
    decay_ok: bool

    @property
    def violations(self):
        out = []
        if not self.scaling_ok:
            out.append("scaling")
        if not self.chattering_ok:
            out.append("chattering")
        if not self.decay_ok:
            out.append("decay")
        return out

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self):
        return {"ok": self.ok, "violations": self.violations,
                "scaling_ok": self.scaling_ok, "scaling_mismatches": self.scaling_mismatches,
                "chattering_gaps": {repr(k): v for k, v in self.chattering_gaps.items()},
                "chattering_order": self.chattering_order,
                "decay_bang_bang": self.decay_bang_bang, "decay_relaxed": self.decay_relaxed}


def scaling_check(a, b, rng, n: int = 20, rtol: float = 1e-9):
    """Verdicts of (alpha A, beta B) for random positive alpha, beta; returns mismatches."""
    base = classify(a, b)
    bad = []
    for _ in range(n):
        alpha, beta = np.exp(rng.uniform(-1.5, 1.5, size=2))
        v = classify(alpha * a, beta * b)
        same = v.outcome is base.outcome and v.subcase == base.subcase
        if same and base.contraction is not None:
            same = abs(v.contraction - base.contraction) <= rtol * max(1.0, base.contraction)
        if not same:
            bad.append({"alpha": float(alpha), "beta": float(beta), "outcome": v.outcome.value,
                        "subcase": v.subcase, "contraction": v.contraction})
    return bad


def convexification_suite(a, b, seed: int, horizon: float = 2.0, trials: int = 100,
                          order_tol: float = 0.25, decay_tol: float = 0.15
                          ) -> ConvexificationReport:
    """Scaling invariance of the verdict, chattering approximation of relaxed
    signals (order about 1 in tau) and agreement of decay statistics between
    bang-bang and relaxed ensembles."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    r_scale, r_chat, r_bb, r_rx = _streams(seed, 4)
    bad = scaling_check(a, b, r_scale)

    sig = random_signal(r_chat, horizon, "relaxed")
    x0 = r_chat.normal(size=2)
    x0 /= np.linalg.norm(x0)
    gaps = {tau: chattering_gap(a, b, sig, x0, horizon, tau) for tau in TAUS}
    order = convergence_order(list(gaps), list(gaps.values()))

    long_horizon = 50.0
    seeds = np.random.SeedSequence(int(r_bb.integers(2**63)))
    frac_bb, _ = _ensemble(a, b, [np.random.default_rng(s) for s in seeds.spawn(trials)],
                           long_horizon, ("bang-bang",))
    seeds = np.random.SeedSequence(int(r_rx.integers(2**63)))
    frac_rx, _ = _ensemble(a, b, [np.random.default_rng(s) for s in seeds.spawn(trials)],
                           long_horizon, ("relaxed",))
    return ConvexificationReport(
        scaling_ok=not bad, scaling_mismatches=bad,
        chattering_gaps=gaps, chattering_order=order,
        chattering_ok=abs(order - 1.0) <= order_tol,
        decay_bang_bang=frac_bb, decay_relaxed=frac_rx,
        decay_ok=abs(frac_bb - frac_rx) <= decay_tol)


# ---------------------------------------------------------------------------
# Lyapunov decrease along simulated trajectories


@dataclass
class DecreaseReport:
    ok: bool
    trajectories: int
    worst_step_increase: float
    worst_window_change: float


def clf_decrease_test(clf, a, b, seed: int, n_traj: int = 100, horizon: float = 5.0,
                      dt: float = 0.05, window: float = 1.0, tol: float = 1e-9
                      ) -> DecreaseReport:
    """``log F`` along seeded random trajectories (half bang-bang, half
    relaxed): non-increasing at every sample up to ``tol`` and strictly lower
    after every window of length ``window``."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    step_worst, window_worst = -math.inf, -math.inf
    for i, rng in enumerate(_streams(seed, n_traj)):
        x0 = rng.normal(size=2)
        kind = "bang-bang" if i % 2 == 0 else "relaxed"
        sig = random_signal(rng, horizon, kind)
        traj = simulate(a, b, sig, x0, horizon, max_step=dt)
        t = traj.times
        logf = clf.log_value(traj.states)
        step_worst = max(step_worst, float(np.max(np.diff(logf))))
        on_grid = np.interp(np.arange(0.0, horizon - window + 1e-12, dt), t, logf)
        later = np.interp(np.arange(window, horizon + 1e-12, dt)[:len(on_grid)], t, logf)
        window_worst = max(window_worst, float(np.max(later - on_grid)))
    ok = step_worst <= tol and window_worst < 0.0
    return DecreaseReport(ok, n_traj, step_worst, window_worst)

