"""Seeded random pairs, drawn per subcase, for tests and experiments."""

from __future__ import annotations

import numpy as np

from .classifier import Outcome, classify
from .core2d import CaseTag, scale_decay
from .normal_form import cc_pair_from_kappa, rc_pair, rr_pair

SUBCASES = ("CC.1", "CC.2.1", "CC.2.2", "RC.1", "RC.2.1", "RC.2.2.A", "RC.2.2.B",
            "RR.1", "RR.2.1", "RR.2.2.A", "RR.2.2.B")
GUES_SUBCASES = tuple(s for s in SUBCASES if s not in ("CC.2.1", "RC.2.1", "RR.2.1"))


def _draw_params(case: str, rng):
    if case == "CC":
        sign = 1.0 if rng.random() < 0.75 else -1.0
        return (rng.uniform(0.02, 1.2), rng.uniform(0.02, 1.2), sign * rng.uniform(1.02, 4.0))
    if case == "RC":
        return (1.0 + rng.exponential(1.5), rng.exponential(0.6), rng.uniform(-4.0, 4.0))
    k = rng.uniform(-8.0, 8.0)
    while abs(abs(k) - 1.0) < 0.05:
        k = rng.uniform(-8.0, 8.0)
    return (1.0 + rng.exponential(1.0), 1.0 + rng.exponential(1.0), k)


def normal_pair(case: str, params):
    case = CaseTag(case)
    if case is CaseTag.CC:
        return cc_pair_from_kappa(*params)
    if case is CaseTag.RC:
        return rc_pair(*params)
    return rr_pair(*params)


def disguise(a, b, rng, max_cond: float = 20.0):
    """Random similarity and positive rescalings of a pair.

    Returns (a', b', t, alpha, beta) with a' = alpha t^-1 a t, b' = beta t^-1 b t.
    """
    while True:
        t = rng.normal(size=(2, 2))
        if np.linalg.cond(t) < max_cond:
            break
    alpha, beta = np.exp(rng.uniform(-1.0, 1.0, size=2))
    a2 = alpha * np.linalg.solve(t, a @ t)
    b2 = beta * np.linalg.solve(t, b @ t)
    return a2, b2, t, float(alpha), float(beta)


def has_rate_margin(a, b, margin: float) -> bool:
    """True if the pair stays GUES when both decay rates shrink by ``1 - margin``."""
    z = 1.0 - margin
    return classify(scale_decay(a, z), scale_decay(b, z)).outcome is Outcome.GUES


def sample_subcase(subcase: str, rng, *, gues_only: bool = False, margin: float = 1e-3,
                   rate_margin: float = 0.0, max_tries: int = 100_000):
    """Normal-form parameters and pair of the requested subcase.

    For contraction subcases, pairs with ``|rho - 1| < margin`` are rejected so
    that tests stay away from the marginal boundary. A positive
    ``rate_margin`` keeps only GUES pairs that survive shrinking both decay
    rates by that fraction.
    """
    if subcase not in SUBCASES:
        raise ValueError(f"unknown subcase {subcase!r}")
    case = subcase[:2]
    for _ in range(max_tries):
        params = _draw_params(case, rng)
        a, b = normal_pair(case, params)
        v = classify(a, b)
        if v.subcase != subcase:
            continue
        if v.contraction is not None and abs(v.contraction - 1.0) < margin:
            continue
        if gues_only and v.outcome is not Outcome.GUES:
            continue
        if rate_margin > 0.0 and not (v.outcome is Outcome.GUES
                                      and has_rate_margin(a, b, rate_margin)):
            continue
        return params, a, b, v
    raise RuntimeError(f"could not draw a {subcase} pair")


def random_hurwitz(rng, scale: float = 1.0):
    """Gaussian matrix shifted to be Hurwitz with a random stability margin."""
    m = rng.normal(scale=scale, size=(2, 2))
    shift = max(np.linalg.eigvals(m).real) + rng.uniform(0.05, 1.0) * scale
    return m - shift * np.eye(2)


def random_pair(rng):
    return random_hurwitz(rng), random_hurwitz(rng)
