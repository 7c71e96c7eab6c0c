"""Stability analysis and Lyapunov function synthesis for planar switched
linear systems ``x' = u A x + (1 - u) B x`` with ``u`` in [0, 1]."""

from .classifier import Outcome, Verdict, classify
from .clf_synthesis import poly_clf, polytope_clf, levelset_clf, synthesize, verify_clf
from .core2d import invariants
from .degree_scan import min_degree, theorem2_experiment
from .normal_form import to_normal_form
from .simulator import SwitchSignal, simulate
from .value_function import solve_value
from .worst_trajectory import integrate_worst

__version__ = "0.1.0"

__all__ = [
    "Outcome", "Verdict", "classify", "invariants", "to_normal_form", "integrate_worst",
    "solve_value", "synthesize", "levelset_clf", "poly_clf", "polytope_clf", "verify_clf",
    "min_degree", "theorem2_experiment", "SwitchSignal", "simulate",
]
