"""Command-line front end.

Structured results are printed as JSON, curves and tables as CSV. Pairs come
from a JSON file (``--pair``) or from inline ``--a``/``--b`` flags. Exit codes:
0 success, 1 a verification that ran but failed, 2 invalid input, 3 a pair
outside the closed-form hypotheses, 4 an internal numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config, io
from .classifier import Outcome, classify
from .clf_synthesis import from_dict, synthesize, verify_clf
from .core2d import invariants
from .degree_scan import min_degree, theorem2_experiment
from .errors import (DegenerateOrdering, DegenerateQ, HypothesesViolated, InvalidInput,
                     NoRotation, NotGUES, SubcaseUnsupported,
                     SwitchStabError)
from .normal_form import to_normal_form
from .simulator import SwitchSignal, clf_decrease_test, empirical_gues, random_signal, simulate
from .value_function import solve_value
from .worst_trajectory import integrate_worst

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_UNSUPPORTED, EXIT_NUMERICAL = 0, 1, 2, 3, 4

FALLBACK_HINT = "the closed form does not apply; use `switchstab simulate` for an empirical check"


# ---------------------------------------------------------------------------
# input helpers


def _pairs(args):
    if args.pair is not None:
        if args.a is not None or args.b is not None:
            raise InvalidInput("give either --pair or --a/--b, not both")
        return io.load_pairs(args.pair)
    if args.a is None or args.b is None:
        raise InvalidInput("a pair is required: --pair FILE or --a M --b M")
    return [(io.parse_matrix(args.a, "A"), io.parse_matrix(args.b, "B"), None)]


def _single_pair(args):
    pairs = _pairs(args)
    if len(pairs) != 1:
        raise InvalidInput("this command takes exactly one pair")
    return pairs[0]


def _emit(args, text: str):
    if args.output:
        io.write_text(args.output, text)
    else:
        sys.stdout.write(text)


def _require_seed(args):
    if args.seed is None:
        raise InvalidInput("--seed is required for randomized runs")
    return args.seed


def _per_pair(args, fn):
    results = []
    for a, b, label in _pairs(args):
        out = fn(a, b)
        if label is not None:
            out = {"label": label, **out}
        results.append(out)
    return results[0] if len(results) == 1 and args.pair is None else results


# ---------------------------------------------------------------------------
# subcommands


def cmd_classify(args):
    def one(a, b):
        v = classify(a, b)
        out = v.as_dict()
        if v.outcome is Outcome.UNSUPPORTED:
            out["hint"] = FALLBACK_HINT
        return out

    results = _per_pair(args, one)
    _emit(args, io.dumps(results))
    items = results if isinstance(results, list) else [results]
    if all(r["outcome"] == Outcome.UNSUPPORTED.value for r in items):
        print(f"switchstab: {FALLBACK_HINT}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    return EXIT_OK


def cmd_invariants(args):
    _emit(args, io.dumps(_per_pair(args, lambda a, b: invariants(a, b).as_dict())))
    return EXIT_OK


def cmd_normal_form(args):
    _emit(args, io.dumps(_per_pair(args, lambda a, b: to_normal_form(a, b).as_dict())))
    return EXIT_OK


def cmd_worst(args):
    a, b, _ = _single_pair(args)
    traj = integrate_worst(a, b, stop=args.stop)
    if not traj.rotates:
        raise NoRotation(traj.reason or "the worst trajectory does not rotate")
    rows = traj.sample(args.samples)
    _emit(args, io.csv_text(["t", "x1", "x2", "field"], rows))
    if args.summary:
        summary = {"contraction": traj.half_turn_factor, "switch_times": traj.switch_times,
                   "arcs": [{"field": arc.field, "duration": arc.duration}
                            for arc in traj.arcs],
                   "period": traj.period, "closed": traj.closed,
                   "orientation": traj.orientation}
        io.write_json(args.summary, summary)
    return EXIT_OK


def cmd_value(args):
    a, b, _ = _single_pair(args)
    v = solve_value(a, b, n_theta=args.n_theta)
    _emit(args, io.csv_text(["theta", "v", "r"], v.rows()))
    return EXIT_OK


def cmd_synth(args):
    a, b, label = _single_pair(args)
    clf = synthesize(a, b, args.method, args.n_points)
    data = {"method": args.method, "pair": io.pair_dict(a, b, label), **clf.to_dict()}
    _emit(args, io.dumps(data))
    if args.curve:
        if not hasattr(clf, "level_curve"):
            raise InvalidInput(f"no level curve export for CLF type {data['type']!r}")
        io.write_text(args.curve, io.csv_text(["theta", "x1", "x2"], clf.level_curve()))
    return EXIT_OK


def cmd_degree_scan(args):
    a, b, _ = _single_pair(args)
    if args.max_degree < 2:
        raise InvalidInput("--max-degree must be at least 2")
    result = min_degree(a, b, args.max_degree, args.samples)
    _emit(args, io.dumps(result.as_dict()))
    return EXIT_OK


def cmd_degree_growth(args):
    if args.steps < 1 or args.cap < 2:
        raise InvalidInput("--steps must be >= 1 and --cap >= 2")
    result = theorem2_experiment(args.kappa, args.steps, args.cap, args.samples)
    _emit(args, result.to_csv(include_time=args.timing))
    return EXIT_OK


def _signal(args, horizon):
    if args.signal == "random":
        rng = np.random.default_rng(_require_seed(args))
        return random_signal(rng, horizon, args.kind)
    return SwitchSignal.from_csv(io.read_text(args.signal))


def cmd_simulate(args):
    a, b, _ = _single_pair(args)
    if args.trials is not None:
        stats = empirical_gues(a, b, args.trials, args.t_end, _require_seed(args))
        _emit(args, io.dumps(stats.as_dict()))
        return EXIT_OK
    x0 = io.parse_vector(args.x0, "x0")
    sig = _signal(args, args.t_end)
    traj = simulate(a, b, sig, x0, args.t_end, max_step=args.max_step)
    _emit(args, traj.to_csv())
    return EXIT_OK


def cmd_verify(args):
    data = io.read_json(args.file)
    if not isinstance(data, dict):
        raise InvalidInput("CLF file must hold a JSON object")
    if args.pair is not None or args.a is not None:
        a, b, _ = _single_pair(args)
    elif "pair" in data:
        a, b, _ = io.pair_from_dict(data["pair"])
    else:
        raise InvalidInput("no pair given and the CLF file does not embed one")
    try:
        clf = from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed CLF file: {exc}") from exc
    report = verify_clf(clf, a, b)
    if args.trajectories:
        dec = clf_decrease_test(clf, a, b, seed=_require_seed(args), n_traj=args.trajectories)
        report["trajectory_test"] = {"ok": dec.ok, "trajectories": dec.trajectories,
                                     "worst_step_increase": dec.worst_step_increase,
                                     "worst_window_change": dec.worst_window_change}
        report["ok"] = report["ok"] and dec.ok
    _emit(args, io.dumps(report))
    return EXIT_OK if report["ok"] else EXIT_FAILED


# ---------------------------------------------------------------------------
# parser


def _add_pair_args(p):
    p.add_argument("--pair", help="JSON file with {\"a\": [[..],[..]], \"b\": [[..],[..]]}")
    p.add_argument("--a", help="matrix A inline, JSON or a11,a12,a21,a22")
    p.add_argument("--b", help="matrix B inline, JSON or b11,b12,b21,b22")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="switchstab",
        description="Stability classification and Lyapunov function synthesis for planar "
                    "switched linear systems x' = u A x + (1 - u) B x.")
    parser.add_argument("--config", help="JSON file overriding numerical tolerances")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="write the main output here instead of stdout")

    p = sub.add_parser("classify", parents=[common],
                       help="stability verdict (JSON)")
    _add_pair_args(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("invariants", parents=[common],
                       help="coordinate-invariant parameters (JSON)")
    _add_pair_args(p)
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("normal-form", parents=[common],
                       help="normal form and conjugating matrix (JSON)")
    _add_pair_args(p)
    p.set_defaults(func=cmd_normal_form)

    p = sub.add_parser("worst", parents=[common],
                       help="worst trajectory (CSV) and optional summary JSON")
    _add_pair_args(p)
    p.add_argument("--stop", choices=("half-turn", "full-turn"), default="half-turn")
    p.add_argument("--samples", type=int, default=50, help="samples per arc")
    p.add_argument("--summary", help="write contraction and switch times to this JSON file")
    p.set_defaults(func=cmd_worst)

    p = sub.add_parser("value", parents=[common],
                       help="discretized value function v(theta) (CSV)")
    _add_pair_args(p)
    p.add_argument("--n-theta", type=int, default=None)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("synth", parents=[common],
                       help="synthesize a common Lyapunov function (JSON)")
    _add_pair_args(p)
    p.add_argument("--method", choices=("levelset", "poly", "polytope"), default="levelset")
    p.add_argument("--n-points", type=int, default=None)
    p.add_argument("--curve", help="write the unit level curve to this CSV file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("degree-scan", parents=[common],
                       help="minimal degree of a sampled polynomial CLF (JSON)")
    _add_pair_args(p)
    p.add_argument("--max-degree", type=int, required=True)
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_degree_scan)

    p = sub.add_parser("experiment-theorem2", parents=[common],
                       help="minimal degree along pairs approaching the marginal curve (CSV)")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--cap", type=int, required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--timing", action="store_true", help="add a wall_time column")
    p.set_defaults(func=cmd_degree_growth)

    p = sub.add_parser("simulate", parents=[common],
                       help="simulate a switched trajectory (CSV) or an ensemble")
    _add_pair_args(p)
    p.add_argument("--signal", default="random", help="signal CSV file or 'random'")
    p.add_argument("--kind", choices=("bang-bang", "relaxed"), default="bang-bang")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--x0", default="1,0")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--max-step", type=float, default=None)
    p.add_argument("--trials", type=int, default=None,
                   help="run a seeded ensemble and print decay statistics instead")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common],
                       help="re-check an exported CLF against a pair")
    p.add_argument("file")
    _add_pair_args(p)
    p.add_argument("--trajectories", type=int, default=0,
                   help="also run a seeded decrease test on this many trajectories")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def _exit_code(exc) -> int:
    if isinstance(exc, (InvalidInput, NotGUES)):
        return EXIT_INPUT
    if isinstance(exc, (HypothesesViolated, SubcaseUnsupported, DegenerateOrdering,
                        DegenerateQ, NoRotation)):
        return EXIT_UNSUPPORTED
    return EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = config.load_file(args.config) if args.config else {}
        with config.override(**overrides):
            return args.func(args)
    except SwitchStabError as exc:
        code = _exit_code(exc)
        hint = f" ({FALLBACK_HINT})" if code == EXIT_UNSUPPORTED else ""
        print(f"switchstab: {type(exc).__name__}: {exc}{hint}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
