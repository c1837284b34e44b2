"""Command-line front end.

Exit codes: 0 success, 1 parse or validation error, 2 numerical failure,
3 relaxation did not converge, 4 method not applicable to the instance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    SVIRIDENKO_FACTOR,
    build_certificate,
    prior_factor_ratio,
)
from .combinat import greedy, greedy_budgeted_wolsey, sviridenko_budgeted
from .estimators import run_method
from .exceptions import (
    BudgetScaleOverflow,
    BudgetTooSmall,
    DesignError,
    DidNotConverge,
    NotApplicable,
    NothingAffordable,
    NumericalError,
    TooLarge,
    ValidationError,
)
from .instance import DesignProblem, IntegerDesign, dump_problem, generate, load_problem, \
    project_if_rank_deficient
from .relax import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_continuous
from .rounding import pow0

SCHEMA_VERSION = 1
METHODS = ("greedy", "greedy-binary", "round", "topn", "apportion", "dp", "wolsey", "sviridenko")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NOT_CONVERGED, EXIT_INAPPLICABLE = range(5)
_INAPPLICABLE = (NotApplicable, BudgetTooSmall, NothingAffordable, TooLarge, BudgetScaleOverflow)

logger = logging.getLogger("phip_design")


class _Failure(Exception):
    """Carries an exit code and an optional partial report up to ``main``."""

    def __init__(self, code: int, message: str, payload=None):
        super().__init__(message)
        self.code = code
        self.payload = payload


# ---------------------------------------------------------------------------
# output helpers

def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, NaN and inf to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def to_json(obj) -> str:
    # json uses repr for floats, the shortest string that round-trips
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: str):
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# problem loading

def _load(args) -> DesignProblem:
    try:
        text = Path(args.problem).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {args.problem}: {exc.strerror}") from None
    problem = load_problem(text)
    if getattr(args, "p", None) is not None:
        problem = problem.with_p(args.p)
    if getattr(args, "N", None) is not None:
        problem = problem.with_N(args.N)
    return problem


def _relax(problem: DesignProblem, args, timings: dict):
    """Solve the relaxation on the range of ``sum_i M_i``; phi values are unchanged."""
    t0 = time.perf_counter()
    projected, U = project_if_rank_deficient(problem)
    cert = solve_continuous(projected, args.tol, args.max_iter)
    timings["relax"] = 1e3 * (time.perf_counter() - t0)
    return cert, U.shape[1]


def _relax_dict(cert, rank: int, problem: DesignProblem) -> dict:
    d = cert.to_dict()
    d["projected_rank"] = rank
    d["m"] = problem.dim
    return d


def _report_header(problem: DesignProblem, args) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "label": problem.label,
        "seed": args.seed,
        "p": problem.p,
        "mode": "budget" if problem.is_budgeted else "replication",
    }


def _finish_timings(report: dict, timings: dict, args):
    if not args.no_timings:
        report["timings_ms"] = timings


# ---------------------------------------------------------------------------
# subcommands

def cmd_relax(args) -> int:
    problem = _load(args)
    timings: dict = {}
    cert, rank = _relax(problem, args, timings)
    report = _report_header(problem, args)
    report["relaxation"] = _relax_dict(cert, rank, problem)
    _finish_timings(report, timings, args)
    _emit(to_json(report), args.out)
    if not cert.converged:
        raise _Failure(EXIT_NOT_CONVERGED, f"relaxation stopped at gap {cert.gap:.3g}")
    return EXIT_OK


def cmd_greedy(args) -> int:
    problem = _load(args)
    t0 = time.perf_counter()
    report = _report_header(problem, args)
    if problem.is_budgeted:
        algo = args.budgeted
        design = greedy_budgeted_wolsey(problem) if algo == "wolsey" else sviridenko_budgeted(problem)
        report["algorithm"] = algo
    else:
        design, trace = greedy(problem, args.mode, lazy=not args.naive)
        report["algorithm"] = f"greedy-{args.mode}"
        report["picks"] = trace.indices
        report["gains"] = trace.gains
        report["evaluations"] = trace.evaluations
    report["design"] = design.to_list()
    report["objective"] = problem.phi(design.n)
    _finish_timings(report, {"greedy": 1e3 * (time.perf_counter() - t0)}, args)
    _emit(to_json(report), args.out)
    return EXIT_OK


def _run_methods(problem: DesignProblem, methods, args) -> int:
    timings: dict = {}
    report = _report_header(problem, args)
    report["methods"] = list(methods)
    cert, rank = _relax(problem, args, timings)
    report["relaxation"] = _relax_dict(cert, rank, problem)
    certificates = {}
    code = EXIT_OK
    for method in methods:
        t0 = time.perf_counter()
        try:
            design = run_method(problem, method, cert.w)
        except _INAPPLICABLE as exc:
            logger.error("method %s not applicable: %s", method, exc)
            certificates[method] = {"error": str(exc)}
            code = max(code, EXIT_INAPPLICABLE)
            continue
        certificates[method] = build_certificate(problem, design, cert, method).to_dict()
        timings[method] = 1e3 * (time.perf_counter() - t0)
    report["certificates"] = certificates
    _finish_timings(report, timings, args)
    if code == EXIT_OK and not cert.converged:
        code = EXIT_NOT_CONVERGED
    if code != EXIT_OK:
        raise _Failure(code, f"finished with exit code {code}", to_json(report))
    _emit(to_json(report), args.out)
    return code


def cmd_round(args) -> int:
    return _run_methods(_load(args), [args.method], args)


def cmd_pipeline(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if not methods or bad:
        raise ValidationError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    return _run_methods(_load(args), methods, args)


def cmd_bounds(args) -> int:
    problem = _load(args)
    try:
        n = [int(v) for v in args.design.split(",")]
    except ValueError:
        raise ValidationError(f"--design must be comma-separated integers, got {args.design!r}") from None
    design = IntegerDesign(np.array(n), binary=args.method in ("topn", "greedy-binary"))
    if len(design) != problem.s:
        raise ValidationError(f"design has {len(design)} entries for {problem.s} atoms")
    if not design.is_feasible(problem):
        raise ValidationError("design exceeds the budget")
    timings: dict = {}
    cert, rank = _relax(problem, args, timings)
    report = _report_header(problem, args)
    report["relaxation"] = _relax_dict(cert, rank, problem)
    report["certificate"] = build_certificate(problem, design, cert, args.method).to_dict()
    _finish_timings(report, timings, args)
    _emit(to_json(report), args.out)
    return EXIT_OK if cert.converged else EXIT_NOT_CONVERGED


_GRID_RANGE = re.compile(r"^\s*([^:]+):([^:]+):(\d+)\s*$")


def _number(token: str) -> float:
    token = token.strip()
    if token.endswith("/e"):
        return float(Fraction(token[:-2] or "1")) / math.e
    try:
        return float(Fraction(token))
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"bad grid value {token!r}") from None


def parse_grid(text: str) -> list[float]:
    """``a:b:k`` for ``k`` evenly spaced points, or a comma list (``1/e`` allowed)."""
    m = _GRID_RANGE.match(text)
    if m:
        lo, hi, k = _number(m.group(1)), _number(m.group(2)), int(m.group(3))
        if k < 1:
            raise ValidationError("a grid needs at least one point")
        return np.linspace(lo, hi, k).tolist()
    values = [_number(t) for t in text.split(",") if t.strip()]
    if not values:
        raise ValidationError("empty grid")
    return values


def sweep_rows(p_grid, ratio_grid):
    """Rows ``(p, N/s, F, F > 1 - 1/e, F > (1 - s/N)^p or None for N < s)``."""
    rows = []
    for p in p_grid:
        for x in ratio_grid:
            F = prior_factor_ratio(p, x)
            beats_apport = None
            if x >= 1:
                beats_apport = F > float(pow0(np.array([1.0 - 1.0 / x]), p)[0])
            rows.append((p, x, F, F > SVIRIDENKO_FACTOR, beats_apport))
    return rows


def cmd_sweep_f(args) -> int:
    p_grid = parse_grid(args.p_grid)
    ratio_grid = parse_grid(args.ratio_grid)
    if any(not 0 <= p <= 1 for p in p_grid) or any(x <= 0 for x in ratio_grid):
        raise ValidationError("need p in [0, 1] and N/s > 0")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p", "N_over_s", "F", "beats_greedy", "beats_apportionment"])
    fmt = {True: "true", False: "false", None: ""}
    for p, x, F, bg, ba in sweep_rows(p_grid, ratio_grid):
        writer.writerow([repr(float(p)), repr(float(x)), repr(float(F)), fmt[bg], fmt[ba]])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ValidationError(f"--param expects key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def cmd_gen(args) -> int:
    params = dict(_param(t) for t in args.param)
    problem = generate(args.kind, params, seed=0 if args.seed is None else args.seed)
    _emit(dump_problem(problem), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relaxation gap target")
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default="-", help="output file, or - for stdout")
    common.add_argument("--no-timings", action="store_true",
                        help="omit wall-clock timings so reports are byte-stable")
    common.add_argument("-v", "--verbose", action="store_true")

    with_problem = argparse.ArgumentParser(add_help=False, parents=[common])
    with_problem.add_argument("problem", help="problem document (JSON)")
    with_problem.add_argument("--p", type=float, default=None, help="override the exponent p")
    with_problem.add_argument("--N", type=int, default=None, help="override the budget N")

    parser = argparse.ArgumentParser(prog="phip-design", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("relax", parents=[with_problem], help="solve the continuous relaxation")
    p.set_defaults(func=cmd_relax)

    p = sub.add_parser("greedy", parents=[with_problem], help="greedy integer design")
    p.add_argument("--mode", choices=("replicated", "binary"), default="replicated")
    p.add_argument("--naive", action="store_true", help="evaluate every gain at every step")
    p.add_argument("--budgeted", choices=("wolsey", "sviridenko"), default="wolsey",
                   help="algorithm for budget-mode problems")
    p.set_defaults(func=cmd_greedy)

    p = sub.add_parser("round", parents=[with_problem], help="round the relaxation optimum")
    p.add_argument("--method", choices=("round", "topn", "apportion", "dp"), default="round")
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("bounds", parents=[with_problem], help="certificate for a given design")
    p.add_argument("--design", required=True, help="comma-separated counts")
    p.add_argument("--method", choices=METHODS, default="dp",
                   help="method that produced the design; selects prior bounds")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("pipeline", parents=[with_problem], help="relax, then run several methods")
    p.add_argument("--methods", default="greedy,round",
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sweep-f", parents=[common], help="CSV grid of the prior factor F")
    p.add_argument("--p-grid", default="0:1:101")
    p.add_argument("--ratio-grid", default="0.1,1/e,0.5,1,2,10")
    p.set_defaults(func=cmd_sweep_f)

    p = sub.add_parser("gen", parents=[common], help="write a synthetic problem document")
    p.add_argument("kind", help="coverage, random-psd or rank-one")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse usage errors map onto the validation exit code
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    logger.addHandler(handler)
    level = logger.level
    logger.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return _dispatch(args)
    finally:
        logger.removeHandler(handler)
        logger.setLevel(level)


def _dispatch(args) -> int:
    try:
        return args.func(args)
    except _Failure as exc:
        if exc.payload is not None:
            _emit(exc.payload, args.out)
        logger.error("%s", exc)
        return exc.code
    except DidNotConverge as exc:
        logger.error("%s", exc)
        return EXIT_NOT_CONVERGED
    except _INAPPLICABLE as exc:
        logger.error("%s", exc)
        return EXIT_INAPPLICABLE
    except ValidationError as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    except NumericalError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    except DesignError as exc:
        logger.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
