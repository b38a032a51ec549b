"""Command-line front end: solve, verify, sensitivity, sweep, provision.

Exit codes: 0 solved/verified-unique, 1 verification failure, 2 multiple
equilibria, 3 infeasible, 4 non-convergence, 64 parse error, 65 validation
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings

import numpy as np

from . import game1, game23, market, verifier
from .errors import (
    IncomparableEquilibria,
    InfeasibleEquilibrium,
    NonConvergence,
    ProfileError,
    ScenarioError,
)
from .market import Measure
from .scenario_io import (
    ScenarioParseError,
    apply_axis,
    fmt,
    format_result_table,
    load_document,
    load_result_profile,
    scenario_from_dict,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_MULTIPLE = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGENCE = 4
EXIT_PARSE = 64
EXIT_VALIDATION = 65


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _vector_arg(text: str | None, n: int, name: str) -> np.ndarray | None:
    if text is None:
        return None
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"--{name}: expected comma-separated numbers") from exc
    if len(values) != n:
        raise CliError(EXIT_PARSE, f"--{name}: expected {n} values, got {len(values)}")
    return np.array(values)


def _load(args):
    """Scenario and tolerances from the file, with command-line overrides applied."""
    doc = load_document(args.scenario)
    return doc, _build(doc, args)


def _build(doc, args):
    scenario, tol = scenario_from_dict(doc, strict=args.strict)
    if args.phi is not None:
        scenario = scenario.replace(measure=Measure(args.phi))
    try:
        tol = tol.with_overrides(fixpoint_tol=args.tol, max_iter=args.max_iter)
    except ValueError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from exc
    issues = market.validate(scenario)
    if issues:
        raise ScenarioError(issues)
    return scenario, tol


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _solve(game: int, scenario, tol, qos=None, prices=None):
    if game == 1:
        return game1.solve_game1(scenario, np.zeros(scenario.n) if qos is None else qos, tol)
    if game == 2:
        return game23.solve_game2(scenario, tol)
    if prices is None:
        raise CliError(EXIT_PARSE, "game 3 needs --prices")
    return game23.solve_game3(scenario, prices, tol)


def cmd_solve(args) -> int:
    _, (scenario, tol) = _load(args)
    qos = _vector_arg(args.qos, scenario.n, "qos")
    prices = _vector_arg(args.prices, scenario.n, "prices")
    result = _solve(args.game, scenario, tol, qos, prices)
    _emit(args, format_result_table(result, scenario))
    return EXIT_MULTIPLE if result.meta.unique == "multiple" else EXIT_OK


_DEFAULT_SCAN = {"1": "price", "2": "joint", "3": "qos"}


def cmd_verify(args) -> int:
    _, (scenario, _tol) = _load(args)
    scan = args.scan
    if args.result:
        meta, profile = load_result_profile(args.result, scenario)
        scan = scan or _DEFAULT_SCAN.get(meta.get("game", ""), "joint")
    else:
        prices = _vector_arg(args.prices, scenario.n, "prices")
        qos = _vector_arg(args.qos, scenario.n, "qos")
        if prices is None:
            raise CliError(EXIT_PARSE, "verify needs --result or --prices (and optionally --qos)")
        profile = market.StrategyProfile(prices, np.zeros(scenario.n) if qos is None else qos)
        scan = scan or "joint"
    try:
        market.check_profile(scenario, profile)
    except ProfileError as exc:
        raise CliError(EXIT_VALIDATION, f"profile: {exc}") from exc

    grid = verifier.Grid(price_step=args.grid_price_step, qos_step=args.grid_qos_step, scan=scan)
    cert = verifier.verify_nash(scenario, profile, grid)
    out = io.StringIO()
    out.write(f"# scan={scan}\n")
    out.write(f"# price_step={fmt(cert.price_step)}\n")
    out.write(f"# qos_step={fmt(cert.qos_step)}\n")
    out.write(f"# epsilon={fmt(cert.epsilon)}\n")
    out.write(f"# bound={fmt(cert.bound)}\n")
    out.write(f"# passed={'true' if cert.passed else 'false'}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["provider", "price", "qos", "best_price", "best_qos", "gain"])
    for dev, p in zip(cert.per_provider, scenario.providers):
        i = dev.provider
        writer.writerow([p.id, fmt(profile.prices[i]), fmt(profile.qos[i]), fmt(dev.price), fmt(dev.qos), fmt(dev.gain)])
    _emit(args, out.getvalue())
    return EXIT_OK if cert.passed else EXIT_VERIFY_FAILED


def _matrix_block(writer, name: str, ids, matrix, none_label: str = "none") -> None:
    writer.writerow([f"# block={name}"])
    writer.writerow(["provider", *[f"s_{j}" for j in ids]])
    for i, row in zip(ids, matrix):
        writer.writerow([i, *[none_label if math.isnan(v) else fmt(v) for v in row]])


def cmd_sensitivity(args) -> int:
    _, (scenario, tol) = _load(args)
    qos = _vector_arg(args.qos, scenario.n, "qos")
    qos = np.zeros(scenario.n) if qos is None else qos
    report = game1.sensitivity_report(scenario, qos, tol)
    ids = [p.id for p in scenario.providers]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["# block=delta"])
    writer.writerow(["provider", "delta"])
    for i, d in zip(ids, report.delta):
        writer.writerow([i, fmt(d)])
    _matrix_block(writer, "price_qos", ids, report.price_qos)
    _matrix_block(writer, "profit_qos", ids, report.profit_qos)
    _matrix_block(writer, "critical_qos", ids, report.critical_qos)
    _emit(args, out.getvalue())
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc, (scenario, tol) = _load(args)
    n = scenario.n
    extra = {}
    qos = _vector_arg(args.qos, n, "qos")
    prices = _vector_arg(args.prices, n, "prices")
    extra["qos"] = list(np.zeros(n) if qos is None else qos)
    if prices is not None:
        extra["prices"] = list(prices)
    try:
        lo, hi = (float(v) for v in args.range.split(","))
    except ValueError as exc:
        raise CliError(EXIT_PARSE, "--range: expected LO,HI") from exc
    if args.steps < 1:
        raise CliError(EXIT_PARSE, "--steps must be >= 1")
    try:
        apply_axis(doc, extra, args.axis, lo)
    except KeyError as exc:
        raise CliError(EXIT_PARSE, f"unknown axis path {args.axis!r}") from exc

    ids = [p.id for p in scenario.providers]
    header = ["axis", "status"]
    for name in ("price", "qos", "demand", "profit"):
        header += [f"{name}_{i}" for i in ids]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([f"# game={args.game}", f"axis={args.axis}"])
    writer.writerow(header)
    for value in np.linspace(lo, hi, args.steps):
        point_doc, point_extra = apply_axis(doc, extra, args.axis, float(value))
        status, cells = "ok", [""] * (4 * n)
        try:
            sc, point_tol = _build(point_doc, args)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", game23.ConcavityWarning)
                result = _solve(args.game, sc, point_tol, np.array(point_extra["qos"]),
                                np.array(point_extra["prices"]) if "prices" in point_extra else None)
            if result.meta.unique == "multiple":
                status = "multiple"
            cells = [fmt(v) for v in (*result.prices, *result.qos, *result.demands, *result.profits)]
        except (ScenarioError, ProfileError):
            status = "invalid"
        except InfeasibleEquilibrium as exc:
            status = f"infeasible-{exc.kind}"
        except IncomparableEquilibria:
            status = "incomparable"
        except NonConvergence:
            status = "nonconvergent"
        writer.writerow([fmt(value), status, *cells])
    _emit(args, out.getvalue())
    return EXIT_OK


def cmd_provision(args) -> int:
    _, (scenario, _tol) = _load(args)
    _meta, profile = load_result_profile(args.result, scenario)
    try:
        market.check_profile(scenario, profile, check_prices=False)
    except ProfileError as exc:
        raise CliError(EXIT_VALIDATION, f"profile: {exc}") from exc
    demands = market.demand(scenario, profile)
    if np.any(demands < 0):
        bad = np.flatnonzero(demands < 0).tolist()
        raise InfeasibleEquilibrium("demand", bad, prices=profile.prices, demands=demands)
    mu = market.capacity(scenario, demands, profile.qos)
    rt = market.response_time(mu, demands, scenario.measure)
    assert np.all(mu > demands)
    cap_cost = market.capacity_cost(scenario, profile.qos)
    out = io.StringIO()
    out.write(f"# measure={scenario.measure.mode}\n")
    out.write(f"# kappa={fmt(scenario.kappa)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["provider", "demand", "capacity", "utilization", "capacity_cost", "response_time"])
    for k, p in enumerate(scenario.providers):
        writer.writerow([p.id, fmt(demands[k]), fmt(mu[k]), fmt(demands[k] / mu[k]), fmt(cap_cost[k]), fmt(np.atleast_1d(rt)[k])])
    _emit(args, out.getvalue())
    return EXIT_OK


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario file (JSON)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--tol", type=float, help="fixed-point tolerance override")
    common.add_argument("--max-iter", type=int, help="iteration cap override")
    common.add_argument("--phi", type=float, help="evaluate in phi-percentile mode")
    common.add_argument("--grid-price-step", type=float, help="verifier price grid step")
    common.add_argument("--grid-qos-step", type=float, help="verifier QoS grid step")
    common.add_argument("--strict", action="store_true", help="reject unknown fields in the scenario file")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cloudmarket", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()

    p = sub.add_parser("solve", parents=[common], help="compute an equilibrium")
    p.add_argument("--game", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--qos", help="fixed QoS vector for game 1 (default zeros)")
    p.add_argument("--prices", help="fixed price vector for game 3")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common], help="certify a profile by brute-force deviation scan")
    p.add_argument("--result", help="result table written by 'solve'")
    p.add_argument("--prices", help="inline price vector")
    p.add_argument("--qos", help="inline QoS vector (default zeros)")
    p.add_argument("--scan", choices=("price", "qos", "joint"),
                   help="deviation dimensions (default from the result's game)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sensitivity", parents=[common], help="comparative statics at the game 1 equilibrium")
    p.add_argument("--qos", help="QoS vector (default zeros)")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("sweep", parents=[common], help="re-solve along one parameter axis")
    p.add_argument("--game", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--axis", required=True, help="e.g. providers[0].cost_per_request, cross.beta[0][1], qos[1]")
    p.add_argument("--range", required=True, help="LO,HI")
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--qos", help="QoS vector for game 1 (default zeros)")
    p.add_argument("--prices", help="price vector for game 3")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("provision", parents=[common], help="capacity report for a solved profile")
    p.add_argument("--result", required=True, help="result table written by 'solve'")
    p.set_defaults(func=cmd_provision)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.showwarning = _show_warning
            return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioError as exc:
        for issue in exc.issues:
            print(f"validation error: {issue}", file=sys.stderr)
        return EXIT_VALIDATION
    except ProfileError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleEquilibrium as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except IncomparableEquilibria as exc:
        for label, cand in zip(("from-min", "from-max"), exc.candidates):
            print(f"candidate {label}: prices={','.join(map(fmt, cand.prices))}", file=sys.stderr)
        print(f"multiple equilibria: {exc}", file=sys.stderr)
        return EXIT_MULTIPLE
    except NonConvergence as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
