"""Command-line entry point.

Exit codes: 0 success, 1 verification or attainability failure, 2 bad
input or configuration, 3 runtime error. Data goes to standard output or
``--out`` files; diagnostics go to standard error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from ._util import dumps
from .config import ScenarioConfig, load_config
from .errors import BudgetExceeded, ConfigError, InvalidInput, WasstimeError
from .measures import DiscreteMeasure
from .mintime import greedy_descent
from .scenarios import SCENARIOS, scenario_record
from .trajectories import continuity_residual, filippov_track, integrate, moment_audit, trajectory_from_csv
from .transport import wp_distance
from .verify import SUITES, report_json, report_table, run_suite


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit(text: str, out: str | None) -> None:
    if out:
        _write(out, text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_measure(path: str) -> DiscreteMeasure:
    try:
        return DiscreteMeasure.from_json(_read(path))
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _steps(cfg: ScenarioConfig) -> tuple[float, float]:
    K = max(1, int(round(cfg.T_max / cfg.h)))
    return K * cfg.h, cfg.h


def cmd_distance(args) -> int:
    mu, nu = _load_measure(args.a), _load_measure(args.b)
    if mu.dim != nu.dim:
        raise ConfigError(f"{args.b}: dimension {nu.dim} differs from {args.a} ({mu.dim})")
    w, plan = wp_distance(mu, nu, args.p)
    if args.plan:
        _write(args.plan, plan.to_json() + "\n")
    _emit(dumps({"wp": w}), args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.scenario)
    T, h = _steps(cfg)
    traj = integrate(cfg.dynamics, cfg.measure, cfg.policy, T, h)
    if args.out:
        _write(args.out, traj.to_csv())
    stride = max(1, traj.n_steps // 50)
    summary = traj.summary(cfg.p, stride=stride)
    summary["moment_audit"] = moment_audit(traj, cfg.p, seed=cfg.seed)
    summary["continuity_residual"] = continuity_residual(
        traj, lambda X: 0.5 * np.einsum("ij,ij->i", X, X), lambda X: X, stride=stride)
    _emit(dumps(summary), args.summary)
    return 0


def cmd_track(args) -> int:
    cfg = load_config(args.scenario)
    try:
        ref = trajectory_from_csv(_read(args.ref), cfg.dynamics)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{args.ref}: {exc}") from None
    muB = _load_measure(args.target_measure)
    trajB, report = filippov_track(ref, muB, cfg.p)
    if args.traj_out:
        _write(args.traj_out, trajB.to_csv())
    _emit(report.to_json(), args.out)
    return 0 if report.satisfied else 1


def cmd_mintime(args) -> int:
    cfg = load_config(args.scenario)
    if cfg.profile is None:
        raise ConfigError("profile: missing required key (mintime needs an attainability profile)")
    try:
        report, _ = greedy_descent(cfg.dynamics, cfg.target, cfg.profile, cfg.measure, cfg.h, cfg.max_iters)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            _emit(exc.report.to_json(), args.out)
        return 3
    if args.csv:
        _write(args.csv, report.to_csv(cfg.profile))
    _emit(report.to_json(), args.out)
    if not report.hit:
        print(f"attainability certificate failed: {report.failure}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    report = run_suite(args.suite, args.seed)
    if args.out:
        _write(args.out, report_json(report) + "\n")
    if args.format == "json":
        sys.stdout.write(report_json(report) + "\n")
    else:
        sys.stdout.write(report_table(report) + "\n")
        sys.stdout.write(("all checks passed" if report["passed"] else "some checks FAILED") + "\n")
    return 0 if report["passed"] else 1


def cmd_scenario(args) -> int:
    if args.action == "list":
        for name, (desc, _) in SCENARIOS.items():
            sys.stdout.write(f"{name}: {desc}\n")
        return 0
    if not args.name:
        raise ConfigError("scenario show: missing scenario name")
    try:
        record = scenario_record(args.name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    _emit(dumps(record), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wasstime", description="Particle toolkit for controlled continuity equations.")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker count (results do not depend on it; the current kernels run on one thread)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="exact W_p between two measure files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--plan", help="write the optimal plan as JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("simulate", help="integrate a scenario and audit the trajectory")
    p.add_argument("scenario")
    p.add_argument("--out", help="trajectory CSV")
    p.add_argument("--summary", help="write the JSON summary here instead of standard output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="follow a reference trajectory from another initial measure")
    p.add_argument("scenario")
    p.add_argument("--ref", required=True, help="reference trajectory CSV")
    p.add_argument("--target-measure", required=True, help="initial measure JSON of the tracking trajectory")
    p.add_argument("--traj-out", help="tracking trajectory CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("mintime", help="greedy descent toward the target with the time bound")
    p.add_argument("scenario")
    p.add_argument("--csv", help="per-step CSV (step, sigma, t, elapsed, bound_remaining)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mintime)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scenario", help="built-in scenarios")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (WasstimeError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
