"""Command-line interface.

    raid simulate <scenario> -o <dir> [--jobs N]
    raid verify <scenario> [--check all|oracle|excitation|growth]
    raid trace <scenario> --seed S -o <file>

Exit status: 0 on success, 1 when a check or the simulation fails, 2 on
usage, input or I/O errors. ``RAID_LOG`` sets the log level (e.g. ``DEBUG``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .checks import CHECKS, run_checks
from .estimator import EstimatorFault
from .experiments import AggregateSeries, MonteCarloResult, fit_rate, run_monte_carlo
from .policy import simulate_agent
from .scenario import Scenario, ScenarioError, load_scenario

log = logging.getLogger("raid")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

AGGREGATE_COLUMNS = ["t", "agent", "mean_theta_err", "std_theta_err", "mean_avg_regret", "std_avg_regret"]
TRACE_COLUMNS = [
    "t", "agent", "phase", "p", "p_hat", "x", "interior", "tr_sigma", "lambda_min_info", "sq_track_err",
]


class UsageError(Exception):
    pass


def fmt(value: float) -> str:
    """17 significant digits: enough to round-trip any float64."""
    return format(float(value), ".17g")


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def aggregate_csv(agg: AggregateSeries) -> str:
    rows = []
    for k, label in enumerate(agg.labels):
        for g, t in enumerate(agg.t):
            rows.append([
                int(t), label,
                fmt(agg.mean_theta_err[k, g]), fmt(agg.std_theta_err[k, g]),
                fmt(agg.mean_avg_regret[k, g]), fmt(agg.std_avg_regret[k, g]),
            ])
    return _csv_text(AGGREGATE_COLUMNS, rows)


def rates(agg: AggregateSeries, window: tuple[float, float], gamma: float) -> dict:
    predicted = {"theta_err": -gamma / 2.0, "avg_regret": gamma - 1.0}
    series = {"theta_err": agg.mean_theta_err, "avg_regret": agg.mean_avg_regret}
    out: dict = {}
    for metric, values in series.items():
        fits = {}
        for k, label in enumerate(agg.labels):
            try:
                entry = fit_rate(agg.t, values[k], window).as_dict()
            except ValueError as exc:
                entry = {"error": str(exc), "window": list(window)}
            entry["predicted_slope"] = predicted[metric]
            fits[label] = entry
        out[metric] = fits
    return out


def seeds_csv(result: MonteCarloResult) -> str:
    rows = []
    for run in result.runs:
        for i in range(run.n_agents):
            rows.append([
                run.seed, i,
                fmt(run.theta_err[i, -1]), fmt(run.regret[i, -1] / run.grid[-1]),
                int(run.exploration_count[i, -1]), fmt(run.lambda_min_info[i, -1]),
            ])
    header = ["seed", "agent", "final_theta_err", "final_avg_regret", "exploration_count", "lambda_min_info"]
    return _csv_text(header, rows)


def manifest(scenario: Scenario, seeds: Sequence[int], command: str, files: Sequence[str]) -> dict:
    return {
        "tool": "raid",
        "version": __version__,
        "command": command,
        "scenario": scenario.to_dict(),
        "seeds": list(seeds),
        "files": list(files),
    }


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load(path: str) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"scenario not found: {path}")
    try:
        return load_scenario(p)
    except ScenarioError as exc:
        raise UsageError(f"invalid scenario {path}: {exc}") from None


def default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    seeds = scenario.run_seeds()
    log.info("simulating %d seeds x %d steps x %d agents", len(seeds), scenario.horizon, scenario.n)
    result = run_monte_carlo(scenario, seeds, jobs=args.jobs)
    files = {
        "aggregate.csv": aggregate_csv(result.aggregate),
        "rates.json": json.dumps(rates(result.aggregate, scenario.window(), scenario.schedule.gamma), indent=2) + "\n",
        "seeds.csv": seeds_csv(result),
    }
    files["manifest.json"] = json.dumps(manifest(scenario, seeds, "simulate", sorted(files)), indent=2) + "\n"
    try:
        for name, text in files.items():
            _write(out / name, text)
    except OSError as exc:
        raise UsageError(f"cannot write results to {out}: {exc}") from None
    print(f"wrote {', '.join(sorted(files))} to {out}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    results = run_checks(
        scenario, args.check, samples=args.samples, horizon=args.horizon, sigma2=args.sigma2, seed=args.seed
    )
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}")
        return EXIT_FAILED
    return EXIT_OK


def trace_csv(scenario: Scenario, seed: int) -> str:
    trajs = [
        simulate_agent(
            agent, scenario.x_des[i], scenario.schedule, scenario.horizon, seed, i,
            rho=scenario.rho, theta0=scenario.theta0_for(i),
        )
        for i, agent in enumerate(scenario.agents)
    ]
    header = TRACE_COLUMNS + [f"theta_hat_{k}" for k in range(scenario.d)]
    rows = []
    for s in range(scenario.horizon):
        for i, tr in enumerate(trajs):
            rows.append([
                s + 1, i, tr.phase(s).value, fmt(tr.p[s]), fmt(tr.p_hat[s]), fmt(tr.x[s]),
                int(tr.interior[s]), fmt(tr.tr_sigma[s]), fmt(tr.lambda_min_info[s]), fmt(tr.sq_track_err[s]),
                *(fmt(v) for v in tr.theta_hat[s]),
            ])
    return _csv_text(header, rows)


def cmd_trace(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    if args.horizon is not None:
        scenario = scenario.replace(horizon=args.horizon)
    text = trace_csv(scenario, args.seed)
    try:
        _write(Path(args.output), text)
    except OSError as exc:
        raise UsageError(f"cannot write trace to {args.output}: {exc}") from None
    print(f"wrote {scenario.horizon * scenario.n} rows to {args.output}")
    return EXIT_OK


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a non-negative 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="raid", description="Adaptive incentive design simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo runs with aggregated metrics and rate fits")
    sim.add_argument("scenario")
    sim.add_argument("-o", "--output", required=True, help="output directory")
    sim.add_argument("--jobs", type=_positive, default=default_jobs(), help="parallel seed workers")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="estimator oracle, excitation and information-growth checks")
    ver.add_argument("scenario")
    ver.add_argument("--check", choices=("all",) + CHECKS, default="all")
    ver.add_argument("--samples", type=_positive, default=1_000_000, help="probes for the excitation check")
    ver.add_argument("--horizon", type=_positive, default=100_000, help="steps for the growth check")
    ver.add_argument("--sigma2", type=float, default=None, help="override the probing variance (0 allowed)")
    ver.add_argument("--seed", type=_seed, default=None, help="run seed (default: the scenario's first)")
    ver.set_defaults(func=cmd_verify)

    tr = sub.add_parser("trace", help="full per-step record of a single run")
    tr.add_argument("scenario")
    tr.add_argument("--seed", type=_seed, required=True, help="run seed")
    tr.add_argument("-o", "--output", required=True, help="output CSV file")
    tr.add_argument("--horizon", type=_positive, default=None, help="override the scenario horizon")
    tr.set_defaults(func=cmd_trace)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("RAID_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "sigma2", None) is not None and not args.sigma2 >= 0:
        print("error: --sigma2 must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EstimatorFault, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
