"""Benchmark campaigns: seeded episode batteries with summary statistics.

A campaign runs ``runs`` independent episodes of one problem with seeds
``base_seed + i``, optionally across worker processes, and writes one
self-describing JSON record per line: a config header, one record per run
(in run-index order), and a closing summary with means and 95% confidence
intervals.  A human-readable table goes to stdout.

Environment overrides: ``VECPOMDP_OUT`` (output path) and
``VECPOMDP_WORKERS`` (worker process count).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from .envs import problem_from_config
from .solver import RunRecord, SolverConfig, run_episode

_DEFAULT_N_PARALLEL = {
    "navigation": 50_000,
    "mars": 60_000,
    "crowdnav": 8_192,
    "tiger": 1_024,
}


@dataclass
class CampaignConfig:
    problem: str
    problem_params: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(planning_seconds=1.0))
    runs: int = 1
    base_seed: int = 0
    out_path: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        # fail fast on bad problem names / parameters
        build_model(self.problem, self.problem_params, self.base_seed)

    def to_dict(self) -> dict:
        return {
            "type": "config",
            "problem": self.problem,
            "problem_params": self.problem_params,
            "solver": dataclasses.asdict(self.solver),
            "runs": self.runs,
            "base_seed": self.base_seed,
        }


def build_model(problem: str, params: dict, seed: int):
    """Instantiate the problem for one run.

    MARS draws a fresh rock layout per run unless the config pins one.
    """
    params = dict(params)
    if problem == "mars" and "layout_seed" not in params:
        params["layout_seed"] = seed
    return problem_from_config(problem, params)


def _record_to_dict(record: RunRecord) -> dict:
    out = dataclasses.asdict(record)
    out["type"] = "run"
    return out


def _run_one(args) -> dict:
    config_dict, index = args
    seed = config_dict["base_seed"] + index
    model = build_model(
        config_dict["problem"], config_dict["problem_params"], seed
    )
    solver = SolverConfig(**config_dict["solver"])
    record = run_episode(model, solver, seed=seed, run_index=index)
    return _record_to_dict(record)


def summarize(records: list[dict]) -> dict:
    """Mean, sample std and normal-approximation 95% CI per metric."""
    if not records:
        raise ValueError("summarize requires at least one record")
    metrics: dict[str, list[float]] = {
        "discounted_return": [],
        "steps": [],
        "plan_seconds": [],
    }
    counter_keys = sorted({k for r in records for k in r["counters"]})
    for key in counter_keys:
        metrics[key] = []
    terminal = 0
    for r in records:
        metrics["discounted_return"].append(float(r["discounted_return"]))
        metrics["steps"].append(float(r["steps"]))
        times = r["plan_wall_times"]
        metrics["plan_seconds"].append(float(np.mean(times)) if times else 0.0)
        for key in counter_keys:
            metrics[key].append(float(r["counters"].get(key, 0.0)))
        terminal += r["terminal_reason"] == "terminal"
    out: dict = {"type": "summary", "n": len(records), "terminal_runs": terminal}
    stats = {}
    for key, vals in metrics.items():
        arr = np.asarray(vals)
        n = len(arr)
        std = float(arr.std(ddof=1)) if n > 1 else 0.0
        stats[key] = {
            "mean": float(arr.mean()),
            "std": std,
            "ci95": 1.96 * std / np.sqrt(n) if n > 1 else 0.0,
        }
    out["metrics"] = stats
    return out


def run_campaign(config: CampaignConfig):
    """Execute all runs; returns (run record dicts, summary dict)."""
    config_dict = config.to_dict()
    jobs = [(config_dict, i) for i in range(config.runs)]
    if config.workers > 1 and config.runs > 1:
        with get_context("spawn").Pool(min(config.workers, config.runs)) as pool:
            records = pool.map(_run_one, jobs)
    else:
        records = [_run_one(job) for job in jobs]
    records.sort(key=lambda r: r["run_index"])
    summary = summarize(records)
    if config.out_path:
        with open(config.out_path, "w") as fh:
            fh.write(json.dumps(config_dict) + "\n")
            for record in records:
                fh.write(json.dumps(record) + "\n")
            fh.write(json.dumps(summary) + "\n")
    return records, summary


def format_summary(summary: dict) -> str:
    lines = [
        f"{'metric':<20} {'mean':>12} {'std':>12} {'ci95':>12}",
        "-" * 58,
    ]
    for key, st in summary["metrics"].items():
        lines.append(
            f"{key:<20} {st['mean']:>12.3f} {st['std']:>12.3f} {st['ci95']:>12.3f}"
        )
    lines.append(
        f"terminal runs: {summary['terminal_runs']}/{summary['n']}"
    )
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecpomdp-bench",
        description="Run a seeded benchmark campaign and report summary statistics.",
    )
    parser.add_argument(
        "--problem", required=True, choices=["navigation", "mars", "crowdnav", "tiger"]
    )
    parser.add_argument("--n", type=int, default=20, help="MARS grid size")
    parser.add_argument("--m", type=int, default=20, help="MARS rock count")
    parser.add_argument("--p-curious", type=float, default=0.5, help="CrowdNav trait prior")
    parser.add_argument("--planning-time", type=float, default=None,
                        help="seconds per planning step (wall-clock budget)")
    parser.add_argument("--iterations", type=int, default=None,
                        help="fixed iteration budget per planning step")
    parser.add_argument("--n-parallel", type=int, default=None,
                        help="parallel episodes per search batch")
    parser.add_argument("--eta", type=float, default=2.0)
    parser.add_argument("--runs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--particles", type=int, default=10_000)
    parser.add_argument("--d-max-cap", type=int, default=90)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", type=str, default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> CampaignConfig:
    problem_params: dict = {}
    if args.problem == "mars":
        problem_params = {"n": args.n, "m": args.m}
    elif args.problem == "crowdnav":
        problem_params = {"p_curious": args.p_curious}
    n_parallel = args.n_parallel or _DEFAULT_N_PARALLEL[args.problem]
    if args.planning_time is None and args.iterations is None:
        args.planning_time = 1.0
    solver = SolverConfig(
        eta=args.eta,
        n_parallel=n_parallel,
        planning_seconds=args.planning_time,
        iterations=args.iterations,
        d_max_cap=args.d_max_cap,
        seed=args.seed,
        particles=args.particles,
    )
    out_path = os.environ.get("VECPOMDP_OUT", args.out)
    workers = int(os.environ.get("VECPOMDP_WORKERS", args.workers))
    return CampaignConfig(
        problem=args.problem,
        problem_params=problem_params,
        solver=solver,
        runs=args.runs,
        base_seed=args.seed,
        out_path=out_path,
        workers=workers,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    records, summary = run_campaign(config)
    print(format_summary(summary))
    if config.out_path:
        print(f"records written to {config.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
