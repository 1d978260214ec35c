"""Command line: ``krigopt {fit,predict,simulate,optimize,bench}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .datafiles import (model_summary, parse_model_summary, parse_points_csv, read_dataset_csv,
                        summary_domain)
from .design import Domain
from .harness import run_benchmark
from .kriging import FitConfig, fit
from .optimizer import OptimizerConfig, run
from .simulators import InventoryParams, get_problem, simulate_inventory, substream


def _domain_from_args(args, points: np.ndarray) -> Domain:
    lower = np.array([float(v) for v in args.lower.split(",")]) if args.lower else points.min(axis=0)
    upper = np.array([float(v) for v in args.upper.split(",")]) if args.upper else points.max(axis=0)
    flat = upper <= lower
    lower = np.where(flat, lower - 0.5, lower)
    upper = np.where(flat, upper + 0.5, upper)
    return Domain(tuple(lower), tuple(upper))


def cmd_fit(args) -> int:
    data = read_dataset_csv(args.data)
    domain = _domain_from_args(args, data.points)
    model = fit(data, args.kernel, FitConfig(seed=args.seed), args.mode, domain)
    text = model_summary(model, str(Path(args.data).resolve()))
    _emit(text, args.out)
    return 0


def cmd_predict(args) -> int:
    summary = parse_model_summary(Path(args.model).read_text())
    data = read_dataset_csv(args.data or summary["data"])
    domain = summary_domain(summary)
    params = (float(summary["process_variance"]), float(summary["length_scale"]))
    model = fit(data, summary["kernel"], FitConfig(fixed_params=params), summary["noise_mode"], domain)
    queries = parse_points_csv(Path(args.query).read_text())
    mean, mse = model.predict_many(queries)
    lines = ["mean,mse"] + [f"{m!r},{v!r}" for m, v in zip(mean.tolist(), mse.tolist())]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    params = cfgmod.inventory_params(cfgmod.read_flat(args.config)) if args.config else InventoryParams()
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["rep", "s", "S", "total_cost", "avg_monthly_total_cost", "ordering", "holding", "backlog"])
        for r in range(args.reps):
            res = simulate_inventory(args.s, args.S, params, substream(args.seed, r))
            w.writerow([r, args.s, args.S, repr(res.total_cost), repr(res.avg_monthly_total_cost),
                        repr(res.ordering), repr(res.holding), repr(res.backlog)])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_optimize(args) -> int:
    overrides = cfgmod.inventory_overrides(cfgmod.read_flat(args.config)) if args.config else {}
    problem = get_problem(args.problem, **overrides)
    config = OptimizerConfig(algorithm=args.algorithm, kernel=args.kernel, acquisition=args.acquisition,
                             kappa=args.kappa, n_initial=args.n_initial, n_infill=args.n_infill,
                             reps_per_point=args.reps, master_seed=args.seed, macrorep=args.macrorep)
    history = run(config, problem)
    _emit(history.to_csv(include_timing=True), args.out)
    point, value = history.best
    print(f"best {tuple(point.tolist())} sample mean {value:.6g}", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    values = cfgmod.read_flat(args.config) if args.config else {}
    bench = cfgmod.benchmark_config(values, master_seed=args.master_seed, workers=args.workers)
    result = run_benchmark(bench, out_dir=args.out)
    print(f"{len(result.histories)} cells ok, {len(result.failures)} failed; outputs in {args.out}",
          file=sys.stderr)
    return 0 if not result.failures else 1


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="krigopt", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a kriging model to a dataset CSV")
    f.add_argument("--data", required=True)
    f.add_argument("--kernel", default="se", choices=["se", "matern32", "matern52"])
    f.add_argument("--mode", default="deterministic", choices=["deterministic", "stochastic"])
    f.add_argument("--lower", help="comma-separated lower bounds (default: data minimum)")
    f.add_argument("--upper", help="comma-separated upper bounds (default: data maximum)")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="predict mean/mse at query points with a fitted model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--query", required=True)
    pr.add_argument("--data", help="dataset CSV (default: the path recorded in the model file)")
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_predict)

    s = sub.add_parser("simulate", help="replicate the (s, S) inventory simulation")
    s.add_argument("--s", type=int, required=True)
    s.add_argument("--S", type=int, required=True)
    s.add_argument("--reps", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("optimize", help="run one optimization and write its history CSV")
    o.add_argument("--algorithm", default="sk_mei")
    o.add_argument("--problem", default="inventory")
    o.add_argument("--kernel", default="se", choices=["se", "matern32", "matern52"])
    o.add_argument("--acquisition", choices=["pi", "ei", "mei", "aei", "lcb"])
    o.add_argument("--kappa", type=float, default=2.0)
    o.add_argument("--n-initial", type=int, default=10)
    o.add_argument("--n-infill", type=int, default=100)
    o.add_argument("--reps", type=int, default=5)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--macrorep", type=int, default=0)
    o.add_argument("--config")
    o.add_argument("--out")
    o.set_defaults(func=cmd_optimize)

    b = sub.add_parser("bench", help="run the macroreplication benchmark")
    b.add_argument("--config")
    b.add_argument("--out", required=True)
    b.add_argument("--workers", type=int)
    b.add_argument("--master-seed", type=int)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
