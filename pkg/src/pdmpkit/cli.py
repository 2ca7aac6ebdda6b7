"""Command-line front end.

Subcommands: gauss-experiment, gen-data, fit-mode, run, verify-invariance,
traceplot, dump-theta-table.  Exit codes: 0 success, 1 numerical or
validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import ExperimentConfig, load_config
from .errors import PdmpError
from .experiments import (
    DEFAULT_THRESHOLDS,
    TRANSITION_KINDS,
    run_dump_theta_table,
    run_fit_mode,
    run_gauss_experiment,
    run_gen_data,
    run_logit_chain,
    run_verify_invariance,
)
from .plots import render_traceplot

_CONFIG_FLAGS = {
    "p": "p",
    "budget": "budget",
    "c": "rate_bound_coeff",
    "rho": "refresh_intensity",
    "transition": "transition",
    "prior_variance": "prior_variance",
    "batch_size": "batch_size",
    "sgd_steps": "sgd_steps",
    "seed": "seed",
    "out": "out_dir",
    "data_file": "data_path",
}


def _base_config(args, experiment: str) -> ExperimentConfig:
    """defaults < paper-scale block < config file < explicit CLI flags."""
    cfg = ExperimentConfig(experiment=experiment)
    if experiment == "logit":
        # desk-scale defaults; the bound and refresh rate are recalibrated
        # for N=1e4 gradients (the paper-scale values assume N=1e6)
        cfg.rate_bound_coeff = 500.0
        cfg.refresh_intensity = 0.5
        cfg.p = 20
        cfg.budget = 1000
        cfg.sgd_steps = 1000
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
        cfg.experiment = experiment
    if getattr(args, "paper_scale", False):
        cfg.paper_scale = True
    if cfg.paper_scale and experiment == "logit":
        cfg.rate_bound_coeff = 5000.0
        cfg.refresh_intensity = 10.0
        cfg.p = 100
        cfg.budget = 100_000
        cfg.sgd_steps = 100_000
        cfg.batch_size = 10
    for flag, field in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, field, value)
    if getattr(args, "plot", False):
        cfg.plot = True
    return cfg


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--seed", type=int, default=None, help="random seed (64-bit)")
    sub.add_argument("--out", type=str, default=None, help="output directory")
    sub.add_argument("--config", type=str, default=None, help="key=value config file")


def _logit_paths(cfg: ExperimentConfig, args):
    data_file = getattr(args, "data_file", None) or cfg.data_path or os.path.join(
        cfg.out_dir, "logit", "dataset.csv"
    )
    mode_file = getattr(args, "mode_file", None) or os.path.join(cfg.out_dir, "logit", "mode.csv")
    return data_file, mode_file


def _cmd_gauss(args) -> int:
    cfg = _base_config(args, "gauss").validate()
    dirs = run_gauss_experiment(cfg, parallel_chains=args.parallel_chains)
    for d in dirs:
        print(d)
    return 0


def _cmd_gen_data(args) -> int:
    cfg = _base_config(args, "logit")
    n = args.n if args.n is not None else (1_000_000 if cfg.paper_scale else 10_000)
    p = args.p if args.p is not None else (100 if cfg.paper_scale else cfg.p)
    data_file = getattr(args, "data_file", None) or os.path.join(cfg.out_dir, "logit", "dataset.csv")
    run_gen_data(n, p, cfg.seed, data_file)
    print(data_file)
    return 0


def _cmd_fit_mode(args) -> int:
    cfg = _base_config(args, "logit")
    data_file, mode_file = _logit_paths(cfg, args)
    info = run_fit_mode(data_file, cfg.prior_variance, cfg.sgd_steps, cfg.batch_size, cfg.seed, mode_file)
    print(mode_file)
    for key, value in info.items():
        print(f"{key}={value}")
    return 0


def _cmd_run(args) -> int:
    cfg = _base_config(args, "logit").validate()
    data_file, mode_file = _logit_paths(cfg, args)
    seeds = [cfg.seed] if not args.seeds else [int(s) for s in args.seeds.split(",")]
    jobs = []
    for s in seeds:
        label = cfg.transition if len(seeds) == 1 else os.path.join(cfg.transition, f"seed-{s}")
        jobs.append(
            (
                data_file,
                mode_file,
                cfg.transition,
                cfg.prior_variance,
                cfg.rate_bound_coeff,
                cfg.refresh_intensity,
                cfg.budget,
                cfg.batch_size,
                s,
                cfg.out_dir,
                cfg.plot,
                (0,),
                label,
            )
        )
    if args.parallel_chains > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel_chains) as pool:
            results = list(pool.map(_run_logit_star, jobs))
    else:
        results = [_run_logit_star(job) for job in jobs]
    for _, _, chain_dir in results:
        print(chain_dir)
    return 0


def _run_logit_star(job):
    return run_logit_chain(*job)


def _cmd_verify(args) -> int:
    cfg = _base_config(args, "custom")
    out_path = args.report_out or os.path.join(
        cfg.out_dir, "invariance", f"{args.transition_name}-p{args.p}.txt"
    )
    report, ok = run_verify_invariance(
        args.transition_name,
        args.p,
        fd_step=args.fd_step,
        threshold=args.threshold,
        out_path=out_path,
        points_csv=args.points_csv,
    )
    print(f"max_abs_residual={report.max_abs_residual!r}")
    print(f"report={out_path}")
    return 0 if ok else 1


def _cmd_traceplot(args) -> int:
    out = args.svg_out or (os.path.splitext(args.trace_csv)[0] + ".svg")
    render_traceplot(args.trace_csv, out, title=args.title)
    print(out)
    return 0


def _cmd_dump_table(args) -> int:
    cfg = _base_config(args, "custom")
    out_path = args.table_file or os.path.join(
        cfg.out_dir, f"theta-table-p{args.p}-{args.mode}.csv"
    )
    run_dump_theta_table(args.p, args.mode, args.grid_size, out_path)
    print(out_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdmpkit",
        description="Event-driven piecewise linear PDMP samplers with exact thinning",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("gauss-experiment", help="hyperspherical vs BPS on N(0, I)")
    _add_common(sub)
    sub.add_argument("--p", type=int, default=None)
    sub.add_argument("--budget", type=int, default=None)
    sub.add_argument("--c", type=float, default=None, help="rate bound coefficient")
    sub.add_argument("--rho", type=float, default=None, help="refresh intensity")
    sub.add_argument("--transition", choices=TRANSITION_KINDS, default=None)
    sub.add_argument("--plot", action="store_true")
    sub.add_argument("--parallel-chains", type=int, default=1)
    sub.set_defaults(handler=_cmd_gauss)

    sub = subs.add_parser("gen-data", help="generate synthetic logistic data")
    _add_common(sub)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--p", type=int, default=None)
    sub.add_argument("--data-file", type=str, default=None)
    sub.add_argument("--paper-scale", action="store_true")
    sub.set_defaults(handler=_cmd_gen_data)

    sub = subs.add_parser("fit-mode", help="estimate the posterior mode by SGD")
    _add_common(sub)
    sub.add_argument("--data-file", type=str, default=None)
    sub.add_argument("--mode-file", type=str, default=None)
    sub.add_argument("--prior-variance", dest="prior_variance", type=float, default=None)
    sub.add_argument("--sgd-steps", dest="sgd_steps", type=int, default=None)
    sub.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    sub.add_argument("--paper-scale", action="store_true")
    sub.set_defaults(handler=_cmd_fit_mode)

    sub = subs.add_parser("run", help="budgeted sampling on the logistic posterior")
    _add_common(sub)
    sub.add_argument("--data-file", type=str, default=None)
    sub.add_argument("--mode-file", type=str, default=None)
    sub.add_argument("--transition", choices=TRANSITION_KINDS, default=None)
    sub.add_argument("--prior-variance", dest="prior_variance", type=float, default=None)
    sub.add_argument("--c", type=float, default=None)
    sub.add_argument("--rho", type=float, default=None)
    sub.add_argument("--budget", type=int, default=None)
    sub.add_argument("--batch-size", dest="batch_size", type=int, default=None,
                     help="rows per stochastic gradient; 0 = exact full gradient")
    sub.add_argument("--seeds", type=str, default=None, help="comma list for multiple chains")
    sub.add_argument("--parallel-chains", type=int, default=1)
    sub.add_argument("--plot", action="store_true")
    sub.add_argument("--paper-scale", action="store_true")
    sub.set_defaults(handler=_cmd_run)

    sub = subs.add_parser("verify-invariance", help="stationarity residual check")
    _add_common(sub)
    sub.add_argument("transition_name", choices=TRANSITION_KINDS)
    sub.add_argument("--p", type=int, default=10)
    sub.add_argument("--fd-step", dest="fd_step", type=float, default=1e-5)
    sub.add_argument("--threshold", type=float, default=None,
                     help=f"pass threshold (defaults: {DEFAULT_THRESHOLDS})")
    sub.add_argument("--report-out", type=str, default=None)
    sub.add_argument("--points-csv", type=str, default=None)
    sub.set_defaults(handler=_cmd_verify)

    sub = subs.add_parser("traceplot", help="render a trace CSV as SVG")
    _add_common(sub)
    sub.add_argument("trace_csv", type=str)
    sub.add_argument("--svg-out", type=str, default=None)
    sub.add_argument("--title", type=str, default="")
    sub.set_defaults(handler=_cmd_traceplot)

    sub = subs.add_parser("dump-theta-table", help="tabulate the transition angle curve")
    _add_common(sub)
    sub.add_argument("--p", type=int, default=100)
    sub.add_argument("--mode", choices=("exact", "asym"), default="exact")
    sub.add_argument("--grid-size", dest="grid_size", type=int, default=1024)
    sub.add_argument("--table-file", type=str, default=None)
    sub.set_defaults(handler=_cmd_dump_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except PdmpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
