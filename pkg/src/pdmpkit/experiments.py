"""Experiment pipelines behind the CLI subcommands.

Output layout: ``<out>/<experiment>/<sampler>/{trajectory.csv, trace.csv,
ledger.txt, trace.svg}``; every artifact is byte-deterministic given the
configuration and seed.
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ExperimentConfig
from .core import RandomSource, write_trajectory_csv
from .diagnostics import discretize, fp_report_text, fp_residual, write_fp_residual_csv, write_trace_csv
from .engine import RunLedger, SimulationConfig, ledger_text, run
from .errors import ConfigError, DataError
from .plots import render_traceplot
from .targets import (
    IsoGaussianTarget,
    LogisticPosterior,
    gen_synthetic,
    grad_log_posterior_full,
    load_dataset_csv,
    load_mode_csv,
    save_dataset_csv,
    save_mode_csv,
    sgd_fit,
)
from .transitions import (
    BpsReflection,
    HypersphericalTransition,
    MapMode,
    PureReflection,
    build_theta_table,
    write_theta_table_csv,
)

__all__ = [
    "make_transition",
    "run_gauss_experiment",
    "run_gen_data",
    "run_fit_mode",
    "run_logit_chain",
    "run_verify_invariance",
    "run_dump_theta_table",
    "normalized_grid",
    "DEFAULT_THRESHOLDS",
]

TRANSITION_KINDS = ("pure", "bps", "hyperspherical-exact", "hyperspherical-asym")

DEFAULT_THRESHOLDS = {
    "pure": 1e-6,
    "bps": 1e-6,
    "hyperspherical-exact": 1e-3,
    "hyperspherical-asym": 0.5,
}


@functools.lru_cache(maxsize=8)
def _cached_map(p: int, mode_value: str, grid_size: int):
    return build_theta_table(p, MapMode(mode_value), grid_size=grid_size)


def make_transition(kind: str, p: int, grid_size: int = 1024):
    """Instantiate a transition by CLI name, building maps as needed."""
    if kind == "pure":
        return PureReflection()
    if kind == "bps":
        return BpsReflection()
    if kind == "hyperspherical-exact":
        return HypersphericalTransition(_cached_map(p, MapMode.EXACT_QUADRATURE.value, grid_size))
    if kind == "hyperspherical-asym":
        return HypersphericalTransition(_cached_map(p, MapMode.ASYMPTOTIC.value, grid_size))
    raise ConfigError(f"unknown transition {kind!r}")


def _write_chain_outputs(out_dir, traj, ledger: RunLedger, record_coords, plot: bool, title: str):
    os.makedirs(out_dir, exist_ok=True)
    write_trajectory_csv(traj, os.path.join(out_dir, "trajectory.csv"), coords=record_coords)
    n_rows = 2000
    dt = traj.duration / n_rows if traj.duration > 0 else 1.0
    ts, vals = discretize(traj, dt, coords=record_coords)
    write_trace_csv(os.path.join(out_dir, "trace.csv"), ts, vals, coords=record_coords)
    with open(os.path.join(out_dir, "ledger.txt"), "w", newline="") as fh:
        fh.write(ledger_text(ledger, total_time=traj.duration))
    if plot:
        render_traceplot(
            os.path.join(out_dir, "trace.csv"),
            os.path.join(out_dir, "trace.svg"),
            title=title,
        )


def _gauss_chain(kind: str, cfg_tuple) -> str:
    """One Gaussian chain; module-level so process pools can pick it up."""
    (p, c, rho, budget, seed, out_dir, plot) = cfg_tuple
    transition = make_transition(kind, p)
    target = IsoGaussianTarget(p)
    rng = RandomSource(seed)
    sim = SimulationConfig(
        transition=transition,
        rate_bound_coeff=c,
        refresh_intensity=rho,
        budget=budget,
        x0=np.full(p, 10.0),
        seed=seed,
    )
    traj, ledger = run(sim, target, rng)
    chain_dir = os.path.join(out_dir, "gauss", kind)
    _write_chain_outputs(chain_dir, traj, ledger, (0,), plot, title=f"{kind} (p={p})")
    return chain_dir


def run_gauss_experiment(cfg: ExperimentConfig, parallel_chains: int = 1) -> list[str]:
    """Hyperspherical and bouncy-particle chains on N(0, I) from x0 = (10,..,10),
    identical seeds, artifacts under <out>/gauss/<sampler>/."""
    cfg.validate()
    hyper_kind = (
        cfg.transition if cfg.transition.startswith("hyperspherical") else "hyperspherical-exact"
    )
    kinds = [hyper_kind, "bps"]
    args = (cfg.p, cfg.rate_bound_coeff, cfg.refresh_intensity, cfg.budget, cfg.seed, cfg.out_dir, cfg.plot)
    if parallel_chains > 1:
        with ProcessPoolExecutor(max_workers=min(parallel_chains, len(kinds))) as pool:
            return list(pool.map(_gauss_chain, kinds, [args] * len(kinds)))
    return [_gauss_chain(kind, args) for kind in kinds]


def run_gen_data(n: int, p: int, seed: int, out_path) -> None:
    data = gen_synthetic(n, p, seed)
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_dataset_csv(data, out_path)


def run_fit_mode(
    data_path, prior_variance: float, steps: int, batch_size: int, seed: int, out_path
) -> dict:
    """Stage two of the pipeline: mode estimate plus its full gradient."""
    if not os.path.exists(data_path):
        raise ConfigError(f"missing dataset (run gen-data first): {data_path}")
    data = load_dataset_csv(data_path)
    beta_hat = sgd_fit(data, prior_variance, steps, batch_size, seed)
    post = LogisticPosterior(data, prior_variance)
    g_ref = grad_log_posterior_full(post, beta_hat)
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_mode_csv(beta_hat, g_ref, out_path)
    return {
        "sgd_data_touches": steps * batch_size,
        "precompute_data_touches": data.n,
        "grad_norm_at_mode": float(np.linalg.norm(g_ref)),
    }


def run_logit_chain(
    data_path,
    mode_path,
    transition_kind: str,
    prior_variance: float,
    c: float,
    rho: float,
    budget: int,
    batch_size: int,
    seed: int,
    out_dir,
    plot: bool = False,
    record_coords=(0,),
    label: str | None = None,
):
    """Stage three: budgeted sampling on the logistic posterior from beta_hat.

    ``batch_size`` of zero requests exact full-data gradients (used for
    reference runs); otherwise each oracle call draws that many rows with
    replacement and applies the control-variate estimator.
    """
    if not os.path.exists(data_path):
        raise ConfigError(f"missing dataset (run gen-data first): {data_path}")
    if not os.path.exists(mode_path):
        raise ConfigError(f"missing mode file (run fit-mode first): {mode_path}")
    data = load_dataset_csv(data_path)
    beta_hat, g_ref = load_mode_csv(mode_path)
    if beta_hat.size != data.p:
        raise DataError(
            f"mode file dimension {beta_hat.size} does not match data dimension {data.p}"
        )
    if batch_size == 0:
        target = LogisticPosterior(data, prior_variance)
    else:
        target = LogisticPosterior(
            data,
            prior_variance,
            beta_hat=beta_hat,
            g_ref=g_ref,
            batch_size=batch_size,
            rng=RandomSource.child(seed, 7),
        )
    transition = make_transition(transition_kind, data.p)
    sim = SimulationConfig(
        transition=transition,
        rate_bound_coeff=c,
        refresh_intensity=rho,
        budget=budget,
        x0=beta_hat,
        seed=seed,
    )
    rng = RandomSource(seed)
    traj, ledger = run(sim, target, rng)
    chain_dir = os.path.join(out_dir, "logit", label or transition_kind)
    _write_chain_outputs(
        chain_dir, traj, ledger, record_coords, plot, title=f"{transition_kind} (logit)"
    )
    return traj, ledger, chain_dir


def normalized_grid(
    p: int,
    z_window: tuple[float, float] = (-3.0, 3.0),
    w_window: tuple[float, float] = (0.4, 2.2),
    n_r: int = 20,
    n_theta: int = 20,
):
    """Residual grid recentred on the states the process actually visits.

    Speeds concentrate at sqrt(p) + O(1) and incidence angles at
    pi/2 - O(1/sqrt(p)); fixing windows in those variables makes residual
    magnitudes comparable across dimensions.
    """
    z = np.linspace(z_window[0], z_window[1], n_r)
    r = math.sqrt(p) + z / math.sqrt(2.0)
    if np.any(r <= 0):
        raise ConfigError("normalized window reaches nonpositive speeds; shrink z_window")
    w = np.linspace(w_window[0], w_window[1], n_theta)
    theta = np.sort(math.pi / 2 - w / math.sqrt(p - 2))
    return r, theta


def run_verify_invariance(
    kind: str,
    p: int,
    fd_step: float = 1e-5,
    threshold: float | None = None,
    out_path=None,
    points_csv=None,
):
    """Evaluate the stationarity residual for one transition at dimension p.

    Returns (report, passed).  Grids: a broad (r, theta) rectangle for the
    linear maps, the tabulated-map's bulk rectangle for exact quadrature,
    and the normalized window for the asymptotic map.
    """
    if kind not in TRANSITION_KINDS:
        raise ConfigError(f"unknown transition {kind!r}")
    if threshold is None:
        threshold = DEFAULT_THRESHOLDS[kind]
    if kind in ("pure", "bps"):
        r_values = np.linspace(0.2, 5.0, 50)
        theta_values = np.linspace(0.1, 3.0, 50)
    elif kind == "hyperspherical-exact":
        r_values = np.linspace(0.5, 4.0, 30)
        theta_values = np.linspace(0.2, 1.4, 30)
    else:
        r_values, theta_values = normalized_grid(p)
    transition = make_transition(kind, p)
    report = fp_residual(transition, p, r_values, theta_values, fd_step=fd_step)
    if out_path is not None:
        parent = os.path.dirname(out_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(out_path, "w", newline="") as fh:
            fh.write(fp_report_text(report))
            fh.write(f"threshold={threshold!r}\n")
            fh.write(f"passed={str(report.max_abs_residual <= threshold).lower()}\n")
    if points_csv is not None:
        write_fp_residual_csv(report, points_csv)
    return report, report.max_abs_residual <= threshold


def run_dump_theta_table(p: int, mode: str, grid_size: int, out_path) -> None:
    mode_map = {"exact": MapMode.EXACT_QUADRATURE, "asym": MapMode.ASYMPTOTIC}
    if mode not in mode_map:
        raise ConfigError(f"unknown table mode {mode!r} (use exact or asym)")
    hmap = build_theta_table(p, mode_map[mode], grid_size=grid_size)
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    write_theta_table_csv(hmap, out_path)
