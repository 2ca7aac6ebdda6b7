"""Numerical stationarity checks and path statistics.

The central tool evaluates the stationarity balance equation for a velocity
transition map on a grid of (speed, angle) states: for the product density
pi(x) pi(v) to be preserved, the jump flux into each state must cancel the
transport term, which reduces to

    lam(x, v) pi(v) - lam(x, Finv(v)) pi(Finv(v)) |d Finv / d v| = -v.g pi(v)

with lam(x, v) = max(0, -v.g).  Since all three maps act in the plane
spanned by v and the gradient and preserve the orthogonal complement, the
Jacobian factor is measured by finite differences of the plane-restricted
map, with the out-of-plane volume ratio applied analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Trajectory, interpolate
from .errors import ContractViolationError, DataError, InverseUndefinedError
from .transitions import (
    BpsReflection,
    HypersphericalTransition,
    PureReflection,
)

__all__ = [
    "FPResidualReport",
    "fp_residual",
    "fp_report_text",
    "write_fp_residual_csv",
    "path_moment",
    "discretize",
    "write_trace_csv",
    "ks_statistic",
    "ks_two_sample",
]


@dataclass
class FPResidualReport:
    """Grid summary of the stationarity residual for one transition map."""

    transition: str
    p: int
    r_values: np.ndarray
    theta_values: np.ndarray
    fd_step: float
    max_abs_residual: float
    mean_abs_residual: float
    worst_point: tuple[float, float]
    n_points: int
    n_flagged: int
    residuals: np.ndarray = field(repr=False)


def _plane_map(transition):
    """The transition's action in (along-gradient, perpendicular) coordinates.

    The input angle is measured from the gradient; grid states with a > 0
    sit on the inactive side, whose inverse image under the transition is
    the active state the map would have produced it from.
    """
    if isinstance(transition, PureReflection):
        return lambda a, b: (-a, -b)
    if isinstance(transition, BpsReflection):
        return lambda a, b: (-a, b)
    if isinstance(transition, HypersphericalTransition):
        hmap = transition.hmap

        def inverse_image(a, b):
            r = math.hypot(a, b)
            theta = math.atan2(b, a)
            r_w = hmap.r_prime(theta)
            theta_w = hmap.theta_prime(r)
            return -r_w * math.cos(theta_w), r_w * math.sin(theta_w)

        return inverse_image
    raise ContractViolationError(f"no plane map for transition {transition!r}")


def fp_residual(
    transition,
    p: int,
    r_values,
    theta_values,
    fd_step: float = 1e-5,
) -> FPResidualReport:
    """Relative stationarity residual over a product grid of (r, theta).

    States are built against a unit gradient direction (standard Gaussian
    target at a fiducial point), with theta the angle between v and the
    gradient.  The Jacobian determinant of the inverse map is measured by
    central finite differences of the plane-restricted map; points where
    the determinant degenerates numerically are flagged and excluded.
    """
    r_values = np.asarray(r_values, dtype=float)
    theta_values = np.asarray(theta_values, dtype=float)
    if np.any(r_values <= 0):
        raise ContractViolationError("grid speeds must be positive")
    if np.any((theta_values <= 0) | (theta_values >= math.pi)):
        raise ContractViolationError("grid angles must lie strictly inside (0, pi)")
    plane = _plane_map(transition)
    h = float(fd_step)

    residuals = np.full((r_values.size, theta_values.size), np.nan)
    n_flagged = 0
    worst = (float("nan"), float("nan"))
    worst_val = -1.0
    for i, r in enumerate(r_values):
        for j, theta in enumerate(theta_values):
            a = r * math.cos(theta)
            b = r * math.sin(theta)
            try:
                aw, bw = plane(a, b)
                da_a = plane(a + h, b)
                da_m = plane(a - h, b)
                db_a = plane(a, b + h)
                db_m = plane(a, b - h)
            except (ValueError, ContractViolationError, InverseUndefinedError):
                n_flagged += 1
                continue
            j11 = (da_a[0] - da_m[0]) / (2 * h)
            j21 = (da_a[1] - da_m[1]) / (2 * h)
            j12 = (db_a[0] - db_m[0]) / (2 * h)
            j22 = (db_a[1] - db_m[1]) / (2 * h)
            det2 = j11 * j22 - j12 * j21
            if not np.isfinite(det2) or det2 == 0.0 or b == 0.0:
                n_flagged += 1
                continue
            volume_ratio = (abs(bw) / b) ** (p - 2)
            jac = abs(det2) * volume_ratio
            pi_v = math.exp(-0.5 * r * r)
            pi_w = math.exp(-0.5 * (aw * aw + bw * bw))
            lam_v = max(0.0, -a)
            lam_w = max(0.0, -aw)
            lhs = lam_v * pi_v - lam_w * pi_w * jac
            rhs = -a * pi_v
            denom = max(abs(rhs), 1e-300)
            res = abs(lhs - rhs) / denom
            residuals[i, j] = res
            if res > worst_val:
                worst_val = res
                worst = (float(r), float(theta))

    finite = residuals[np.isfinite(residuals)]
    if finite.size == 0:
        raise ContractViolationError("all grid points were flagged; no residuals computed")
    return FPResidualReport(
        transition=getattr(transition, "name", type(transition).__name__),
        p=int(p),
        r_values=r_values,
        theta_values=theta_values,
        fd_step=h,
        max_abs_residual=float(np.max(finite)),
        mean_abs_residual=float(np.mean(finite)),
        worst_point=worst,
        n_points=int(r_values.size * theta_values.size),
        n_flagged=n_flagged,
        residuals=residuals,
    )


def fp_report_text(report: FPResidualReport) -> str:
    lines = [
        f"transition={report.transition}",
        f"p={report.p}",
        f"r_min={report.r_values.min()!r}",
        f"r_max={report.r_values.max()!r}",
        f"theta_min={report.theta_values.min()!r}",
        f"theta_max={report.theta_values.max()!r}",
        f"fd_step={report.fd_step!r}",
        f"n_points={report.n_points}",
        f"n_flagged={report.n_flagged}",
        f"max_abs_residual={report.max_abs_residual!r}",
        f"mean_abs_residual={report.mean_abs_residual!r}",
        f"worst_r={report.worst_point[0]!r}",
        f"worst_theta={report.worst_point[1]!r}",
    ]
    return "\n".join(lines) + "\n"


def write_fp_residual_csv(report: FPResidualReport, path) -> None:
    """Per-point residuals as ``r,theta,residual`` rows (flagged points skipped)."""
    lines = ["r,theta,residual"]
    for i, r in enumerate(report.r_values):
        for j, t in enumerate(report.theta_values):
            res = report.residuals[i, j]
            if np.isfinite(res):
                lines.append(f"{float(r)!r},{float(t)!r},{float(res)!r}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# -- path statistics ---------------------------------------------------------------

def _segment_arrays(traj: Trajectory, coord: int):
    times = traj._times
    if len(traj.events) == 0:
        raise ContractViolationError("trajectory has no events; zero total time")
    seg_t0 = times[:-1]
    seg_t1 = times[1:]
    seg_x = np.concatenate([[traj.start.x[coord]], traj.x_at_event[:-1, coord]])
    seg_v = np.array([traj.start.v[coord]] + [e.v_after[coord] for e in traj.events[:-1]])
    return seg_t0, seg_t1, seg_x, seg_v


def path_moment(traj: Trajectory, coord: int, power: int, t_min: float | None = None) -> float:
    """Time average of x_coord(t)^power along the exact path.

    Each linear segment contributes a closed-form polynomial integral; with
    ``t_min`` set, only the path from that time onward is averaged.
    """
    if power not in (1, 2):
        raise ContractViolationError(f"power must be 1 or 2, got {power}")
    seg_t0, seg_t1, seg_x, seg_v = _segment_arrays(traj, coord)
    t_start = traj.start.t if t_min is None else float(t_min)
    total = traj.end_time - t_start
    if total <= 0:
        raise ContractViolationError("averaging window has zero length")
    a = np.maximum(seg_t0, t_start)
    d = seg_t1 - a
    keep = d > 0
    a, d = a[keep], d[keep]
    x0 = seg_x[keep] + seg_v[keep] * (a - seg_t0[keep])
    v = seg_v[keep]
    if power == 1:
        parts = d * (x0 + 0.5 * v * d)
    else:
        parts = d * (x0 * x0 + x0 * v * d + v * v * d * d / 3.0)
    return float(np.sum(parts) / total)


def window_average(traj: Trajectory, coord: int, a: float, b: float) -> float:
    """Time average of one coordinate over the window [a, b]."""
    if not traj.start.t <= a < b <= traj.end_time:
        raise ContractViolationError(f"window [{a}, {b}] outside the trajectory")
    t_end = traj.end_time
    upper = path_moment(traj, coord, 1, t_min=a) * (t_end - a)
    tail = path_moment(traj, coord, 1, t_min=b) * (t_end - b) if b < t_end else 0.0
    return (upper - tail) / (b - a)


def batch_means_se(
    traj: Trajectory, coord: int, drop_frac: float = 0.5, n_batches: int = 8
) -> tuple[float, float]:
    """Time-average mean and its batch-means standard error.

    The first ``drop_frac`` of the path is discarded as burn-in; the rest is
    split into equal-time batches whose means estimate the Monte Carlo error
    of the overall average.
    """
    if not 0.0 <= drop_frac < 1.0:
        raise ContractViolationError("drop_frac must lie in [0, 1)")
    if n_batches < 2:
        raise ContractViolationError("need at least 2 batches")
    a0 = traj.start.t + drop_frac * traj.duration
    edges = np.linspace(a0, traj.end_time, n_batches + 1)
    means = np.array(
        [window_average(traj, coord, edges[i], edges[i + 1]) for i in range(n_batches)]
    )
    return float(np.mean(means)), float(np.std(means, ddof=1) / math.sqrt(n_batches))


def discretize(traj: Trajectory, dt: float, coords=(0,)):
    """Uniform-grid samples of the exact path.

    Returns (times, values) with values of shape (rows, len(coords)) and
    rows = floor(duration/dt) + 1.
    """
    if dt <= 0:
        raise ContractViolationError(f"dt must be positive, got {dt}")
    coords = list(coords)
    n_rows = int(math.floor(traj.duration / dt)) + 1
    ts = traj.start.t + dt * np.arange(n_rows)
    ts = np.minimum(ts, traj.end_time)  # guard the last row against rounding

    times = traj._times
    anchor_x = np.vstack([traj.start.x[coords][None, :]] + (
        [traj.x_at_event[:, coords]] if traj.events else []
    ))
    anchor_v = np.vstack(
        [traj.start.v[coords][None, :]] + [e.v_after[coords][None, :] for e in traj.events]
    ) if traj.events else traj.start.v[coords][None, :]
    idx = np.clip(np.searchsorted(times, ts, side="right") - 1, 0, len(times) - 1)
    # a query exactly at the final event anchors there with zero advance
    idx = np.minimum(idx, anchor_x.shape[0] - 1)
    vals = anchor_x[idx] + anchor_v[idx] * (ts - times[idx])[:, None]
    return ts, vals


def write_trace_csv(path, ts: np.ndarray, values: np.ndarray, coords=(0,)) -> None:
    header = "t," + ",".join(f"x_{c}" for c in coords)
    lines = [header]
    for t, row in zip(ts, values):
        lines.append(",".join([repr(float(t))] + [repr(float(v)) for v in row]))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# -- distribution distance ------------------------------------------------------------

def ks_statistic(samples, reference_cdf) -> float:
    """Sup distance between the empirical CDF of the samples and a reference."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ContractViolationError("need at least 2 samples")
    if np.any(np.isnan(x)):
        raise DataError("samples contain NaN")
    xs = np.sort(x)
    f = np.asarray(reference_cdf(xs), dtype=float)
    n = xs.size
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def ks_two_sample(a, b) -> float:
    """Two-sample sup distance between empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size < 2 or b.size < 2:
        raise ContractViolationError("need at least 2 samples per side")
    if np.any(np.isnan(a)) or np.any(np.isnan(b)):
        raise DataError("samples contain NaN")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))
