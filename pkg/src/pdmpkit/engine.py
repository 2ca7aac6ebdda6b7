"""Event-driven simulation by Poisson thinning with velocity refreshment.

Switch times are proposed from a dominating rate c*||v|| and accepted with
probability lambda/lambda_hat; refreshments arrive from an independent
homogeneous process.  The run is budgeted in gradient-oracle calls: one
call per proposal, none per refreshment, and the gradient at an accepted
proposal is reused by the transition map.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Event, EventKind, GradientOracle, PhasePoint, RandomSource, Trajectory
from .errors import BoundViolationError, ConfigError, ContractViolationError, StalledProcessError

__all__ = [
    "CandidateKind",
    "SimulationConfig",
    "RunLedger",
    "next_candidate",
    "accept_switch",
    "run",
    "ledger_text",
]


class CandidateKind(enum.Enum):
    SWITCH_PROPOSAL = "SwitchProposal"
    REFRESH = "Refresh"


@dataclass
class SimulationConfig:
    """Knobs of one chain: transition map, thinning bound, refreshment,
    gradient budget and start point."""

    transition: object
    rate_bound_coeff: float
    refresh_intensity: float
    budget: int
    x0: np.ndarray
    seed: int = 0
    record_coords: tuple[int, ...] = (0,)
    burn_in_frac: float = 0.1
    max_violation_frac: float = 0.01
    abort_on_violations: bool = True

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.rate_bound_coeff <= 0:
            raise ConfigError(f"rate bound coefficient must be positive, got {self.rate_bound_coeff}")
        if self.refresh_intensity < 0:
            raise ConfigError(f"refresh intensity must be nonnegative, got {self.refresh_intensity}")
        if int(self.budget) < 1:
            raise ConfigError(f"budget must be at least 1, got {self.budget}")
        self.budget = int(self.budget)
        if not np.all(np.isfinite(self.x0)):
            raise ConfigError("x0 contains non-finite entries")
        if not 0.0 <= self.burn_in_frac < 1.0:
            raise ConfigError("burn-in fraction must lie in [0, 1)")


@dataclass
class RunLedger:
    """Run bookkeeping; rejected proposals leave no trace in the event log,
    so their count lives here."""

    oracle_calls: int = 0
    proposals: int = 0
    accepted_switches: int = 0
    refreshes: int = 0
    bound_violations: int = 0
    fallback_refreshes: int = 0


def ledger_text(ledger: RunLedger, total_time: float | None = None) -> str:
    """Flat key=value block for files and logs."""
    lines = [
        f"oracle_calls={ledger.oracle_calls}",
        f"proposals={ledger.proposals}",
        f"accepted_switches={ledger.accepted_switches}",
        f"refreshes={ledger.refreshes}",
        f"bound_violations={ledger.bound_violations}",
        f"fallback_refreshes={ledger.fallback_refreshes}",
    ]
    if total_time is not None:
        lines.append(f"total_time={total_time!r}")
    return "\n".join(lines) + "\n"


def next_candidate(
    v: np.ndarray, c: float, rho: float, rng: RandomSource
) -> tuple[float, CandidateKind]:
    """Waiting time and type of the next candidate event.

    The switch-proposal and refreshment processes are homogeneous given v,
    so their superposition has rate c*||v|| + rho and the type is chosen
    proportionally to the component rates.
    """
    rate_switch = c * float(np.linalg.norm(v))
    total = rate_switch + rho
    if total <= 0.0:
        raise StalledProcessError("both proposal and refreshment rates are zero")
    dt = rng.exponential(total)
    if rho == 0.0:
        kind = CandidateKind.SWITCH_PROPOSAL
    elif rate_switch == 0.0:
        kind = CandidateKind.REFRESH
    else:
        kind = (
            CandidateKind.SWITCH_PROPOSAL
            if rng.uniform() < rate_switch / total
            else CandidateKind.REFRESH
        )
    return dt, kind


def accept_switch(lam: float, lam_hat: float, u: float, ledger: RunLedger | None = None) -> bool:
    """Thinning acceptance: true iff u < lam/lam_hat.

    A rate above the bound is recorded as a violation and accepted with the
    ratio clamped to one; the run-level policy decides whether too many
    violations abort the run.
    """
    if lam_hat <= 0:
        raise ContractViolationError("thinning bound must be positive")
    if lam > lam_hat and ledger is not None:
        ledger.bound_violations += 1
    ratio = min(lam / lam_hat, 1.0)
    return u < ratio


def run(
    config: SimulationConfig, target: GradientOracle, rng: RandomSource
) -> tuple[Trajectory, RunLedger]:
    """Simulate one chain until the gradient budget is exhausted.

    The initial velocity is drawn from N(0, I).  Exactly ``budget`` oracle
    calls are made; refreshments consume none.  Raises BoundViolationError
    if the thinning bound is exceeded on more than the configured fraction
    of post-burn-in proposals.
    """
    p = target.dim()
    if config.x0.size != p:
        raise ContractViolationError(
            f"x0 has dimension {config.x0.size}, target expects {p}"
        )
    c = config.rate_bound_coeff
    rho = config.refresh_intensity
    ledger = RunLedger()
    calls_at_start = target.eval_count()
    burn_in_calls = int(config.burn_in_frac * config.budget)
    post_proposals = 0
    post_violations = 0

    v = np.asarray(rng.std_normal(p), dtype=float)
    start = PhasePoint(config.x0.copy(), v.copy(), 0.0)
    events: list[Event] = []
    positions: list[np.ndarray] = []
    # positions are expressed relative to the last recorded event so the
    # stored path is exactly linear between events, free of rounding drift
    # accumulated over rejected proposals
    x_anchor = config.x0.copy()
    t_anchor = 0.0
    t = 0.0

    while target.eval_count() - calls_at_start < config.budget:
        dt, kind = next_candidate(v, c, rho, rng)
        t = t + dt
        x = x_anchor + v * (t - t_anchor)
        if kind is CandidateKind.REFRESH:
            v_new = np.asarray(rng.std_normal(p), dtype=float)
            events.append(Event(t, EventKind.REFRESH, v, v_new))
            positions.append(x)
            x_anchor, t_anchor = x, t
            v = v_new
            ledger.refreshes += 1
            continue

        g = target.grad_log_density(x)
        ledger.proposals += 1
        lam = max(0.0, -float(np.dot(v, g)))
        lam_hat = c * float(np.linalg.norm(v))
        violated = lam > lam_hat
        in_tail = target.eval_count() - calls_at_start > burn_in_calls
        if in_tail:
            post_proposals += 1
            post_violations += int(violated)
        u = rng.uniform()
        if accept_switch(lam, lam_hat, u, ledger):
            v_new = np.asarray(config.transition.apply(v, g, rng, ledger), dtype=float)
            events.append(Event(t, EventKind.SWITCH, v, v_new))
            positions.append(x)
            x_anchor, t_anchor = x, t
            v = v_new
            ledger.accepted_switches += 1
        if (
            config.abort_on_violations
            and in_tail
            and post_proposals >= 100
            and post_violations > config.max_violation_frac * post_proposals
        ):
            raise BoundViolationError(
                f"thinning bound exceeded on {post_violations}/{post_proposals} "
                f"post-burn-in proposals (limit {config.max_violation_frac:.2%})"
            )

    ledger.oracle_calls = target.eval_count() - calls_at_start
    xs = np.array(positions) if positions else np.empty((0, p))
    traj = Trajectory(start, events, xs)
    return traj, ledger
