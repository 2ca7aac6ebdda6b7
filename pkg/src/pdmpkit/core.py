"""Phase-space data model shared by the samplers.

The simulated process moves along straight lines between random events
(velocity switches and refreshments).  A run is therefore stored losslessly
as a start point plus the ordered event log; positions anywhere on the path
are reconstructed by linear interpolation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, DataError, TimeRangeError

__all__ = [
    "EventKind",
    "Event",
    "PhasePoint",
    "Trajectory",
    "RandomSource",
    "GradientOracle",
    "interpolate",
    "switching_rate",
    "write_trajectory_csv",
    "read_trajectory_csv",
]


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ContractViolationError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ContractViolationError(f"{name} contains non-finite entries")
    return v


class EventKind(enum.Enum):
    SWITCH = "Switch"
    REFRESH = "Refresh"


@dataclass(frozen=True)
class PhasePoint:
    """Position, velocity and clock of the piecewise-linear flow."""

    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", _as_vector(self.x, "x"))
        object.__setattr__(self, "v", _as_vector(self.v, "v"))
        if self.x.shape != self.v.shape:
            raise ContractViolationError(
                f"position and velocity dimensions differ: {self.x.shape} vs {self.v.shape}"
            )
        if self.x.size < 1:
            raise ContractViolationError("dimension must be at least 1")
        if not (np.isfinite(self.t) and self.t >= 0):
            raise ContractViolationError(f"time must be finite and nonnegative, got {self.t}")

    @property
    def dim(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class Event:
    """A jump of the velocity component at time ``t``.

    ``v_before`` and ``v_after`` may coincide (a refreshment can resample a
    near-identical velocity); both must have the chain's dimension.
    """

    t: float
    kind: EventKind
    v_before: np.ndarray
    v_after: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v_before", _as_vector(self.v_before, "v_before"))
        object.__setattr__(self, "v_after", _as_vector(self.v_after, "v_after"))
        if self.v_before.shape != self.v_after.shape:
            raise ContractViolationError("v_before and v_after dimensions differ")


class Trajectory:
    """Start point plus ordered event log of one run.

    Positions are cached at event times only; everything in between is exact
    linear interpolation.  Construction verifies that event times strictly
    increase and that the cached positions are consistent with the linear
    flow (relative tolerance 1e-12).
    """

    def __init__(self, start: PhasePoint, events: list[Event], x_at_event: np.ndarray | None = None):
        self.start = start
        self.events = list(events)
        p = start.dim
        n = len(self.events)
        if x_at_event is None:
            x_at_event = self._reconstruct_positions()
        x_at_event = np.asarray(x_at_event, dtype=float).reshape(n, p)
        self.x_at_event = x_at_event
        self._times = np.array([start.t] + [e.t for e in self.events])
        self._validate()

    def _reconstruct_positions(self) -> np.ndarray:
        xs = np.empty((len(self.events), self.start.dim))
        x, t, v = self.start.x, self.start.t, self.start.v
        for k, e in enumerate(self.events):
            x = x + v * (e.t - t)
            xs[k] = x
            t, v = e.t, e.v_after
        return xs

    def _validate(self):
        if np.any(np.diff(self._times) <= 0):
            raise ContractViolationError("event times must strictly increase")
        if not self.events:
            return
        dts = np.diff(self._times)
        anchors = np.vstack([self.start.x[None, :], self.x_at_event[:-1]])
        vels = np.vstack([self.start.v[None, :]] + [e.v_after[None, :] for e in self.events[:-1]])
        predicted = anchors + vels * dts[:, None]
        scale = np.maximum(1.0, np.max(np.abs(predicted), axis=1))
        err = np.max(np.abs(predicted - self.x_at_event), axis=1)
        bad = np.nonzero(err > 1e-12 * scale)[0]
        if bad.size:
            k = int(bad[0])
            raise ContractViolationError(
                f"position discontinuity at event {k} (t={self.events[k].t})"
            )

    @property
    def dim(self) -> int:
        return self.start.dim

    @property
    def end_time(self) -> float:
        return float(self._times[-1])

    @property
    def duration(self) -> float:
        return self.end_time - self.start.t

    def segments(self):
        """Yield (t0, t1, x0, v) for each linear segment, in order."""
        x, t, v = self.start.x, self.start.t, self.start.v
        for k, e in enumerate(self.events):
            yield t, e.t, x, v
            x, t, v = self.x_at_event[k], e.t, e.v_after

    def velocity_at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self._times, t, side="right")) - 1
        if idx <= 0:
            return self.start.v
        return self.events[min(idx, len(self.events)) - 1].v_after


def interpolate(traj: Trajectory, t: float) -> np.ndarray:
    """Exact position at time ``t`` on the piecewise-linear path."""
    if not (traj.start.t <= t <= traj.end_time):
        raise TimeRangeError(
            f"t={t} outside trajectory range [{traj.start.t}, {traj.end_time}]"
        )
    idx = int(np.searchsorted(traj._times, t, side="right")) - 1
    if idx == 0:
        return traj.start.x + traj.start.v * (t - traj.start.t)
    k = idx - 1
    if k == len(traj.events):  # t == end_time exactly
        return traj.x_at_event[-1].copy()
    e = traj.events[k]
    return traj.x_at_event[k] + e.v_after * (t - e.t)


def switching_rate(v: np.ndarray, g: np.ndarray) -> float:
    """Event intensity max(0, -v.g) of the jump process."""
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    if v.shape != g.shape:
        raise ContractViolationError(f"dimension mismatch: {v.shape} vs {g.shape}")
    return max(0.0, -float(np.dot(v, g)))


class RandomSource:
    """Seeded random stream; identical seeds replay identical draws.

    Thin wrapper over numpy's PCG64 generator exposing the handful of
    distributions the samplers need.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @classmethod
    def child(cls, seed: int, index: int) -> "RandomSource":
        """Independent stream derived from (seed, index), deterministic."""
        src = cls.__new__(cls)
        src.seed = int(seed)
        src._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))
        )
        return src

    def uniform(self, size=None):
        if size is None:
            return float(self._gen.random())
        return self._gen.random(size)

    def std_normal(self, size=None):
        if size is None:
            return float(self._gen.standard_normal())
        return self._gen.standard_normal(size)

    def exponential(self, rate: float) -> float:
        if rate <= 0:
            raise ContractViolationError(f"exponential rate must be positive, got {rate}")
        return float(self._gen.exponential(1.0 / rate))

    def integers(self, low: int, high: int, size: int | None = None):
        return self._gen.integers(low, high, size=size)


class GradientOracle:
    """Contract for gradient evaluations of a log target density.

    Subclasses implement ``_grad`` only.  Every ``grad_log_density`` call
    increments the evaluation counter by exactly one -- a subsampled batch
    counts as a single call, so budgets stay honest under any caller.
    """

    def __init__(self, dim: int):
        self._dim = int(dim)
        self._calls = 0

    def dim(self) -> int:
        return self._dim

    def is_stochastic(self) -> bool:
        return False

    def eval_count(self) -> int:
        return self._calls

    def grad_log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self._dim,):
            raise ContractViolationError(
                f"oracle expects dimension {self._dim}, got shape {x.shape}"
            )
        self._calls += 1
        return self._grad(x)

    def _grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


# -- trajectory serialization -------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(traj: Trajectory, path, coords=(0,)) -> None:
    """Write the event log as CSV: one start row plus one row per event.

    Only the selected coordinate subset is emitted (default: coordinate 0),
    which keeps files small for high-dimensional chains.
    """
    coords = list(coords)
    head = ["t", "kind"]
    head += [f"x_{c}" for c in coords] + [f"v_{c}" for c in coords]
    lines = [",".join(head)]
    row = [_fmt(traj.start.t), "Start"]
    row += [_fmt(traj.start.x[c]) for c in coords]
    row += [_fmt(traj.start.v[c]) for c in coords]
    lines.append(",".join(row))
    for k, e in enumerate(traj.events):
        row = [_fmt(e.t), e.kind.value]
        row += [_fmt(traj.x_at_event[k][c]) for c in coords]
        row += [_fmt(e.v_after[c]) for c in coords]
        lines.append(",".join(row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory_csv(path):
    """Read back a trajectory CSV as (times, kinds, x, v) arrays.

    The reconstruction covers the recorded coordinate subset only.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty trajectory file")
    header = lines[0].split(",")
    if header[:2] != ["t", "kind"]:
        raise DataError(f"{path}: unexpected header {header[:2]}")
    ncoord = (len(header) - 2) // 2
    times, kinds, xs, vs = [], [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        times.append(float(parts[0]))
        kinds.append(parts[1])
        xs.append([float(u) for u in parts[2 : 2 + ncoord]])
        vs.append([float(u) for u in parts[2 + ncoord : 2 + 2 * ncoord]])
    return np.array(times), kinds, np.array(xs), np.array(vs)
