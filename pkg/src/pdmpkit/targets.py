"""Target distributions and their gradient oracles.

Two targets are provided: an isotropic Gaussian, and a Bayesian logistic
regression posterior over synthetic data with optional subsampled gradients
anchored by a control variate at a precomputed mode estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GradientOracle, RandomSource
from .errors import ConfigError, ContractViolationError, DataError, StepSizeError

__all__ = [
    "IsoGaussianTarget",
    "FlatTarget",
    "LogisticData",
    "LogisticPosterior",
    "synthetic_coefficients",
    "gen_synthetic",
    "stable_sigmoid",
    "grad_log_posterior_full",
    "cv_stochastic_grad",
    "plain_subsampled_grad",
    "log_posterior",
    "sgd_fit",
    "run_sgd",
    "save_dataset_csv",
    "load_dataset_csv",
    "save_mode_csv",
    "load_mode_csv",
]


class IsoGaussianTarget(GradientOracle):
    """Standard multivariate Gaussian: grad ln pi(x) = -x."""

    def __init__(self, p: int):
        if p < 1:
            raise ConfigError(f"dimension must be >= 1, got {p}")
        super().__init__(p)

    def _grad(self, x: np.ndarray) -> np.ndarray:
        return -x


class FlatTarget(GradientOracle):
    """Improper flat density: gradient identically zero (testing aid)."""

    def _grad(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x)


def stable_sigmoid(z):
    """Logistic function 1/(1+e^-z) without overflow for large |z|."""
    z_arr = np.asarray(z, dtype=float)
    out = np.empty_like(z_arr)
    pos = z_arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z_arr[pos]))
    ez = np.exp(z_arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    if np.isscalar(z) or np.ndim(z) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LogisticData:
    """Design matrix and binary labels."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
            raise DataError(f"shape mismatch: X {X.shape}, y {y.shape}")
        if np.any(~np.isfinite(X)):
            raise DataError("covariates contain non-finite entries")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise DataError("labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def synthetic_coefficients(p: int) -> np.ndarray:
    """Generating coefficients (1.3, 4, -1, 1.6, 5, -2) padded with zeros."""
    if p < 6:
        raise ConfigError(f"synthetic data needs p >= 6, got {p}")
    beta = np.zeros(p)
    beta[:6] = [1.3, 4.0, -1.0, 1.6, 5.0, -2.0]
    return beta


def gen_synthetic(n: int, p: int, seed: int) -> LogisticData:
    """Synthetic logistic data: x_i ~ N(0, I), y_i ~ Ber(sigmoid(x_i . beta))."""
    beta = synthetic_coefficients(p)
    rng = RandomSource(seed)
    X = rng.std_normal((n, p))
    probs = stable_sigmoid(X @ beta)
    y = (rng.uniform(n) < probs).astype(float)
    return LogisticData(X, y)


class LogisticPosterior(GradientOracle):
    """Bayesian logistic regression posterior with a Gaussian prior.

    With ``batch_size`` unset the oracle returns the exact full-data
    gradient.  With it set, each call draws a uniform batch (with
    replacement) and returns the control-variate estimator anchored at
    ``beta_hat``; the batch still counts as a single oracle call.
    """

    def __init__(
        self,
        data: LogisticData,
        prior_variance: float,
        beta_hat: np.ndarray | None = None,
        g_ref: np.ndarray | None = None,
        batch_size: int | None = None,
        rng: RandomSource | None = None,
    ):
        super().__init__(data.p)
        if prior_variance <= 0:
            raise ConfigError(f"prior variance must be positive, got {prior_variance}")
        if g_ref is not None and beta_hat is None:
            raise ConfigError("g_ref requires beta_hat")
        if batch_size is not None:
            if not 1 <= batch_size <= data.n:
                raise ConfigError(f"batch size {batch_size} outside [1, {data.n}]")
            if beta_hat is None or g_ref is None:
                raise ConfigError("subsampled gradients need beta_hat and g_ref")
            if rng is None:
                raise ConfigError("subsampled gradients need a random source")
        self.data = data
        self.prior_variance = float(prior_variance)
        self.beta_hat = None if beta_hat is None else np.asarray(beta_hat, dtype=float)
        self.g_ref = None if g_ref is None else np.asarray(g_ref, dtype=float)
        self.batch_size = batch_size
        self.rng = rng

    def is_stochastic(self) -> bool:
        return self.batch_size is not None

    def _grad(self, beta: np.ndarray) -> np.ndarray:
        if self.batch_size is None:
            return _full_gradient(self, beta)
        batch = self.rng.integers(0, self.data.n, size=self.batch_size)
        return _cv_gradient(self, beta, batch)


def _full_gradient(post: LogisticPosterior, beta: np.ndarray) -> np.ndarray:
    X, y = post.data.X, post.data.y
    resid = y - stable_sigmoid(X @ beta)
    return X.T @ resid - beta / post.prior_variance


def _cv_gradient(post: LogisticPosterior, beta: np.ndarray, batch) -> np.ndarray:
    X, y = post.data.X, post.data.y
    n_total = post.data.n
    Xb = X[batch]
    diff = stable_sigmoid(Xb @ post.beta_hat) - stable_sigmoid(Xb @ beta)
    correction = (n_total / len(batch)) * (Xb.T @ diff)
    return post.g_ref + (post.beta_hat - beta) / post.prior_variance + correction


def grad_log_posterior_full(post: LogisticPosterior, beta: np.ndarray) -> np.ndarray:
    """Exact full-data gradient of the log posterior at beta."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (post.data.p,):
        raise ContractViolationError(f"beta has shape {beta.shape}, expected ({post.data.p},)")
    return _full_gradient(post, beta)


def cv_stochastic_grad(post: LogisticPosterior, beta: np.ndarray, batch) -> np.ndarray:
    """Control-variate subsampled gradient over the given batch indices.

    Unbiased for the full gradient under uniform batch sampling with
    replacement, and exactly equal to g_ref at beta = beta_hat.
    """
    if post.beta_hat is None or post.g_ref is None:
        raise ConfigError("control variate requires beta_hat and g_ref")
    beta = np.asarray(beta, dtype=float)
    batch = np.asarray(batch, dtype=int)
    return _cv_gradient(post, beta, batch)


def plain_subsampled_grad(post: LogisticPosterior, beta: np.ndarray, batch) -> np.ndarray:
    """Subsampled gradient without the control variate (comparison baseline)."""
    X, y = post.data.X, post.data.y
    batch = np.asarray(batch, dtype=int)
    Xb = X[batch]
    resid = y[batch] - stable_sigmoid(Xb @ beta)
    return (post.data.n / len(batch)) * (Xb.T @ resid) - beta / post.prior_variance


def log_posterior(data: LogisticData, prior_variance: float, beta: np.ndarray) -> float:
    """Log posterior density up to a constant, evaluated stably."""
    z = data.X @ beta
    loglik = -np.sum(data.y * np.logaddexp(0.0, -z) + (1.0 - data.y) * np.logaddexp(0.0, z))
    return float(loglik - 0.5 * np.dot(beta, beta) / prior_variance)


# -- mode finding ----------------------------------------------------------------

def run_sgd(grad_fn, p: int, steps: int, step0: float, rng: RandomSource, decay_every: int | None = None):
    """Plain SGD ascent loop with geometric step decay.

    ``grad_fn(beta, rng)`` returns an ascent direction estimate.  Raises
    StepSizeError if the iterate norm exceeds 1e6.
    """
    if decay_every is None:
        decay_every = max(1, steps // 10)
    beta = np.zeros(p)
    gamma = step0
    for k in range(steps):
        if k > 0 and k % decay_every == 0:
            gamma *= 0.5
        beta = beta + gamma * grad_fn(beta, rng)
        if not np.all(np.isfinite(beta)) or np.linalg.norm(beta) > 1e6:
            raise StepSizeError(f"SGD diverged at step {k} with step size {step0}")
    return beta


def sgd_fit(
    data: LogisticData,
    prior_variance: float,
    steps: int,
    batch_size: int,
    seed: int,
    step0: float | None = None,
) -> np.ndarray:
    """Mode estimate by subsampled gradient ascent.

    The initial step size, unless given, is chosen by a doubling search:
    candidates scaled to the gradient magnitude at zero are probed for 20
    steps each and the best endpoint log posterior wins.  The main run then
    uses that step with geometric decay (x0.5 every steps/10).
    Deterministic given the seed.
    """
    if not 1 <= batch_size <= data.n:
        raise ConfigError(f"batch size {batch_size} outside [1, {data.n}]")
    if steps < 1:
        raise ConfigError("steps must be positive")

    def grad_fn(beta, rng):
        batch = rng.integers(0, data.n, size=batch_size)
        Xb = data.X[batch]
        resid = data.y[batch] - stable_sigmoid(Xb @ beta)
        return (data.n / batch_size) * (Xb.T @ resid) - beta / prior_variance

    if step0 is None:
        g0_norm = float(np.linalg.norm(data.X.T @ (data.y - 0.5)))
        if g0_norm == 0.0:
            g0_norm = 1.0
        best_score, best_step = -np.inf, None
        for j in range(-6, 14):
            gamma = (2.0**j) / g0_norm
            probe_rng = RandomSource.child(seed, 1000 + j)
            try:
                beta_probe = run_sgd(grad_fn, data.p, 20, gamma, probe_rng, decay_every=10**9)
            except StepSizeError:
                continue
            score = log_posterior(data, prior_variance, beta_probe)
            if np.isfinite(score) and score > best_score:
                best_score, best_step = score, gamma
        if best_step is None:
            raise StepSizeError("no stable step size found in the doubling search")
        step0 = best_step

    return run_sgd(grad_fn, data.p, steps, step0, RandomSource.child(seed, 0))


# -- file formats ------------------------------------------------------------------

def save_dataset_csv(data: LogisticData, path) -> None:
    """Plain numeric CSV, one row per observation: label first, then covariates."""
    with open(path, "w", newline="") as fh:
        for i in range(data.n):
            row = [repr(float(data.y[i]))] + [repr(float(v)) for v in data.X[i]]
            fh.write(",".join(row) + "\n")


def load_dataset_csv(path) -> LogisticData:
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: not a numeric CSV ({exc})") from exc
    if raw.shape[1] < 2:
        raise DataError(f"{path}: need a label column plus covariates")
    y, X = raw[:, 0], raw[:, 1:]
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DataError(f"{path}: first column must hold 0/1 labels")
    return LogisticData(X, y)


def save_mode_csv(beta_hat: np.ndarray, g_ref: np.ndarray, path) -> None:
    """Two-column CSV persisting the mode estimate and its full gradient."""
    with open(path, "w", newline="") as fh:
        fh.write("beta_hat,g_ref\n")
        for b, g in zip(beta_hat, g_ref):
            fh.write(f"{float(b)!r},{float(g)!r}\n")


def load_mode_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "beta_hat,g_ref":
            raise DataError(f"{path}: expected header 'beta_hat,g_ref', got {header!r}")
        rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    try:
        beta_hat = np.array([float(r[0]) for r in rows])
        g_ref = np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed mode file ({exc})") from exc
    return beta_hat, g_ref
