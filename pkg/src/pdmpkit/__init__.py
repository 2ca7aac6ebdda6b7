"""Event-driven toolkit for piecewise linear PDMP samplers.

Continuous-time samplers whose paths are exactly piecewise linear: straight
motion punctuated by velocity switches at gradient-dependent Poisson times
(simulated exactly by thinning) and by independent refreshments.  Ships the
classic reflective transitions alongside a nonlinear hyperspherical map,
stochastic-gradient targets with control variates, numerical stationarity
verification, and a CLI for reproducible experiments.
"""

from .core import (
    Event,
    EventKind,
    GradientOracle,
    PhasePoint,
    RandomSource,
    Trajectory,
    interpolate,
    switching_rate,
)
from .engine import RunLedger, SimulationConfig, accept_switch, next_candidate, run
from .errors import (
    BoundViolationError,
    ConfigError,
    ContractViolationError,
    DataError,
    GradientDegenerateError,
    InverseUndefinedError,
    PdmpError,
    QuadratureError,
    StalledProcessError,
    StepSizeError,
    TimeRangeError,
)
from .transitions import (
    BpsReflection,
    HypersphericalMap,
    HypersphericalTransition,
    MapMode,
    PureReflection,
    bps_reflection,
    build_theta_table,
    hyperspherical_transition,
    log_std_normal_cdf,
    plane_decompose,
    pure_reflection,
    r_prime,
    theta_prime_asymptotic,
)
from .targets import (
    IsoGaussianTarget,
    LogisticData,
    LogisticPosterior,
    cv_stochastic_grad,
    gen_synthetic,
    grad_log_posterior_full,
    sgd_fit,
    stable_sigmoid,
)
from .diagnostics import discretize, fp_residual, ks_statistic, path_moment

__version__ = "0.1.0"
