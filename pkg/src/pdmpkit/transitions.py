"""Velocity transition maps applied at switch events.

Three maps are provided: full velocity reversal, reflection across the
hyperplane normal to the log-density gradient (the bouncy-particle move),
and a nonlinear hyperspherical map that exchanges the roles of speed and
incidence angle in the plane spanned by the velocity and the gradient.

The hyperspherical map is defined by a monotone curve theta'(r) solving

    d theta'/d r = k * r^p * exp(-r^2/2) / (cos(theta') * sin^(p-2)(theta'))

with theta'(0) = 0 and theta'(inf) = pi/2 fixing the constant k.  Direct
evaluation underflows badly for moderate p (k itself lies far below the
smallest positive double), so the curve is tabulated by integrating the
separated equation with all quadrature carried out in log space.  A closed
form in terms of the Gaussian CDF approximates the curve for large p; both
the tabulated reference and the closed form are exposed, and the speed
inverse r'(theta) is obtained numerically from the table.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import log_ndtr

from .core import RandomSource
from .errors import (
    ContractViolationError,
    GradientDegenerateError,
    InverseUndefinedError,
    QuadratureError,
)

__all__ = [
    "MapMode",
    "HypersphericalMap",
    "PlaneDecomposition",
    "log_std_normal_cdf",
    "theta_prime_asymptotic",
    "build_theta_table",
    "r_prime",
    "plane_decompose",
    "hyperspherical_transition",
    "bps_reflection",
    "pure_reflection",
    "asymptotic_exact_gap",
    "PureReflection",
    "BpsReflection",
    "HypersphericalTransition",
    "write_theta_table_csv",
]

_HALF_PI = math.pi / 2.0


def log_std_normal_cdf(z):
    """ln Phi(z) without underflow, for scalar or array input."""
    out = log_ndtr(z)
    if np.isscalar(z) or np.ndim(z) == 0:
        return float(out)
    return out


def theta_prime_asymptotic(r, p: int):
    """Large-dimension closed form of the outgoing angle theta'(r).

    Computed through the stable log CDF; never evaluates Phi directly.
    Strictly increasing in r with limit pi/2.  For small p the curve dips
    below zero on an interval near the origin; callers tabulating it trim
    that prefix.
    """
    if p < 3:
        raise ContractViolationError(f"dimension must be >= 3, got {p}")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ContractViolationError("speed r must be nonnegative")
    s = (-8.0 / (p - 2)) * log_ndtr(math.sqrt(2.0) * (r_arr - math.sqrt(p)))
    # ln Phi <= 0 always, so s >= 0 up to rounding at huge r
    s = np.maximum(s, 0.0)
    out = _HALF_PI - 0.5 * np.sqrt(s)
    if np.isscalar(r) or np.ndim(r) == 0:
        return float(out)
    return out


# -- log-space quadrature of the speed integral -------------------------------
#
# The separated equation integrates to
#     sin^(p-1)(theta'(r)) / (p-1) = k * G(r),   G(r) = int_0^r s^p e^(-s^2/2) ds
# and the boundary condition at infinity gives k = 1 / ((p-1) * G(inf)).
# G spans hundreds of orders of magnitude, so panels are integrated in log
# space and accumulated with logaddexp; k is never materialized, only ln k.

_GL12 = np.polynomial.legendre.leggauss(12)
_GL24 = np.polynomial.legendre.leggauss(24)


def _log_first_panel(b: float, p: int) -> float:
    """ln int_0^b s^p e^(-s^2/2) ds by the alternating series, b small."""
    x = b * b / 2.0
    if x >= 1.0:
        raise QuadratureError(f"first quadrature panel too wide for the series: b={b}")
    total, t, k = 0.0, 1.0, 0
    while True:
        term = t * (p + 1) / (p + 1 + 2 * k)
        total += term
        if abs(term) < 1e-18:
            break
        k += 1
        t *= -x / k
        if k > 200:
            raise QuadratureError("series for the first quadrature panel did not converge")
    return (p + 1) * math.log(b) - math.log(p + 1) + math.log(total)


def _log_exponent(u, p: int):
    return (p + 1) * u - 0.5 * np.exp(2.0 * u)


def _log_panels(edges: np.ndarray, p: int, rule) -> np.ndarray:
    """ln of int s^p e^(-s^2/2) ds over each [edges[i], edges[i+1]], edges > 0.

    Uses the substitution s = e^u so the large power becomes a linear term
    in the exponent; each panel's peak value is factored out before summing.
    """
    nodes, weights = rule
    ua = np.log(edges[:-1])
    ub = np.log(edges[1:])
    mid = 0.5 * (ua + ub)
    half = 0.5 * (ub - ua)
    u = mid[:, None] + half[:, None] * nodes[None, :]
    phi = _log_exponent(u, p)
    peak = np.maximum(_log_exponent(ua, p), _log_exponent(ub, p))
    u_star = 0.5 * math.log(p + 1)  # interior maximum of the exponent
    inside = (ua < u_star) & (u_star < ub)
    if np.any(inside):
        peak = np.where(inside, _log_exponent(u_star, p), peak)
    inner = np.sum(weights[None, :] * np.exp(phi - peak[:, None]), axis=1)
    return peak + np.log(inner * half)


def _subpanel_edges(a: float, b: float, p: int, refine: int = 1) -> np.ndarray:
    """Split [a, b] (a > 0) so each piece has bounded log-integrand swing."""
    n_pow = (p + 1) * math.log(b / a) / 0.5
    n_exp = (b * b - a * a) / 2.0 / 0.5
    m = refine * max(1, int(math.ceil(max(n_pow, n_exp))))
    # geometric spacing controls the power term, which dominates near zero
    return a * (b / a) ** (np.arange(m + 1) / m)


def _log_speed_integral(grid_r: np.ndarray, p: int, tol: float) -> tuple[np.ndarray, float]:
    """Cumulative ln G at each grid point, plus ln G(inf).

    The grid is extended internally past its last point until the integrand
    tail is negligible, which pins the normalization constant.
    """
    dr = grid_r[1] - grid_r[0]
    r_end = math.sqrt(p) + 16.0
    n_ext = max(1, int(math.ceil((r_end - grid_r[-1]) / dr)))
    full = np.concatenate([grid_r, grid_r[-1] + dr * np.arange(1, n_ext + 1)])

    log_cum = np.empty(full.size)
    running = -math.inf if full[0] == 0.0 else _log_first_panel(full[0], p)
    log_cum[0] = running
    for k in range(full.size - 1):
        a, b = full[k], full[k + 1]
        if a == 0.0:
            piece = _log_first_panel(b, p)
        else:
            piece = None
            for refine in (1, 2, 4):
                edges = _subpanel_edges(a, b, p, refine)
                hi = _log_panels(edges, p, _GL24)
                lo = _log_panels(edges, p, _GL12)
                if np.max(np.abs(hi - lo)) <= tol:
                    piece = float(np.logaddexp.reduce(hi))
                    break
            if piece is None:
                raise QuadratureError(
                    f"speed integral did not converge to tol={tol} on [{a}, {b}]"
                )
        running = piece if running == -math.inf else float(np.logaddexp(running, piece))
        log_cum[k + 1] = running
    return log_cum[: grid_r.size], float(log_cum[-1])


def _theta_from_log_ratio(d: np.ndarray) -> np.ndarray:
    """theta solving sin(theta) = e^d for d <= 0, stable near theta = pi/2."""
    d = np.asarray(d, dtype=float)
    x = np.exp(d)
    theta = np.empty_like(x)
    lo = x < 0.7
    theta[lo] = np.arcsin(x[lo])
    hi = ~lo
    if np.any(hi):
        cos_t = np.sqrt(-np.expm1(2.0 * d[hi]))
        theta[hi] = _HALF_PI - np.arcsin(np.minimum(cos_t, 1.0))
    return theta


class MapMode(enum.Enum):
    EXACT_QUADRATURE = "exact-quadrature"
    ASYMPTOTIC = "asymptotic"


class HypersphericalMap:
    """Tabulated outgoing-angle curve theta'(r) and its numerical inverse.

    The table is strictly increasing with values in [0, pi/2).  Entries are
    trimmed where double precision can no longer resolve the approach to
    pi/2 (the curve flattens below one ulp per grid step in the far tail)
    and, in asymptotic mode at small p, where the closed form is negative
    near the origin.  ``theta_at_zero`` is the lower end of the invertible
    angle range; queries below it raise InverseUndefinedError.
    """

    def __init__(self, p: int, mode: MapMode, grid_r: np.ndarray, grid_theta: np.ndarray):
        grid_r = np.asarray(grid_r, dtype=float)
        grid_theta = np.asarray(grid_theta, dtype=float)
        if p < 3:
            raise ContractViolationError(f"dimension must be >= 3, got {p}")
        if grid_r.size < 8 or grid_r.size != grid_theta.size:
            raise ContractViolationError("grid arrays must match and hold >= 8 points")
        if np.any(np.diff(grid_r) <= 0) or np.any(np.diff(grid_theta) <= 0):
            raise ContractViolationError("table must be strictly increasing")
        if grid_theta[0] < 0 or grid_theta[-1] >= _HALF_PI:
            raise ContractViolationError("table values must lie in [0, pi/2)")
        self.p = int(p)
        self.mode = mode
        self.grid_r = grid_r
        self.grid_theta = grid_theta
        self._fwd = PchipInterpolator(grid_r, grid_theta, extrapolate=False)
        self._fwd_deriv = self._fwd.derivative()
        self._inv_guess = PchipInterpolator(grid_theta, grid_r, extrapolate=False)

    @property
    def theta_at_zero(self) -> float:
        return float(self.grid_theta[0])

    @property
    def r_max(self) -> float:
        return float(self.grid_r[-1])

    def invertible_r_max(self, slope_floor: float = 1e-5) -> float:
        """Largest tabulated r below which the curve's slope resolves the
        inverse to well under 1e-6 in r.  Past this point theta'(r) sits
        within a few float ulps of pi/2 and the speed inverse is ill posed.
        """
        secants = np.diff(self.grid_theta) / np.diff(self.grid_r)
        idx = np.nonzero(secants >= slope_floor)[0]
        if idx.size == 0:
            return self.r_max
        return float(self.grid_r[idx[-1] + 1])

    def theta_prime(self, r):
        """Outgoing angle for incoming speed r (clamped to the table range)."""
        r_arr = np.clip(np.asarray(r, dtype=float), self.grid_r[0], self.grid_r[-1])
        out = self._fwd(r_arr)
        if np.isscalar(r) or np.ndim(r) == 0:
            return float(out)
        return out

    def r_prime(self, theta: float) -> float:
        """Outgoing speed for incoming angle theta; inverse of theta_prime.

        Monotone bracketing on the table plus Newton refinement against the
        interpolant; the returned r satisfies |theta_prime(r) - theta| <=
        1e-12 wherever the curve resolves it.
        """
        t = float(theta)
        if not np.isfinite(t) or t >= _HALF_PI:
            raise ValueError(f"angle {t} outside [0, pi/2)")
        if t < self.theta_at_zero:
            raise InverseUndefinedError(
                f"angle {t} below the map's range start {self.theta_at_zero}"
            )
        gt, gr = self.grid_theta, self.grid_r
        if t >= gt[-1]:
            return float(gr[-1])
        if t == gt[0]:
            return float(gr[0])
        j = int(np.searchsorted(gt, t, side="right")) - 1
        lo, hi = float(gr[j]), float(gr[j + 1])
        guess = self._inv_guess(t)
        x = float(guess) if np.isfinite(guess) else 0.5 * (lo + hi)
        x = min(max(x, lo), hi)
        for _ in range(100):
            f = float(self._fwd(x)) - t
            if abs(f) <= 1e-12:
                return x
            if f > 0:
                hi = x
            else:
                lo = x
            df = float(self._fwd_deriv(x))
            step_ok = df > 0 and np.isfinite(df)
            x_new = x - f / df if step_ok else 0.5 * (lo + hi)
            if not (lo < x_new < hi):
                x_new = 0.5 * (lo + hi)
            if hi - lo <= 1e-15 * (1.0 + hi):
                return 0.5 * (lo + hi)
            x = x_new
        return x


def build_theta_table(
    p: int,
    mode: MapMode = MapMode.EXACT_QUADRATURE,
    grid_size: int = 1024,
    tol: float = 1e-10,
) -> HypersphericalMap:
    """Tabulate theta'(r) on r in [0, sqrt(p) + 8].

    Exact-quadrature mode integrates the separated equation in log space
    with ``tol`` as the per-panel relative tolerance; asymptotic mode
    tabulates the closed form.  Returns the map with its numerical inverse
    ready for use.
    """
    if p < 3:
        raise ContractViolationError(f"dimension must be >= 3, got {p}")
    if grid_size < 256:
        raise ContractViolationError(f"grid_size must be >= 256, got {grid_size}")
    if tol <= 0:
        raise ContractViolationError("tol must be positive")
    grid_r = np.linspace(0.0, math.sqrt(p) + 8.0, grid_size)
    if mode is MapMode.EXACT_QUADRATURE:
        log_g, log_g_inf = _log_speed_integral(grid_r, p, tol)
        theta = _theta_from_log_ratio((log_g - log_g_inf) / (p - 1))
    elif mode is MapMode.ASYMPTOTIC:
        theta = theta_prime_asymptotic(grid_r, p)
    else:
        raise ContractViolationError(f"unknown map mode {mode!r}")

    # trim the non-invertible prefix (asymptotic mode at small p) and the
    # float-saturated tail where increments fall below one ulp of pi/2
    keep_r, keep_t = [], []
    last = -math.inf
    for r_val, t_val in zip(grid_r, theta):
        if t_val < 0.0 or t_val >= _HALF_PI:
            continue
        if t_val <= last:
            continue
        keep_r.append(r_val)
        keep_t.append(t_val)
        last = t_val
    return HypersphericalMap(p, mode, np.array(keep_r), np.array(keep_t))


def r_prime(theta: float, hmap: HypersphericalMap) -> float:
    """Module-level alias for the map's speed inverse."""
    return hmap.r_prime(theta)


def asymptotic_exact_gap(
    p: int,
    exact_map: HypersphericalMap | None = None,
    asym_map: HypersphericalMap | None = None,
    z_lo: float = -6.0,
    z_hi: float = 8.0,
    num: int = 400,
) -> float:
    """Sup gap between the asymptotic and exact curves on the bulk window.

    The curves are compared at r = sqrt(p) + z/sqrt(2) for z on a fixed
    window, the variable in which the large-p limit is taken.  (Near r = 0
    the closed form does not vanish at any p, so a sup over the full table
    span is dominated by that region and never shrinks with dimension.)
    """
    if exact_map is None:
        exact_map = build_theta_table(p, MapMode.EXACT_QUADRATURE)
    if asym_map is None:
        asym_map = build_theta_table(p, MapMode.ASYMPTOTIC)
    z = np.linspace(z_lo, z_hi, num)
    r = math.sqrt(p) + z / math.sqrt(2.0)
    r = r[r >= 0.0]
    gap = np.abs(exact_map.theta_prime(r) - asym_map.theta_prime(r))
    return float(np.max(gap))


# -- geometry ------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneDecomposition:
    """Polar coordinates of v in the plane spanned by v and the gradient.

    ``theta_in`` is the angle between v and the gradient, in [0, pi], and
    v = r cos(theta_in) u_g + r sin(theta_in) u_perp reconstructs exactly.
    """

    r: float
    theta_in: float
    u_g: np.ndarray
    u_perp: np.ndarray


def plane_decompose(v: np.ndarray, g: np.ndarray) -> PlaneDecomposition:
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    if v.shape != g.shape:
        raise ContractViolationError(f"dimension mismatch: {v.shape} vs {g.shape}")
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        raise GradientDegenerateError("gradient is zero; plane is undefined")
    r = float(np.linalg.norm(v))
    if r == 0.0:
        raise ContractViolationError("zero velocity has no angular decomposition")
    u_g = g / g_norm
    a = float(np.dot(v, u_g))
    v_perp = v - a * u_g
    b = float(np.linalg.norm(v_perp))
    if b > 1e-12 * r:
        u_perp = v_perp / b
    else:
        # v is (anti)parallel to g: complete deterministically with the
        # first canonical basis vector not parallel to g
        u_perp = None
        for i in range(v.size):
            e = np.zeros(v.size)
            e[i] = 1.0
            w = e - float(np.dot(e, u_g)) * u_g
            w_norm = float(np.linalg.norm(w))
            if w_norm > 1e-8:
                u_perp = w / w_norm
                break
        if u_perp is None:
            raise ContractViolationError("could not complete an orthonormal pair")
        b = 0.0
    return PlaneDecomposition(r=r, theta_in=math.atan2(b, a), u_g=u_g, u_perp=u_perp)


# -- the three transition maps -------------------------------------------------

def pure_reflection(v: np.ndarray) -> np.ndarray:
    """Full velocity reversal."""
    return -np.asarray(v, dtype=float)


def bps_reflection(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Reflection across the hyperplane normal to the gradient."""
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    if v.shape != g.shape:
        raise ContractViolationError(f"dimension mismatch: {v.shape} vs {g.shape}")
    gg = float(np.dot(g, g))
    if gg == 0.0:
        raise GradientDegenerateError("gradient is zero; reflection is undefined")
    return v - (2.0 * float(np.dot(v, g)) / gg) * g


def hyperspherical_transition(
    v: np.ndarray,
    g: np.ndarray,
    hmap: HypersphericalMap,
    rng: RandomSource,
    ledger=None,
) -> np.ndarray:
    """Nonlinear velocity map: the outgoing speed is set by the incoming
    angle and the outgoing angle by the incoming speed.

    Only valid at switch events (v.g <= 0).  The incoming angle is measured
    against -g, the outgoing one against +g, so active states map to
    inactive ones and v'.g >= 0 by construction.  When the incoming angle
    falls below the map's range the velocity is refreshed from N(0, I)
    instead, and ``ledger.fallback_refreshes`` is incremented when given.
    """
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    dec = plane_decompose(v, g)  # raises on zero gradient
    vg = float(np.dot(v, g))
    if vg > 1e-10 * dec.r * float(np.linalg.norm(g)):
        raise ContractViolationError("transition invoked with v.g > 0")
    theta_in = math.pi - dec.theta_in  # angle against -g, in [0, pi/2]
    theta_in = min(max(theta_in, 0.0), _HALF_PI)
    theta_out = hmap.theta_prime(dec.r)
    try:
        r_out = hmap.r_prime(theta_in)
    except InverseUndefinedError:
        if ledger is not None:
            ledger.fallback_refreshes += 1
        return np.asarray(rng.std_normal(v.size), dtype=float)
    return r_out * (math.cos(theta_out) * dec.u_g + math.sin(theta_out) * dec.u_perp)


# -- engine-facing wrappers ------------------------------------------------------

class PureReflection:
    name = "pure"

    def apply(self, v, g, rng, ledger=None):
        return pure_reflection(v)


class BpsReflection:
    name = "bps"

    def apply(self, v, g, rng, ledger=None):
        return bps_reflection(v, g)


class HypersphericalTransition:
    def __init__(self, hmap: HypersphericalMap):
        self.hmap = hmap
        suffix = "exact" if hmap.mode is MapMode.EXACT_QUADRATURE else "asym"
        self.name = f"hyperspherical-{suffix}"

    def apply(self, v, g, rng, ledger=None):
        return hyperspherical_transition(v, g, self.hmap, rng, ledger)


def write_theta_table_csv(hmap: HypersphericalMap, path) -> None:
    """Dump the tabulated curve as ``r,theta_prime`` rows."""
    lines = ["r,theta_prime"]
    for r_val, t_val in zip(hmap.grid_r, hmap.grid_theta):
        lines.append(f"{r_val!r},{t_val!r}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
