"""Pure-dephasing dynamics of a two-level system in a harmonic bath.

The time-local rate is

    gamma(t) = int_0^wmax J(w)/w coth(w / 2 kB T) sin(w t) dw

and the decoherence exponent Gamma(t) = 2 int_0^t gamma is evaluated directly
in the frequency domain,

    Gamma(t) = 2 int_0^wmax J(w)/w^2 coth(w / 2 kB T) (1 - cos w t) dw,

so that coherence ``C(t) = C0 exp(-Gamma(t))`` carries no time-stepping error.
Closed-form low/high temperature approximations are provided as separately
named functions; they are never substituted for the quadrature.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from .quadrature import (QuadResult, QuadSpec, QuadratureError, batch_transform, integrate,
                         integrate_oscillatory)
from .spectral import SpectralDensity, tail_estimate
from .units import DomainError, thermal_coth, thermal_energy

#: Regime labels only; formulas are never switched on these.
LOW_T_REGIME_K = 20.0
HIGH_T_REGIME_K = 286.0

DEFAULT_DT = 0.02
DEFAULT_T_MAX = 300.0


def regime(T):
    """'low', 'intermediate' or 'high' temperature label for the SiV bath."""
    if T < LOW_T_REGIME_K:
        return "low"
    if T > HIGH_T_REGIME_K:
        return "high"
    return "intermediate"


@dataclass(frozen=True)
class BathConfig:
    """Spectral density at temperature ``T`` (K).  ``T = 0`` freezes the bath."""

    sdf: SpectralDensity
    T: float
    quad: QuadSpec = QuadSpec()

    def __post_init__(self):
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise DomainError(f"temperature must be >= 0, got {self.T!r}")

    def rate_envelope(self, w):
        """J(w)/w coth(w/2kT): the sine-transform envelope of gamma."""
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.sdf.evaluate(w) / w * thermal_coth(w, self.T)
        return np.where(w > 0, out, 0.0)

    def exponent_envelope(self, w):
        """J(w)/w^2 coth(w/2kT): the versine-transform envelope of Gamma/2."""
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.sdf.evaluate(w) / (w * w) * thermal_coth(w, self.T)
        return np.where(w > 0, out, 0.0)

    def grid_resolution(self):
        h = self.sdf.resolution()
        if self.T > 0 and self.sdf.low_freq_exponent < 2:
            # Envelope ~ 1/w below 2kT: resolve the thermal knee.
            h = min(h, max(2.0 * thermal_energy(self.T), 0.02))
        return h


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times in ps starting at 0."""

    points: np.ndarray
    dt_max: float = DEFAULT_DT

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("time grid needs at least one point")
        if pts[0] != 0.0:
            raise ValueError("time grid must start at t = 0")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise ValueError("time grid must be strictly increasing")
        if steps.size and steps.max() > self.dt_max * (1 + 1e-9):
            raise ValueError(f"grid spacing {steps.max():.6g} exceeds dt_max {self.dt_max:.6g}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, t_max=DEFAULT_T_MAX, dt=DEFAULT_DT):
        if t_max <= 0 or dt <= 0:
            raise ValueError("t_max and dt must be positive")
        n = max(1, int(math.ceil(t_max / dt - 1e-9)))
        return cls(np.linspace(0.0, t_max, n + 1), t_max / n)

    @property
    def t_max(self):
        return float(self.points[-1])

    def __len__(self):
        return self.points.size


@dataclass
class DephasingTrace:
    grid: TimeGrid
    gamma: np.ndarray
    Gamma: np.ndarray
    C: np.ndarray
    C0: float = 1.0
    metadata: dict = field(default_factory=dict)

    @property
    def t(self):
        return self.grid.points

    def to_csv(self, reproducible=True):
        return _format_csv(["t_ps", "gamma_thz", "Gamma", "C"],
                           [self.t, self.gamma, self.Gamma, self.C], self.metadata)


def _format_csv(header, columns, metadata):
    buf = io.StringIO()
    for key, value in metadata.items():
        buf.write(f"# {key}: {value}\n")
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(f"{float(v):.9g}" for v in row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Exact quadrature
# ---------------------------------------------------------------------------

def gamma_rate(bath: BathConfig, t) -> float:
    """Dephasing rate gamma(t) in rad/ps at a single time (adaptive quadrature)."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0 or not bath.sdf.components:
        return 0.0
    res = integrate_oscillatory(bath.rate_envelope, t, "sin", 0.0, bath.sdf.omega_max,
                                bath.quad, breakpoints=bath.sdf.knots)
    return res.check(f"gamma_rate t={t} T={bath.T}")


def exponent(bath: BathConfig, t) -> float:
    """Decoherence exponent Gamma(t) >= 0 at a single time."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0 or not bath.sdf.components:
        return 0.0
    res = integrate_oscillatory(bath.exponent_envelope, t, "vers", 0.0, bath.sdf.omega_max,
                                bath.quad, breakpoints=bath.sdf.knots)
    return 2.0 * res.check(f"exponent t={t} T={bath.T}")


def exponent_bound(bath: BathConfig) -> float:
    """Upper bound 4 int J/w^2 coth dw on Gamma(t).

    Returns ``inf`` when the integral diverges at w -> 0, i.e. when the
    density's low-frequency exponent s satisfies s <= 2 (T > 0) or s <= 1
    (T = 0).
    """
    sdf = bath.sdf
    if not sdf.components:
        return 0.0
    s = sdf.low_freq_exponent
    if (bath.T > 0 and s <= 2) or (bath.T == 0 and s <= 1):
        return math.inf
    cuts = sorted({0.0, *sdf.knots, sdf.omega_max})
    f = lambda w: float(bath.exponent_envelope(w))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        total += integrate(f, lo, hi, bath.quad).check("exponent_bound")
    return 4.0 * total


def rates_and_exponents(bath: BathConfig, times):
    """gamma(t) and Gamma(t) on an array of times (batched quadrature)."""
    times = np.asarray(times, dtype=float)
    if not bath.sdf.components:
        return np.zeros_like(times), np.zeros_like(times)
    s, v = batch_transform(bath.rate_envelope, bath.exponent_envelope, times,
                           bath.sdf.omega_max, bath.grid_resolution())
    return s, 2.0 * v


def coherence_trace(bath: BathConfig, grid: TimeGrid, C0=1.0) -> DephasingTrace:
    """gamma, Gamma and C = C0 exp(-Gamma) sampled on ``grid``.

    ``C0 = 1`` corresponds to the initial state (|e> + |g>)/sqrt(2).
    """
    if not 0.0 <= C0 <= 1.0:
        raise DomainError("C0 must lie in [0, 1]")
    gamma, Gamma = rates_and_exponents(bath, grid.points)
    C = C0 * np.exp(-Gamma)
    meta = trace_metadata(bath)
    meta["C0"] = C0
    return DephasingTrace(grid, gamma, Gamma, C, C0, meta)


def trace_metadata(bath: BathConfig):
    sdf = bath.sdf
    return {
        "temperature_K": bath.T,
        "sdf": sdf.describe(),
        "omega_max_thz": sdf.omega_max,
        "gamma_tail_bound_thz": tail_estimate(sdf, bath.T, 1.0),
        "Gamma_tail_bound": 4.0 * tail_estimate(sdf, bath.T, 2.0),
        "regime": regime(bath.T),
    }


# ---------------------------------------------------------------------------
# Closed-form approximations
# ---------------------------------------------------------------------------

def gamma_bulk_lowT(alpha, omega_c, d, t):
    """Zero-temperature bulk rate 2 a wc (d-1)! sin(d atan(wc t)) / (1+(wc t)^2)^(d/2).

    ``(d-1)!`` is taken as Gamma(d) so non-integer ``d > -1`` is accepted.
    """
    if d <= -1:
        raise DomainError("closed form requires d > -1")
    t = np.asarray(t, dtype=float)
    x = omega_c * t
    theta = np.arctan(x)
    if d == 0:
        shape = theta
    else:
        shape = gamma_fn(d) * np.sin(d * theta)
    return 2.0 * alpha * omega_c * shape / (1.0 + x * x) ** (0.5 * d)


def gamma_bulk_highT(alpha, omega_c, d, T, t):
    """High-temperature bulk rate (2 kB T / wc) * gamma_bulk_lowT(t, d - 1)."""
    return 2.0 * thermal_energy(T) / omega_c * gamma_bulk_lowT(alpha, omega_c, d - 1, t)


def gamma_loc1_lowT(J0, omega_loc, width_Gamma, T, t):
    """Narrow-Lorentzian approximation (pi/4) J0 wl^2 coth sin(wl t) exp(-G t/2).

    ``T = 0`` drops the coth factor.
    """
    t = np.asarray(t, dtype=float)
    c = thermal_coth(omega_loc, T)
    return (0.25 * math.pi * J0 * omega_loc ** 2 * c
            * np.sin(omega_loc * t) * np.exp(-0.5 * width_Gamma * t))


def gamma_loc1_highT(J0, omega_loc, width_Gamma, T, t):
    """(2 kB T / wl) times the zero-temperature loc1 rate."""
    return (2.0 * thermal_energy(T) / omega_loc
            * gamma_loc1_lowT(J0, omega_loc, width_Gamma, 0.0, t))


def _gauss_moment_sine(J1, omega_0, sigma, power, t, spec):
    env = lambda w: J1 * w ** power * np.exp(-((w - omega_0) ** 2) / (2.0 * sigma ** 2))
    b = omega_0 + 40.0 * sigma
    res = integrate_oscillatory(env, t, "sin", 0.0, b, spec, breakpoints=(omega_0,))
    return res.check("loc2 closed form")


def gamma_loc2_lowT(J1, omega_0, sigma, t, d=3, spec=QuadSpec()):
    """J1 int w^(d-1) exp(-(w-w0)^2/2s^2) sin(w t) dw (coth = 1)."""
    if t == 0:
        return 0.0
    return _gauss_moment_sine(J1, omega_0, sigma, d - 1, t, spec)


def gamma_loc2_highT(J1, omega_0, sigma, T, t, d=3, spec=QuadSpec()):
    """2 kB T J1 int w^(d-2) exp(-(w-w0)^2/2s^2) sin(w t) dw (coth = 2kT/w)."""
    if t == 0:
        return 0.0
    return 2.0 * thermal_energy(T) * _gauss_moment_sine(J1, omega_0, sigma, d - 2, t, spec)


def cumulative_exponent(gamma, times):
    """2 * cumulative trapezoid of sampled gamma (time-domain route to Gamma)."""
    from scipy.integrate import cumulative_trapezoid

    return 2.0 * cumulative_trapezoid(gamma, times, initial=0.0)


def sign_change_temperature(sdf: SpectralDensity, t_window=(0.0, 20.0), dt=0.01,
                            T_lo=0.5, T_hi=5.0, xtol=1e-3, floor=0.0):
    """Smallest T at which gamma(t) >= -floor for every t in the window (bisection)."""
    grid = np.arange(t_window[0], t_window[1] + 0.5 * dt, dt)

    def nonnegative(T):
        g, _ = rates_and_exponents(BathConfig(sdf, T), grid)
        return bool(np.all(g >= -floor))

    if nonnegative(T_lo) or not nonnegative(T_hi):
        raise ValueError("bisection bracket does not straddle the sign change")
    lo, hi = T_lo, T_hi
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if nonnegative(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
