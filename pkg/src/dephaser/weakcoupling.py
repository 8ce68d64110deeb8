"""Driven two-level system in the weak-coupling (Born-secular) limit.

With a drive the system eigenbasis is tilted and the bath induces both
dephasing and population exchange.  The off-diagonal element in the
eigenbasis evolves as

    rho_12(t) = rho_12(0) exp(-F0(t) + F(t)/2)

where F0 is the pure-dephasing part and F collects the population terms that
produce spurious coherence oscillations.  The filter S = exp(F) is measurable
from two population experiments, and C_filtered = C * S^(-1/2) removes F.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .dephasing import BathConfig, TimeGrid, _format_csv, trace_metadata
from .quadrature import batch_transform, integrate_oscillatory
from .units import DomainError, bose_occupation

#: Below this the filter S^(-1/2) amplifies noise without bound.
S_FLOOR = 1e-12


class FilterBreakdownError(RuntimeError):
    """Raised when the population filter S falls below ``S_FLOOR``."""


@dataclass(frozen=True)
class DrivenSystem:
    """H_s = -(Delta/2) sigma_z + (Omega/2) sigma_x, frequencies in rad/ps."""

    Delta: float
    Omega: float

    def __post_init__(self):
        if self.Omega < 0:
            raise DomainError("Omega must be >= 0")
        if self.omega0 == 0:
            raise DomainError("Delta and Omega cannot both vanish")

    @property
    def omega0(self):
        return math.hypot(self.Delta, self.Omega)

    @property
    def mixing(self):
        """(Omega/omega0)^2, weight of the population-exchange channels."""
        return (self.Omega / self.omega0) ** 2

    @property
    def dephasing_weight(self):
        """(Delta/omega0)^2, weight of the pure-dephasing channel."""
        return (self.Delta / self.omega0) ** 2

    def eigenstates(self):
        """Columns |1>, |2> in the (|e>, |g>) basis; H_s|1> = +omega0/2 |1>.

        The forms with ``omega0 - Delta`` in a denominator are rewritten via
        ``(omega0 - Delta)(omega0 + Delta) = Omega^2`` to stay finite.
        """
        w0, D, W = self.omega0, self.Delta, self.Omega
        if D >= 0:
            plus = w0 + D
            one = np.array([W, plus]) / math.sqrt(2 * w0 * plus)
            two = np.array([-plus, W]) / math.sqrt(2 * w0 * plus)
        else:
            minus = w0 - D
            one = np.array([minus, W]) / math.sqrt(2 * w0 * minus)
            two = np.array([-W, minus]) / math.sqrt(2 * w0 * minus)
        return np.column_stack([one, two])

    def hamiltonian(self):
        return np.array([[-0.5 * self.Delta, 0.5 * self.Omega],
                         [0.5 * self.Omega, 0.5 * self.Delta]])


@dataclass
class WeakCouplingExponents:
    t: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    gamma_zero: np.ndarray
    F: np.ndarray
    F0: np.ndarray
    g: np.ndarray
    mixing: float

    @property
    def F_rate(self):
        """dF/dt at the grid points."""
        return -self.mixing * (self.gamma_minus + self.gamma_plus)


@dataclass
class FilteredTrace:
    grid: TimeGrid
    F: np.ndarray
    F0: np.ndarray
    S: np.ndarray
    C_unfiltered: np.ndarray
    C_filtered: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def t(self):
        return self.grid.points

    def to_csv(self):
        return _format_csv(["t_ps", "F", "F0", "S", "C_raw", "C_filtered"],
                           [self.t, self.F, self.F0, self.S, self.C_unfiltered, self.C_filtered],
                           self.metadata)


def _terms(bath: BathConfig, xi):
    """Envelopes for the n(w) and n(w)+1 sinc terms (None when identically 0)."""
    sdf, T = bath.sdf, bath.T

    def absorb(w):
        return sdf.evaluate(w) * bose_occupation(w, T)

    def emit(w):
        return sdf.evaluate(w) * (bose_occupation(w, T) + 1.0)

    return (absorb if T > 0 else None), emit


def rate_xi(bath: BathConfig, xi, t) -> float:
    """Bath rate gamma_xi(t) for transition frequency ``xi`` (adaptive quadrature).

    gamma_xi = int J [n sin((w+xi)t)/(w+xi) + (n+1) sin((w-xi)t)/(w-xi)] dw
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0 or not bath.sdf.components:
        return 0.0
    absorb, emit = _terms(bath, xi)
    wmax = bath.sdf.omega_max
    bps = bath.sdf.knots
    total = integrate_oscillatory(emit, t, "sinc", 0.0, wmax, bath.quad, shift=xi,
                                  breakpoints=bps).check(f"rate_xi xi={xi} t={t}")
    if absorb is not None:
        total += integrate_oscillatory(absorb, t, "sinc", 0.0, wmax, bath.quad, shift=-xi,
                                       breakpoints=bps).check(f"rate_xi xi={xi} t={t}")
    return total


def rates_xi(bath: BathConfig, xi, times):
    """gamma_xi sampled on an array of times (batched quadrature)."""
    times = np.asarray(times, dtype=float)
    absorb, emit = _terms(bath, xi)
    h = bath.grid_resolution()
    wmax = bath.sdf.omega_max

    def divided(f, shift):
        def env(w):
            with np.errstate(divide="ignore", invalid="ignore"):
                return f(w) / (w - shift)
        return env

    total, _ = batch_transform(divided(emit, xi), None, times, wmax, h, shift=xi)
    if absorb is not None:
        extra, _ = batch_transform(divided(absorb, -xi), None, times, wmax, h, shift=-xi)
        total = total + extra
    return total


def exponents(bath: BathConfig, system: DrivenSystem, grid: TimeGrid) -> WeakCouplingExponents:
    """F(t), F0(t) and g(t) by cumulative trapezoid of the sampled rates."""
    t = grid.points
    w0 = system.omega0
    gp = rates_xi(bath, w0, t)
    gm = rates_xi(bath, -w0, t)
    g0 = rates_xi(bath, 0.0, t)
    F = -system.mixing * cumulative_trapezoid(gm + gp, t, initial=0.0)
    F0 = 2.0 * system.dephasing_weight * cumulative_trapezoid(g0, t, initial=0.0)
    g = system.mixing * gm
    return WeakCouplingExponents(t, gp, gm, g0, F, F0, g, system.mixing)


def population_trajectories(ex: WeakCouplingExponents, rtol=1e-12, atol=1e-14):
    """<S_z>(t) starting from |1> and from |2>, by integrating the rate equation.

    The upper-level population obeys ``p' = F'(t) p + g(t)`` with the sampled
    rates interpolated linearly between grid points.
    """
    t = ex.t
    Fdot = ex.F_rate

    def rhs(tt, p):
        return np.interp(tt, t, Fdot) * p + np.interp(tt, t, ex.g)

    out = []
    for p0 in (1.0, 0.0):
        sol = solve_ivp(rhs, (t[0], t[-1]), [p0], method="DOP853", t_eval=t,
                        rtol=rtol, atol=atol, max_step=float(np.max(np.diff(t))))
        if not sol.success:
            raise RuntimeError(f"population integration failed: {sol.message}")
        out.append(2.0 * sol.y[0] - 1.0)
    return out[0], out[1]


def filter_S(bath: BathConfig, system: DrivenSystem, grid: TimeGrid, check_paths=True,
             exps: WeakCouplingExponents | None = None):
    """Population filter S(t) = exp(F(t)).

    With ``check_paths`` the operational definition
    (<S_z>_{rho_11=1} - <S_z>_{rho_22=1}) / 2 is also computed from the two
    population trajectories and must agree with exp(F) to 1e-8.
    """
    exps = exps or exponents(bath, system, grid)
    S = np.exp(exps.F)
    if check_paths:
        up, down = population_trajectories(exps)
        S_pop = 0.5 * (up - down)
        dev = float(np.max(np.abs(S_pop - S)))
        if dev > 1e-8:
            raise RuntimeError(f"filter paths disagree by {dev:.3g}")
    if np.min(S) <= S_FLOOR:
        raise FilterBreakdownError(f"filter S fell to {np.min(S):.3g} <= {S_FLOOR}")
    return S


def filtered_coherence(bath: BathConfig, system: DrivenSystem, grid: TimeGrid,
                       rho_eg0=0.5, check_paths=False) -> FilteredTrace:
    """Raw coherence 2|rho_12(0)| exp(-F0 + F/2) and its filtered form."""
    if abs(rho_eg0) > 0.5:
        raise DomainError("|rho_eg0| must be <= 1/2")
    exps = exponents(bath, system, grid)
    S = filter_S(bath, system, grid, check_paths=check_paths, exps=exps)
    amp = 2.0 * abs(rho_eg0)
    C_raw = amp * np.exp(-exps.F0 + 0.5 * exps.F)
    C_filtered = C_raw / np.sqrt(S)
    meta = trace_metadata(bath)
    meta.update({"Delta_thz": system.Delta, "Omega_thz": system.Omega,
                 "omega0_thz": system.omega0, "rho_eg0": rho_eg0})
    return FilteredTrace(grid, exps.F, exps.F0, S, C_raw, C_filtered, meta)
