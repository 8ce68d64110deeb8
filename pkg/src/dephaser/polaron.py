"""Polaron renormalization of the Rabi frequency.

Dressing the two-level system with bath displacements f_k rescales the drive
to Omega_R = B * Omega, with

    B = exp(-2 int J(w)/w^2 F(w)^2 coth(w/2kT) dw).

The full transformation uses F = 1.  The variational one minimizes the free
energy, which gives

    F(w) = 1 / (1 + Omega_R^2 / (w w0) coth(w/2kT) tanh(w0/2kT)),

with w0 = sqrt(Delta^2 + Omega_R^2); since F depends on B the variational
factor is a fixed point, found here by damped iteration.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .quadrature import QuadSpec, integrate
from .spectral import SpectralDensity
from .units import DomainError, thermal_coth, thermal_energy

log = logging.getLogger(__name__)

FPT = "FPT"
VPT = "VPT"

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
#: Tighter than the dephasing default so that quadrature noise in the B map
#: stays well below the fixed-point tolerance.
POLARON_QUAD = QuadSpec(rel_tol=1e-10, abs_tol=1e-15)


@dataclass(frozen=True)
class PolaronSolution:
    B: float
    Omega_R: float
    omega0: float
    mode: str
    iterations: int
    residual: float
    converged: bool
    underflow: bool = False


def f_weight(omega, Omega_R, omega0, T):
    """Variational displacement weight F(w) in (0, 1]."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(np.isnan(omega)):
        raise DomainError("omega must be > 0")
    if Omega_R < 0 or omega0 <= 0 or not T > 0:
        raise DomainError("need Omega_R >= 0, omega0 > 0 and T > 0")
    x0 = omega0 / (2.0 * thermal_energy(T))
    corr = Omega_R ** 2 / (omega * omega0) * thermal_coth(omega, T) * math.tanh(x0)
    out = 1.0 / (1.0 + corr)
    return out if out.ndim else float(out)


def _cuts(sdf: SpectralDensity, extra=()):
    pts = {0.0, sdf.omega_max, *sdf.knots}
    pts.update(p for p in extra if 0.0 < p < sdf.omega_max)
    return sorted(pts)


def _exponent(sdf: SpectralDensity, T, weight=None, extra_cuts=(), quad=POLARON_QUAD):
    """2 int J/w^2 F^2 coth dw; ``inf`` when it diverges at w -> 0."""
    if not sdf.components:
        return 0.0
    if weight is None and sdf.low_freq_exponent <= 2:
        return math.inf

    def f(w):
        if w <= 0.0:
            return 0.0
        val = float(sdf.evaluate(w)) / (w * w) * float(thermal_coth(w, T))
        if weight is not None:
            val *= float(weight(w)) ** 2
        return val

    cuts = _cuts(sdf, extra_cuts)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        total += integrate(f, lo, hi, quad).check("polaron exponent")
    return 2.0 * total


def _as_B(x):
    """exp(-x) together with an underflow flag."""
    B = math.exp(-x) if math.isfinite(x) else 0.0
    return B, B == 0.0


def renorm_factor(sdf: SpectralDensity, T, weight=None, quad=POLARON_QUAD):
    """Renormalization factor B for a displacement weight ``weight(w)``.

    ``weight=None`` means F = 1 (full transformation).  Returns ``(B,
    underflow)``; a divergent or underflowing exponent gives ``B = 0`` with the
    flag set rather than an error.
    """
    if not T > 0:
        raise DomainError(f"temperature must be > 0, got {T!r}")
    return _as_B(_exponent(sdf, T, weight, quad=quad))


def solve_full(sdf: SpectralDensity, T, Omega, Delta=0.0, quad=POLARON_QUAD):
    """Full polaron transformation; no iteration is needed."""
    if Omega < 0:
        raise DomainError("Omega must be >= 0")
    B, under = renorm_factor(sdf, T, quad=quad)
    Om = B * Omega
    return PolaronSolution(B, Om, math.hypot(Delta, Om), FPT, 0, 0.0, True, under)


def _vpt_map(sdf, T, Omega, Delta, B, quad):
    Om = B * Omega
    w0 = math.hypot(Delta, Om)
    if Om == 0.0:
        return renorm_factor(sdf, T, quad=quad)
    weight = lambda w: f_weight(w, Om, w0, T)
    # F switches on around w ~ Omega_R^2 / w0; resolve that knee.
    knee = Om * Om / w0
    extra = [knee * 10.0 ** k for k in range(-2, 4)]
    return _as_B(_exponent(sdf, T, weight, extra, quad))


def solve_variational(sdf: SpectralDensity, T, Omega, Delta=0.0, tol=DEFAULT_TOL,
                      max_iter=DEFAULT_MAX_ITER, quad=POLARON_QUAD) -> PolaronSolution:
    """Self-consistent variational factor by damped fixed-point iteration.

    Starts from B = 1.  The step is halved whenever consecutive updates change
    sign.  Converges when ``|map(B) - B| < tol``; the returned B is the point
    at which that residual was measured.  Without convergence the iterate with
    the smallest residual is returned with ``converged=False``.
    """
    if Omega < 0:
        raise DomainError("Omega must be >= 0")
    if not T > 0:
        raise DomainError(f"temperature must be > 0, got {T!r}")
    if tol <= 0:
        raise DomainError("tol must be > 0")

    B, damping, last_step = 1.0, 1.0, 0.0
    best = None
    for it in range(1, max_iter + 1):
        new, under = _vpt_map(sdf, T, Omega, Delta, B, quad)
        step = new - B
        res = abs(step)
        if best is None or res < best[1]:
            best = (B, res, under)
        if res < tol:
            Om = B * Omega
            return PolaronSolution(B, Om, math.hypot(Delta, Om), VPT, it, res, True, under)
        if last_step and step * last_step < 0:
            damping = max(damping * 0.5, 1.0 / 64)
        B = new if damping == 1.0 else min(1.0, max(0.0, B + damping * step))
        last_step = step

    B, res, under = best
    log.warning("variational polaron did not converge at T=%s (residual %.3g)", T, res)
    Om = B * Omega
    return PolaronSolution(B, Om, math.hypot(Delta, Om), VPT, max_iter, res, False, under)


def fixed_point_residual(sdf: SpectralDensity, sol: PolaronSolution, T, Omega, Delta=0.0,
                         quad=POLARON_QUAD):
    """|map(B) - B| re-evaluated at a returned solution."""
    if sol.mode == FPT:
        return abs(renorm_factor(sdf, T, quad=quad)[0] - sol.B)
    return abs(_vpt_map(sdf, T, Omega, Delta, sol.B, quad)[0] - sol.B)


def polaron_shift(sdf: SpectralDensity, weight=None, quad=POLARON_QUAD):
    """Continuum polaron shift int J/w F (F - 2) dw (= -int J/w for F = 1).

    Only a constant energy offset; it does not enter the dynamics.
    """
    def f(w):
        if w <= 0.0:
            return 0.0
        F = 1.0 if weight is None else float(weight(w))
        return float(sdf.evaluate(w)) / w * F * (F - 2.0)

    cuts = _cuts(sdf)
    return sum(integrate(f, lo, hi, quad).check("polaron shift")
               for lo, hi in zip(cuts[:-1], cuts[1:]))


@dataclass(frozen=True)
class PolaronPoint:
    T: float
    full: PolaronSolution
    variational: PolaronSolution


def polaron_sweep(sdf: SpectralDensity, temperatures: Iterable[float], Omega, Delta=0.0,
                  tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    return [PolaronPoint(float(T), solve_full(sdf, T, Omega, Delta),
                         solve_variational(sdf, T, Omega, Delta, tol, max_iter))
            for T in temperatures]


def sweep_to_csv(points, metadata=None):
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}: {value}\n")
    buf.write("T_K,B_fpt,B_vpt,Omega_R_thz,iterations\n")
    for p in points:
        buf.write(f"{p.T:.9g},{p.full.B:.9g},{p.variational.B:.9g},"
                  f"{p.variational.Omega_R:.9g},{p.variational.iterations}\n")
    return buf.getvalue()
