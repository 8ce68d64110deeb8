"""Unit system and thermal factors.

Angular frequencies are in rad/ps (written "THz" in output headers), times in
ps and temperatures in K, with hbar = 1.  Temperature enters every formula only
through ``KB_OVER_HBAR * T``, which has units of rad/ps.
"""

import numpy as np
from scipy import constants

#: Boltzmann constant over reduced Planck constant, rad ps^-1 K^-1.
KB_OVER_HBAR = constants.k / constants.hbar * 1e-12

#: Relative switch point (in units of 2 kB T / hbar) below which coth uses its
#: Laurent series.
SERIES_SWITCH = 1e-6


class DomainError(ValueError):
    """Raised when a physical argument lies outside its domain."""


def thermal_energy(T):
    """Return kB*T/hbar in rad/ps."""
    return KB_OVER_HBAR * T


def thermal_coth(omega, T):
    """coth(omega / (2 kB T)) with hbar = 1.

    ``T == 0`` is accepted and returns 1 (frozen bath).  Below
    ``SERIES_SWITCH * 2 kB T`` the two-term Laurent series is used so that the
    value stays finite and accurate as ``omega -> 0``; ``omega == 0`` returns
    ``inf``.

    Parameters
    ----------
    omega : float or ndarray
        Angular frequency in rad/ps, ``omega >= 0``.
    T : float
        Temperature in K, ``T >= 0``.
    """
    omega = np.asarray(omega, dtype=float)
    if T < 0 or not np.isfinite(T):
        raise DomainError(f"temperature must be >= 0, got {T!r}")
    if np.any(omega < 0) or np.any(np.isnan(omega)):
        raise DomainError("omega must be >= 0")
    if T == 0:
        out = np.ones_like(omega)
        return out if out.ndim else float(out)
    scale = 2.0 * thermal_energy(T)
    x = omega / scale
    small = x < SERIES_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 1.0 / np.tanh(x)
        series = 1.0 / x + x / 3.0
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def bose_occupation(omega, T):
    """Mean thermal phonon number n = 1/(exp(omega/kB T) - 1).

    Computed as ``(coth - 1) / 2`` using ``expm1`` so that the identity with
    :func:`thermal_coth` holds to rounding.  ``T == 0`` gives 0.
    """
    omega = np.asarray(omega, dtype=float)
    if T < 0 or not np.isfinite(T):
        raise DomainError(f"temperature must be >= 0, got {T!r}")
    if np.any(omega <= 0) or np.any(np.isnan(omega)):
        raise DomainError("omega must be > 0")
    if T == 0:
        out = np.zeros_like(omega)
        return out if out.ndim else float(out)
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(omega / thermal_energy(T))
    return out if out.ndim else float(out)


def thermal_weights(omega, T):
    """Return ``(n, n + 1)`` for arrays of positive frequencies."""
    n = bose_occupation(omega, T)
    return n, n + 1.0
