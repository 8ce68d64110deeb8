"""Single coherent mode model of collapse and revival.

The qubit displaces one oscillator of frequency ``omega_loc`` in opposite
directions depending on its state.  Starting from a coherent state beta the
two branches are coherent states

    beta_up   = beta e^{-i w t} + lam xi,   beta_down = beta e^{-i w t} - lam xi,
    xi = 1 - e^{-i w t},

so the coherence |<beta_down|beta_up>| = exp(-2 lam^2 |xi|^2) collapses and
fully revives every 2 pi / omega_loc.  A phenomenological exp(-Gamma t)
envelope accounts for the decay of the mode.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .spectral import LorentzLocal, SpectralDensity, component_integral
from .units import DomainError, bose_occupation

CONVENTIONS = ("dimensionless", "raw")
#: Largest tolerated probability lost to the Fock-space truncation.
LEAKAGE_TOL = 1e-8


class TruncationError(RuntimeError):
    """Raised when the Fock basis is too small for the requested evolution."""


@dataclass(frozen=True)
class CoherentModeModel:
    """Parameters of the single-mode model.

    Parameters
    ----------
    omega_loc : float
        Mode frequency, rad/ps.
    lambda_ : float
        Coupling.  With ``lambda_convention="dimensionless"`` it is in rad/ps
        and divided by ``omega_loc`` to give the displacement; with ``"raw"``
        it is used as the displacement directly.
    Gamma_decay : float
        Envelope decay rate, rad/ps.
    beta_amp : float
        Real, non-negative initial coherent amplitude.
    """

    omega_loc: float
    lambda_: float
    Gamma_decay: float = 0.0
    beta_amp: float = 0.0
    lambda_convention: str = "dimensionless"

    def __post_init__(self):
        if self.lambda_convention not in CONVENTIONS:
            raise DomainError(f"lambda_convention must be one of {CONVENTIONS}")
        if not self.omega_loc > 0:
            raise DomainError("omega_loc must be > 0")
        if min(self.lambda_, self.Gamma_decay, self.beta_amp) < 0:
            raise DomainError("lambda_, Gamma_decay and beta_amp must be >= 0")

    @property
    def lam(self):
        """Dimensionless displacement used in the overlaps."""
        if self.lambda_convention == "raw":
            return self.lambda_
        return self.lambda_ / self.omega_loc

    @property
    def period(self):
        return 2.0 * math.pi / self.omega_loc

    @classmethod
    def from_sdf(cls, source, T, Gamma_decay=None, lambda_convention="dimensionless"):
        """Build the model from a Lorentzian local-mode density.

        ``source`` is a :class:`SpectralDensity` holding a ``loc1`` component
        or a bare :class:`LorentzLocal`.  The coupling is the square root of
        the component's integral and ``beta_amp^2`` the thermal occupation
        of the mode; the decay defaults to the Lorentzian width.
        """
        if isinstance(source, LorentzLocal):
            comp = source
            part = SpectralDensity.from_components((comp,), name="loc1")
        else:
            part = source.select("loc1")
            comp = part.components[0]
        weight, _ = component_integral(part)
        beta = math.sqrt(bose_occupation(comp.omega_loc, T)) if T > 0 else 0.0
        decay = comp.width_Gamma if Gamma_decay is None else Gamma_decay
        return cls(comp.omega_loc, math.sqrt(weight), decay, beta, lambda_convention)


def toy_coherence(model: CoherentModeModel, t):
    """Closed-form coherence exp(-2 lam^2 |xi|^2 - Gamma t)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    xi2 = 2.0 * (1.0 - np.cos(model.omega_loc * t))
    out = np.exp(-2.0 * model.lam ** 2 * xi2 - model.Gamma_decay * t)
    return out if out.ndim else float(out)


def min_basis(model: CoherentModeModel):
    return int(math.ceil(10.0 * (model.beta_amp ** 2 + model.lam ** 2 + 1.0)))


def _coherent(beta, N):
    """Fock amplitudes of the real coherent state |beta>, truncated to N."""
    if beta == 0:
        psi = np.zeros(N)
        psi[0] = 1.0
        return psi
    n = np.arange(N, dtype=float)
    return np.exp(n * math.log(beta) - 0.5 * gammaln(n + 1) - 0.5 * beta * beta)


def fock_oracle(model: CoherentModeModel, t, N=60, phase=0.0):
    """Brute-force coherence from exact evolution in an N-level Fock space.

    H_(+/-) = w a^dag a +/- lam w (a + a^dag) act on the mode for the two qubit
    states; the coherence is |<psi_-(t)|psi_+(t)>| times the decay envelope.
    ``phase`` rotates the initial amplitude to ``beta_amp * exp(i phase)``.

    Raises
    ------
    TruncationError
        When more than ``LEAKAGE_TOL`` of the probability sits outside the
        basis, either initially or in the top levels at any requested time.
    """
    if N < min_basis(model):
        raise DomainError(f"need N >= {min_basis(model)}, got {N}")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise DomainError("t must be >= 0")
    w, lam = model.omega_loc, model.lam
    psi0 = _coherent(model.beta_amp, N) * np.exp(1j * phase * np.arange(N))
    lost = 1.0 - float(np.vdot(psi0, psi0).real)
    if lost > LEAKAGE_TOL:
        raise TruncationError(f"initial state loses {lost:.3g} outside N={N}")

    diag = w * np.arange(N, dtype=float)
    off = lam * w * np.sqrt(np.arange(1, N, dtype=float))
    branches = []
    for sign in (1.0, -1.0):
        E, V = eigh_tridiagonal(diag, sign * off)
        c = V.T @ psi0
        psi = V @ (np.exp(-1j * np.outer(E, ts)) * c[:, None])
        branches.append(psi)
    top = max(float(np.max(np.sum(np.abs(b[-max(1, N // 10):]) ** 2, axis=0)))
              for b in branches)
    if top > LEAKAGE_TOL:
        raise TruncationError(f"{top:.3g} of the population reaches the top of the basis")

    overlap = np.abs(np.sum(np.conj(branches[1]) * branches[0], axis=0))
    out = overlap * np.exp(-model.Gamma_decay * ts)
    return out if np.ndim(t) else float(out[0])


def toy_to_csv(model: CoherentModeModel, times, with_oracle=True, N=60, metadata=None):
    times = np.asarray(times, dtype=float)
    c_toy = toy_coherence(model, times)
    c_or = fock_oracle(model, times, N) if with_oracle else np.full_like(times, np.nan)
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}: {value}\n")
    buf.write("t_ps,C_toy,C_oracle\n")
    for row in zip(times, c_toy, c_or):
        buf.write(",".join(f"{v:.9g}" for v in row) + "\n")
    return buf.getvalue()
