"""Phonon spectral density functions J(omega).

A :class:`SpectralDensity` is an immutable sum of components with a hard upper
cutoff ``omega_max``.  Analytic components follow the standard color-center
decomposition (bulk acoustic, Lorentzian quasi-localized peak, Gaussian band)
plus a generic Ohmic family; tabulated data are interpolated with a monotone
piecewise-cubic interpolant so that J stays non-negative between nodes.
"""

from __future__ import annotations

import csv
import io
from importlib import resources
import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import integrate as _sp_integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from .units import DomainError

#: Relative threshold defining the default cutoff for analytic densities.
CUTOFF_REL = 1e-6
#: Cap on the default cutoff, rad/ps.
OMEGA_MAX_CAP = 200.0
#: Negative tabulated values above -NEG_TOL are clamped to zero.
NEG_TOL = 1e-12


class TableFormatError(ValueError):
    """Raised for malformed tabulated spectral density input."""


@dataclass(frozen=True)
class Bulk:
    """Acoustic phonons, ``2 alpha wc^(1-d) w^d exp(-w/wc)``."""

    alpha: float
    omega_c: float
    d: int = 3
    kind = "bulk"

    def __call__(self, w):
        return (2.0 * self.alpha * self.omega_c ** (1 - self.d)
                * w ** self.d * np.exp(-w / self.omega_c))

    @property
    def low_freq_exponent(self):
        return float(self.d)

    def peak_hint(self):
        return self.d * self.omega_c

    def exact_integral(self):
        # int_0^inf 2 a wc^(1-d) w^d e^{-w/wc} dw = 2 a wc^2 Gamma(d+1)
        return 2.0 * self.alpha * self.omega_c ** 2 * gamma_fn(self.d + 1)


@dataclass(frozen=True)
class LorentzLocal:
    """Quasi-localized mode: Lorentzian of width ``width_Gamma`` at ``omega_loc``."""

    J0: float
    omega_loc: float
    width_Gamma: float
    d: int = 3
    kind = "loc1"

    def __call__(self, w):
        half = 0.5 * self.width_Gamma
        return (self.J0 * w ** self.d / (w / self.omega_loc + 1.0) ** 2
                * half / ((w - self.omega_loc) ** 2 + half ** 2))

    @property
    def low_freq_exponent(self):
        return float(self.d)

    def peak_hint(self):
        return self.omega_loc


@dataclass(frozen=True)
class GaussLocal:
    """Gaussian band ``J1 w^d exp(-(w - w0)^2 / (2 sigma^2))``."""

    J1: float
    omega_0: float
    sigma: float
    d: int = 3
    kind = "loc2"

    def __call__(self, w):
        return (self.J1 * w ** self.d
                * np.exp(-((w - self.omega_0) ** 2) / (2.0 * self.sigma ** 2)))

    @property
    def low_freq_exponent(self):
        return float(self.d)

    def peak_hint(self):
        return self.omega_0


@dataclass(frozen=True)
class Ohmic:
    """``eta w^s exp(-w/wc)``; ``exponent_s = 1`` is Ohmic, > 1 super-Ohmic."""

    eta: float
    omega_c: float
    exponent_s: float = 1.0
    kind = "ohmic"

    def __call__(self, w):
        return self.eta * w ** self.exponent_s * np.exp(-w / self.omega_c)

    @property
    def low_freq_exponent(self):
        return float(self.exponent_s)

    def peak_hint(self):
        return max(self.exponent_s, 1e-3) * self.omega_c

    def exact_integral(self):
        return self.eta * self.omega_c ** (self.exponent_s + 1) * gamma_fn(self.exponent_s + 1)


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Sampled J(omega) with power-law extrapolation below the first node."""

    omega: tuple
    values: tuple
    low_freq_exponent: float = 3.0
    scale: float = 1.0
    kind = "tabulated"
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        j = np.asarray(self.values, dtype=float)
        if w.ndim != 1 or w.size < 2 or w.shape != j.shape:
            raise TableFormatError("need at least two (omega, J) samples")
        if np.any(np.diff(w) <= 0):
            raise TableFormatError("omega samples must be strictly increasing")
        if w[0] <= 0:
            raise TableFormatError("omega samples must be positive")
        if np.any(j < 0):
            raise TableFormatError("J samples must be non-negative")
        object.__setattr__(self, "_interp", PchipInterpolator(w, j, extrapolate=False))

    def __eq__(self, other):
        return (isinstance(other, Tabulated)
                and self.omega == other.omega and self.values == other.values
                and self.low_freq_exponent == other.low_freq_exponent
                and self.scale == other.scale)

    def __hash__(self):
        return hash((self.omega, self.values, self.low_freq_exponent, self.scale))

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        w0, j0 = self.omega[0], self.values[0]
        # PCHIP keeps the sign of the data; clip the roundoff at zero nodes
        inside = np.maximum(self._interp(np.clip(w, w0, self.omega[-1])), 0.0)
        below = j0 * (np.maximum(w, 0.0) / w0) ** self.low_freq_exponent
        out = np.where(w < w0, below, np.where(w > self.omega[-1], 0.0, inside))
        return self.scale * out

    def peak_hint(self):
        return self.omega[int(np.argmax(self.values))]

    @property
    def breakpoints(self):
        return self.omega


Component = Union[Bulk, LorentzLocal, GaussLocal, Ohmic, Tabulated]
_KINDS = {"bulk": Bulk, "loc1": LorentzLocal, "loc2": GaussLocal,
          "ohmic": Ohmic, "tabulated": Tabulated}


@dataclass(frozen=True)
class SpectralDensity:
    """Sum of spectral components, identically zero above ``omega_max``.

    Parameters
    ----------
    components : tuple
        Component objects; each is a callable ``J_i(omega)``.
    omega_max : float
        Hard cutoff in rad/ps.  Use :meth:`from_components` to pick the
        default cutoff automatically.
    name : str
        Identifier written into exported metadata.
    """

    components: tuple
    omega_max: float
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not (self.omega_max > 0 and math.isfinite(self.omega_max)):
            raise DomainError(f"omega_max must be positive and finite, got {self.omega_max!r}")

    @classmethod
    def from_components(cls, components: Sequence[Component], name="custom",
                        omega_max=None):
        components = tuple(components)
        if omega_max is None:
            omega_max = default_cutoff(components)
        return cls(components, float(omega_max), name)

    def __call__(self, omega):
        return evaluate(self, omega)

    def evaluate(self, omega):
        return evaluate(self, omega)

    def select(self, selector):
        """Return a density restricted to the chosen component(s).

        ``selector`` is ``"total"``, a component kind (``"bulk"``, ``"loc1"``,
        ``"loc2"``, ``"ohmic"``, ``"tabulated"``), an index, or a sequence of
        those.
        """
        if selector in (None, "total"):
            return self
        if isinstance(selector, (str, int)):
            selector = [selector]
        chosen = []
        for sel in selector:
            if isinstance(sel, int):
                chosen.append(self.components[sel])
                continue
            hits = [c for c in self.components if c.kind == sel]
            if not hits:
                raise KeyError(f"no component of kind {sel!r} in {self.name!r}")
            chosen.extend(hits)
        label = "+".join(str(s) for s in selector)
        return SpectralDensity(tuple(chosen), self.omega_max, f"{self.name}:{label}")

    @property
    def low_freq_exponent(self):
        """Smallest power-law exponent of J at omega -> 0."""
        if not self.components:
            return math.inf
        return min(c.low_freq_exponent for c in self.components)

    @property
    def breakpoints(self):
        """Frequencies where the integrand has features worth splitting at."""
        pts = set()
        for c in self.components:
            if isinstance(c, Tabulated):
                continue
            p = c.peak_hint()
            if 0 < p < self.omega_max:
                pts.add(float(p))
        return tuple(sorted(pts))

    @property
    def knots(self):
        """Breakpoints plus the nodes of tabulated components.

        Interpolated tables are only piecewise smooth, so adaptive quadrature
        should never straddle a node.
        """
        pts = set(self.breakpoints)
        for c in self.components:
            if isinstance(c, Tabulated):
                pts.update(float(w) for w in c.omega if 0 < w < self.omega_max)
        return tuple(sorted(pts))

    def resolution(self):
        """Frequency scale (rad/ps) a fixed quadrature grid must resolve."""
        scales = [self.omega_max / 50.0, 0.5]
        for c in self.components:
            if isinstance(c, LorentzLocal):
                scales.append(c.width_Gamma / 4.0)
            elif isinstance(c, GaussLocal):
                scales.append(c.sigma / 4.0)
            elif isinstance(c, (Bulk, Ohmic)):
                scales.append(c.omega_c / 4.0)
            elif isinstance(c, Tabulated):
                scales.append(float(np.min(np.diff(c.omega))))
        return min(scales)

    def to_dict(self):
        out = {"name": self.name, "omega_max": self.omega_max, "components": []}
        for c in self.components:
            params = {f.name: getattr(c, f.name) for f in fields(c) if f.init}
            if isinstance(c, Tabulated):
                params["omega"] = list(c.omega)
                params["values"] = list(c.values)
            out["components"].append({"kind": c.kind, **params})
        return out

    @classmethod
    def from_dict(cls, data):
        comps = []
        for item in data["components"]:
            item = dict(item)
            kind = item.pop("kind")
            if kind == "tabulated":
                item["omega"] = tuple(item["omega"])
                item["values"] = tuple(item["values"])
            comps.append(_KINDS[kind](**item))
        return cls(tuple(comps), float(data["omega_max"]), data.get("name", "custom"))

    def describe(self):
        return f"{self.name}({', '.join(c.kind for c in self.components)})"


def evaluate(sdf: SpectralDensity, omega):
    """J(omega) summed over components, zero at 0 and beyond ``omega_max``."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0) or np.any(np.isnan(w)):
        raise DomainError("omega must be >= 0")
    total = np.zeros_like(w)
    for comp in sdf.components:
        total = total + comp(w)
    total = np.where((w > 0) & (w <= sdf.omega_max), total, 0.0)
    return total if total.ndim else float(total)


def default_cutoff(components: Iterable[Component]):
    """Smallest omega above the peak where J < CUTOFF_REL * max J, capped."""
    components = tuple(components)
    tab = [c for c in components if isinstance(c, Tabulated)]
    if tab:
        return max(c.omega[-1] for c in tab)
    if not components:
        return OMEGA_MAX_CAP
    w = np.linspace(0.0, OMEGA_MAX_CAP, 200_001)[1:]
    j = sum(c(w) for c in components)
    jmax = j.max()
    peak = int(np.argmax(j))
    below = np.nonzero(j[peak:] < CUTOFF_REL * jmax)[0]
    if below.size == 0:
        return OMEGA_MAX_CAP
    return float(w[peak + below[0]])


def builtin_siv():
    """Phenomenological SiV- density: bulk + quasi-localized Lorentzian + Gaussian."""
    comps = (
        Bulk(alpha=0.0275, omega_c=1.0, d=3),
        LorentzLocal(J0=0.0235, omega_loc=15.19, width_Gamma=0.8414, d=3),
        GaussLocal(J1=0.0025, omega_0=9.35, sigma=2.4042, d=3),
    )
    return SpectralDensity.from_components(comps, name="siv")


#: Bundled synthetic NV table (not first-principles data).
NV_SAMPLE = "nv_sample.csv"


def builtin_nv():
    """Synthetic NV- density shipped with the package, shaped like the real one."""
    with resources.files("dephaser.data").joinpath(NV_SAMPLE).open("rb") as fh:
        return load_tabulated(fh, low_freq_exponent=3.0, name="nv_sample")


def ohmic(eta, omega_c, exponent_s=1.0, omega_max=None, name="ohmic"):
    return SpectralDensity.from_components(
        (Ohmic(eta, omega_c, exponent_s),), name=name, omega_max=omega_max)


def load_tabulated(source, low_freq_exponent=3.0, scale=1.0, name="tabulated"):
    """Read a ``omega_thz,J_thz`` CSV table into a :class:`SpectralDensity`.

    ``source`` may be a path, a text stream or a binary stream.  Lines whose
    first non-blank character is ``#`` are ignored, as is the header.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    omegas, values = [], []
    header_seen = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if not header_seen:
            header_seen = True
            if [c.strip() for c in row] == ["omega_thz", "J_thz"]:
                continue
        if len(row) != 2:
            raise TableFormatError(f"line {lineno}: expected 2 columns, got {len(row)}")
        try:
            w, j = float(row[0]), float(row[1])
        except ValueError:
            raise TableFormatError(f"line {lineno}: non-numeric value {row!r}") from None
        if not (math.isfinite(w) and math.isfinite(j)):
            raise TableFormatError(f"line {lineno}: non-finite value")
        if j < -NEG_TOL:
            raise TableFormatError(f"line {lineno}: negative J value {j}")
        if omegas and w <= omegas[-1]:
            raise TableFormatError(f"line {lineno}: omega not strictly increasing")
        omegas.append(w)
        values.append(max(j, 0.0))
    comp = Tabulated(tuple(omegas), tuple(values), float(low_freq_exponent), float(scale))
    return SpectralDensity((comp,), omegas[-1] if omegas else 1.0, name)


def component_integral(sdf: SpectralDensity, selector="total", rel_tol=1e-8):
    """Integral of J over ``[0, omega_max]`` for the selected component(s).

    Returns ``(value, error_estimate)``.  Raises
    :class:`~dephaser.quadrature.QuadratureError` when the requested relative
    tolerance is not reached.
    """
    from .quadrature import QuadSpec, QuadratureError, integrate

    part = sdf.select(selector)
    if not part.components:
        return 0.0, 0.0
    pieces = sorted({0.0, *part.knots, part.omega_max})
    spec = QuadSpec(rel_tol=rel_tol, abs_tol=1e-300)
    total, err = 0.0, 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        res = integrate(part.evaluate, lo, hi, spec)
        total += res.value
        err += res.error
    if err > max(rel_tol * abs(total), 1e-14):
        raise QuadratureError(f"component integral not converged (error estimate {err:.3g})",
                              value=total, error=err)
    return total, err


def tail_estimate(sdf: SpectralDensity, T=0.0, weight_power=1.0):
    """Bound on ``int_{omega_max}^inf J coth / omega^p`` dropped by the cutoff.

    coth is decreasing, so its value at ``omega_max`` bounds it on the tail.
    Tabulated components vanish past their last sample and contribute nothing.
    """
    from .units import thermal_coth

    total = 0.0
    for c in sdf.components:
        if isinstance(c, Tabulated):
            continue
        f = lambda w, c=c: c(w) / w ** weight_power
        val, _ = _sp_integrate.quad(f, sdf.omega_max, np.inf, limit=200)
        total += abs(val)
    return total * float(thermal_coth(sdf.omega_max, T))
