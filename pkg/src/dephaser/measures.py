"""Non-Markovianity measures computed from sampled traces.

All measures work on the discrete samples directly (total variation of the
sampled signal) rather than on numerically differentiated curves.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .dephasing import BathConfig, TimeGrid, coherence_trace
from .quadrature import QuadSpec, QuadratureError
from .spectral import SpectralDensity

log = logging.getLogger(__name__)

#: Total variation below which a coherence trace counts as flat.
EPS_TV = 1e-12
#: Default integration window for the rate-based measure, ps.
DEFAULT_WINDOW = (0.0, 300.0)
ALL_MEASURES = ("nc", "ngamma", "nblp")


class DegenerateTraceError(ValueError):
    """Raised when a trace has too few points for a measure."""


@dataclass
class NMReport:
    temperature_K: float
    N_C: Optional[float]
    N_gamma: Optional[float]
    N_BLP: Optional[float]
    horizon_ps: float
    dt_ps: float
    sdf_id: str
    gamma_window_ps: tuple = DEFAULT_WINDOW
    fingerprint: str = ""
    error: Optional[str] = None

    @property
    def ok(self):
        return self.error is None

    def to_dict(self):
        d = asdict(self)
        d["gamma_window_ps"] = list(self.gamma_window_ps)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _as_trace(values, minimum=2):
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < minimum:
        raise DegenerateTraceError(f"trace needs at least {minimum} points, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("trace contains non-finite values")
    return x


def nm_coherence(C) -> float:
    """Coherence-based measure 1 + sum(dC) / sum(|dC|) in [0, 1].

    Zero for a non-increasing trace; a trace flatter than ``EPS_TV`` in total
    variation is treated as Markovian and also gives zero.
    """
    C = _as_trace(C)
    if np.any(C < 0):
        raise ValueError("coherence must be non-negative")
    dC = np.diff(C)
    tv = math.fsum(np.abs(dC))
    if tv < EPS_TV:
        return 0.0
    val = 1.0 + math.fsum(dC) / tv
    return min(1.0, max(0.0, val))


def _window_samples(gamma, times, t_start, t_end):
    gamma = _as_trace(gamma)
    times = np.asarray(times, dtype=float)
    if times.shape != gamma.shape:
        raise ValueError("gamma and times must have the same shape")
    if t_start < times[0] - 1e-12 or t_end > times[-1] + 1e-12 or t_end < t_start:
        raise ValueError(f"window [{t_start}, {t_end}] outside grid "
                         f"[{times[0]}, {times[-1]}]")
    inside = (times > t_start) & (times < t_end)
    t = np.concatenate([[t_start], times[inside], [t_end]])
    g = np.concatenate([[np.interp(t_start, times, gamma)], gamma[inside],
                        [np.interp(t_end, times, gamma)]])
    return g, t


def nm_gamma(gamma, times, t_start=None, t_end=None) -> float:
    """Rate-based measure: trapezoid integral of |gamma| - gamma over a window.

    The default window is ``[0, 300]`` ps clipped to the grid end.
    """
    times = np.asarray(times, dtype=float)
    t_start = DEFAULT_WINDOW[0] if t_start is None else t_start
    t_end = min(DEFAULT_WINDOW[1], times[-1]) if t_end is None else t_end
    g, t = _window_samples(gamma, times, t_start, t_end)
    f = np.abs(g) - g
    return float(np.trapezoid(f, t))


def nm_rhp(gamma, times, t_start=None, t_end=None, dim=2) -> float:
    """Rivas-Huelga-Plenio measure from N_gamma = (dim/2) N_RHP."""
    return nm_gamma(gamma, times, t_start, t_end) * 2.0 / dim


def trace_distance_dephasing(Gamma):
    """Trace distance D(t) = exp(-Gamma) for the antipodal |+>, |-> pair."""
    return np.exp(-np.asarray(Gamma, dtype=float))


def trace_distance(rho1, rho2):
    """Half the trace norm of ``rho1 - rho2`` for Hermitian matrices."""
    ev = np.linalg.eigvalsh(np.asarray(rho1) - np.asarray(rho2))
    return 0.5 * float(np.sum(np.abs(ev)))


def dephased_state(rho0, Gamma):
    """Apply the pure-dephasing channel: off-diagonals scaled by exp(-Gamma)."""
    rho = np.array(rho0, dtype=complex)
    f = math.exp(-Gamma)
    rho[0, 1] *= f
    rho[1, 0] *= f
    return rho


def nm_blp(D) -> float:
    """BLP measure: sum of positive increments of the trace distance."""
    D = _as_trace(D)
    return math.fsum(np.maximum(np.diff(D), 0.0))


def config_fingerprint(sdf: SpectralDensity, T, grid: TimeGrid, quad: QuadSpec):
    payload = json.dumps({"sdf": sdf.to_dict(), "T": T, "t_max": grid.t_max,
                          "n": len(grid), "quad": asdict(quad)}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def measure_report(sdf: SpectralDensity, T, grid: TimeGrid, measures=ALL_MEASURES,
                   window=None, quad=QuadSpec()) -> NMReport:
    """Compute the requested measures for one temperature."""
    measures = tuple(measures)
    unknown = set(measures) - set(ALL_MEASURES)
    if unknown:
        raise ValueError(f"unknown measures {sorted(unknown)}")
    window = window or (DEFAULT_WINDOW[0], min(DEFAULT_WINDOW[1], grid.t_max))
    trace = coherence_trace(BathConfig(sdf, T, quad), grid)
    nc = nm_coherence(trace.C) if "nc" in measures else None
    ng = nm_gamma(trace.gamma, trace.t, *window) if "ngamma" in measures else None
    nb = nm_blp(trace_distance_dephasing(trace.Gamma)) if "nblp" in measures else None
    return NMReport(T, nc, ng, nb, grid.t_max, grid.dt_max, sdf.name, tuple(window),
                    config_fingerprint(sdf, T, grid, quad))


def temperature_sweep(sdf: SpectralDensity, temperatures: Iterable[float], grid: TimeGrid,
                      measures=ALL_MEASURES, window=None, quad=QuadSpec()):
    """One :class:`NMReport` per temperature, in input order.

    A failure at one temperature is recorded in that report's ``error`` field
    and the sweep continues.
    """
    reports = []
    for T in temperatures:
        try:
            if not T > 0:
                raise ValueError(f"sweep temperatures must be > 0, got {T!r}")
            reports.append(measure_report(sdf, T, grid, measures, window, quad))
        except (QuadratureError, ValueError) as exc:
            log.warning("sweep point T=%s failed: %s", T, exc)
            reports.append(NMReport(T, None, None, None, grid.t_max, grid.dt_max, sdf.name,
                                    tuple(window or DEFAULT_WINDOW), error=str(exc)))
    return reports


def sweep_temperatures(t_min=0.01, t_max=300.0, count=12, spacing="log"):
    if spacing == "log":
        return np.geomspace(t_min, t_max, count)
    if spacing == "linear":
        return np.linspace(t_min, t_max, count)
    raise ValueError(f"unknown spacing {spacing!r}")


def sweep_to_csv(reports: Sequence[NMReport]):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["T_K", "N_C", "N_gamma", "N_BLP"])
    fmt = lambda v: "nan" if v is None else f"{v:.9g}"
    for r in reports:
        writer.writerow([f"{r.temperature_K:.9g}", fmt(r.N_C), fmt(r.N_gamma), fmt(r.N_BLP)])
    return buf.getvalue()
