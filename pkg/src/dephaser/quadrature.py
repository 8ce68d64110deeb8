"""Quadrature for semi-infinite oscillatory integrands.

Two entry points carry the physics:

* :func:`integrate_oscillatory` evaluates a single ``int g(w) K(w t) dw`` by
  splitting the range into half-period panels aligned with the zeros of the
  kernel, integrating each with a 15-point Gauss-Kronrod rule and refining
  adaptively where the embedded 7-point Gauss rule disagrees.
* :func:`batch_transform` evaluates the sine and versine transforms of sampled
  envelopes on a whole time grid at once, using shared panel grids and a
  compiled phase recurrence.  This is what trace computations use.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate as _sp_integrate

KINDS = ("sin", "cos", "vers", "sinc")

# Gauss-Kronrod 7/15 nodes on [-1, 1] (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 from each end).
_GAUSS_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
GAUSS7_WEIGHTS = np.concatenate([_WG, _WG[-2::-1]])

GAUSS_ORDER = 15
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GAUSS_ORDER)


class QuadratureError(RuntimeError):
    """Quadrature failed to reach its tolerance or met a non-finite integrand."""

    def __init__(self, message, value=math.nan, error=math.inf):
        super().__init__(message)
        self.value = value
        self.error = error


@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_panels: int = 200_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_panels < 1:
            raise ValueError("max_panels must be >= 1")

    def target(self, value):
        return max(self.rel_tol * abs(value), self.abs_tol)


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    converged: bool
    panels: int = 0

    def __float__(self):
        return self.value

    def check(self, context=""):
        """Return the value, raising :class:`QuadratureError` if not converged."""
        if not self.converged:
            where = f" ({context})" if context else ""
            raise QuadratureError(
                f"quadrature did not converge{where}: value {self.value:.6g}, "
                f"error estimate {self.error:.3g}", self.value, self.error)
        return self.value


def integrate(f, a, b, spec=QuadSpec()):
    """Adaptive integral of a scalar function over ``[a, b]``.

    Thin wrapper over QUADPACK (``scipy.integrate.quad``) that reports
    non-convergence through the returned flag instead of a warning.
    """
    if b < a:
        raise ValueError("integration bounds must satisfy a <= b")
    if a == b:
        return QuadResult(0.0, 0.0, True, 0)

    def checked(x):
        y = f(x)
        if not math.isfinite(y):
            raise QuadratureError(f"non-finite integrand {y!r} at x={x!r}")
        return y

    limit = max(50, min(spec.max_panels, 10_000))
    value, err, info = _sp_integrate.quad(
        checked, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
        limit=limit, full_output=1)[:3]
    ok = err <= spec.target(value) * 1.0000001
    return QuadResult(float(value), float(err), bool(ok), int(info["last"]))


def kernel(kind, omega, t, shift=0.0):
    """Oscillatory kernel evaluated at ``u = omega - shift``.

    ``sin``: sin(u t); ``cos``: cos(u t); ``vers``: 1 - cos(u t) computed as
    2 sin^2(u t / 2); ``sinc``: sin(u t) / u with a Taylor branch near u = 0.
    """
    u = np.asarray(omega, dtype=float) - shift
    if kind == "sin":
        return np.sin(u * t)
    if kind == "cos":
        return np.cos(u * t)
    if kind == "vers":
        return 2.0 * np.sin(0.5 * u * t) ** 2
    if kind == "sinc":
        return sinc_kernel(u, t, shift)
    raise ValueError(f"unknown kernel kind {kind!r}; expected one of {KINDS}")


def sinc_kernel(u, t, scale=1.0):
    """sin(u t)/u, replaced by ``t - u^2 t^3 / 6`` for ``|u| < 1e-8 |scale|``."""
    u = np.asarray(u, dtype=float)
    thresh = 1e-8 * max(abs(scale), 1e-300)
    small = np.abs(u) < thresh
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.sin(u * t) / u
    return np.where(small, t - u * u * t ** 3 / 6.0, direct)


def _gk15(g, lo, hi, kind, t, shift):
    """Kronrod and Gauss estimates for each panel (vectorized over panels)."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    w = mid[:, None] + half[:, None] * KRONROD_NODES[None, :]
    vals = np.asarray(g(w), dtype=float) * kernel(kind, w, t, shift)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("non-finite integrand inside oscillatory quadrature")
    k = half * (vals @ KRONROD_WEIGHTS)
    gs = half * (vals[:, _GAUSS_IDX] @ GAUSS7_WEIGHTS)
    # QUADPACK error heuristic.
    resasc = half * (np.abs(vals - (k / (2 * half))[:, None]) @ KRONROD_WEIGHTS)
    raw = np.abs(k - gs)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * raw / resasc) ** 1.5), raw)
    err = np.maximum(scaled, 50.0 * np.finfo(float).eps * np.abs(k))
    return k, err


def aligned_edges(a, b, t, shift=0.0):
    """Panel edges on ``[a, b]``: ``a``, every ``shift + k pi/t`` inside, ``b``."""
    h = math.pi / t
    k_lo = math.floor((a - shift) / h) + 1
    k_hi = math.ceil((b - shift) / h) - 1
    inner = shift + h * np.arange(k_lo, k_hi + 1, dtype=float)
    inner = inner[(inner > a) & (inner < b)]
    return np.concatenate([[a], inner, [b]])


def integrate_oscillatory(g, t, kind="sin", a=0.0, b=math.inf, spec=QuadSpec(),
                          shift=0.0, breakpoints=()):
    """``int_a^b g(w) K(w, t) dw`` for an oscillatory kernel ``K``.

    Parameters
    ----------
    g : callable
        Envelope, vectorized over numpy arrays.
    t : float
        Time in ps, ``t >= 0``.
    kind : {"sin", "cos", "vers", "sinc"}
        Kernel, see :func:`kernel`.  ``shift`` moves the kernel argument to
        ``omega - shift``; panel edges follow its zeros.
    breakpoints : sequence of float
        Extra frequencies where the envelope has sharp features.

    Returns
    -------
    QuadResult
        Panel sums are accumulated in ascending-omega order with ``math.fsum``,
        so results are bit-reproducible.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}")
    if t < 0:
        raise ValueError("t must be >= 0")
    if not math.isfinite(b):
        raise ValueError("upper limit must be finite; truncate at the cutoff first")
    if b < a:
        raise ValueError("integration bounds must satisfy a <= b")
    if a == b or (t == 0 and kind in ("sin", "vers")):
        return QuadResult(0.0, 0.0, True, 0)

    t_small = 0.5 * math.pi / (b - a)
    if t < t_small:
        # Less than half a kernel cycle on [a, b]: plain adaptive quadrature.
        pts = sorted({p for p in (*breakpoints, shift) if a < p < b})
        cuts = [a, *pts, b]
        f = lambda w: float(g(np.array([w]))[0] * kernel(kind, np.array([w]), t, shift)[0])
        parts = [integrate(f, lo, hi, spec) for lo, hi in zip(cuts[:-1], cuts[1:])]
        value = math.fsum(r.value for r in parts)
        error = math.fsum(r.error for r in parts)
        return QuadResult(value, error, error <= spec.target(value), sum(r.panels for r in parts))

    edges = aligned_edges(a, b, t, shift)
    if breakpoints:
        edges = np.union1d(edges, [p for p in breakpoints if a < p < b])
    # Panels: (lo, hi) kept in a dict keyed by lo so the final sum is ordered.
    lo, hi = edges[:-1], edges[1:]
    k, err = _gk15(g, lo, hi, kind, t, shift)
    panels = {float(l): (float(h), float(v), float(e)) for l, h, v, e in zip(lo, hi, k, err)}

    total_err = math.fsum(p[2] for p in panels.values())
    value = math.fsum(panels[key][1] for key in sorted(panels))
    heap = [(-p[2], key) for key, p in panels.items()]
    heapq.heapify(heap)
    while total_err > spec.target(value) and len(panels) < spec.max_panels:
        # Bisect the worst panels in one vectorized sweep.
        batch = min(len(heap), max(1, len(panels) // 8))
        worst = [heapq.heappop(heap)[1] for _ in range(batch)]
        los = np.array(worst)
        his = np.array([panels[w][0] for w in worst])
        mids = 0.5 * (los + his)
        if np.any(mids <= los) or np.any(mids >= his):
            break
        new_lo = np.concatenate([los, mids])
        new_hi = np.concatenate([mids, his])
        kk, ee = _gk15(g, new_lo, new_hi, kind, t, shift)
        for w in worst:
            del panels[w]
        for l, h, v, e in zip(new_lo, new_hi, kk, ee):
            panels[float(l)] = (float(h), float(v), float(e))
            heapq.heappush(heap, (-float(e), float(l)))
        total_err = math.fsum(p[2] for p in panels.values())
        value = math.fsum(panels[key][1] for key in sorted(panels))
    converged = total_err <= spec.target(value)
    return QuadResult(value, total_err, converged, len(panels))


# --------------------------------------------------------------------------
# Batched transforms on a time grid
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PanelGrid:
    """Uniform panels of width ``h`` from ``start`` with Gauss-Legendre nodes."""

    start: float
    h: float
    n_panels: int

    @property
    def nodes(self):
        k = np.arange(self.n_panels, dtype=float)[:, None]
        return self.start + (k + 0.5 * (_GL_X[None, :] + 1.0)) * self.h

    @property
    def weights(self):
        return np.broadcast_to(0.5 * self.h * _GL_W, (self.n_panels, GAUSS_ORDER))


def panel_grid(omega_max, h_target, shift=0.0):
    """Panels on ``[0, >= omega_max]`` with width <= ``h_target``.

    When ``0 < shift < omega_max`` the width is shrunk so that ``shift`` is a
    panel edge, keeping a removable singularity at ``shift`` off the nodes.
    """
    if 0.0 < shift < omega_max:
        m = max(1, math.ceil(shift / h_target))
        h = shift / m
    else:
        n = max(1, math.ceil(omega_max / h_target))
        h = omega_max / n
    n = max(1, math.ceil(omega_max / h - 1e-9))
    return PanelGrid(0.0, h, n)


@numba.njit(cache=True, fastmath=True)
def _panel_sums(x, h, start, shift, es, ev, t, ps_out, pv_out):
    n_pan, nq = es.shape
    half = 0.5 * h * t
    step_r = math.cos(half)
    step_i = math.sin(half)
    ur = np.empty(nq)
    ui = np.empty(nq)
    for k in range(n_pan):
        if k % 128 == 0:
            # Re-anchor the recurrence against drift.
            for j in range(nq):
                ph = 0.5 * (start + (k + 0.5 * (x[j] + 1.0)) * h - shift) * t
                ur[j] = math.cos(ph)
                ui[j] = math.sin(ph)
        s_acc = 0.0
        v_acc = 0.0
        for j in range(nq):
            c = ur[j]
            s = ui[j]
            s_acc += es[k, j] * (2.0 * s * c)
            v_acc += ev[k, j] * (2.0 * s * s)
            ur[j] = c * step_r - s * step_i
            ui[j] = c * step_i + s * step_r
        ps_out[k] = s_acc
        pv_out[k] = v_acc


@numba.njit(cache=True)
def _kahan(x):
    acc = 0.0
    comp = 0.0
    for v in x:
        y = v - comp
        tot = acc + y
        comp = (tot - acc) - y
        acc = tot
    return acc


@numba.njit(cache=True)
def _transform(x, h, start, shift, es, ev, ts, out_s, out_v):
    ps = np.empty(es.shape[0])
    pv = np.empty(es.shape[0])
    for i in range(ts.shape[0]):
        _panel_sums(x, h, start, shift, es, ev, ts[i], ps, pv)
        out_s[i] = _kahan(ps)
        out_v[i] = _kahan(pv)


def batch_transform(envelope_sin, envelope_vers, ts, omega_max, h_max, shift=0.0):
    """Sine and versine transforms of two envelopes on a grid of times.

    Computes, for every ``t`` in ``ts``::

        S(t) = int_0^omega_max envelope_sin(w)  sin((w - shift) t) dw
        V(t) = int_0^omega_max envelope_vers(w) (1 - cos((w - shift) t)) dw

    Times are grouped into octaves ``(t_hi/2, t_hi]``; each octave shares a
    panel grid of width ``min(pi/t_hi, h_max)`` so that no panel spans more
    than half a kernel period.  Each panel uses 15-point Gauss-Legendre and
    panel sums are Kahan-accumulated in ascending omega.

    Either envelope may be ``None``; the corresponding output is then zeros.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1:
        raise ValueError("ts must be one-dimensional")
    if np.any(ts < 0):
        raise ValueError("times must be >= 0")
    out_s = np.zeros_like(ts)
    out_v = np.zeros_like(ts)
    if ts.size == 0 or (envelope_sin is None and envelope_vers is None):
        return out_s, out_v

    pending = ts > 0
    t_hi = ts.max()
    while pending.any() and t_hi > 0:
        h_level = min(math.pi / t_hi, h_max)
        if h_level >= h_max:
            members = pending & (ts > 0)
        else:
            members = pending & (ts > 0.5 * t_hi)
        if members.any():
            grid = panel_grid(omega_max, h_level, shift)
            nodes = grid.nodes
            wts = grid.weights
            es = (np.zeros_like(nodes) if envelope_sin is None
                  else np.asarray(envelope_sin(nodes), dtype=float) * wts)
            ev = (np.zeros_like(nodes) if envelope_vers is None
                  else np.asarray(envelope_vers(nodes), dtype=float) * wts)
            if not (np.all(np.isfinite(es)) and np.all(np.isfinite(ev))):
                raise QuadratureError("non-finite envelope on the panel grid")
            sel = np.nonzero(members)[0]
            s_out = np.empty(sel.size)
            v_out = np.empty(sel.size)
            _transform(_GL_X, grid.h, grid.start, shift, np.ascontiguousarray(es),
                       np.ascontiguousarray(ev), np.ascontiguousarray(ts[sel]), s_out, v_out)
            out_s[sel] = s_out
            out_v[sel] = v_out
            pending[sel] = False
        t_hi *= 0.5
    return out_s, out_v
