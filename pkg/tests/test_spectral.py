import io
import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dephaser.spectral import (Bulk, GaussLocal, LorentzLocal, Ohmic, SpectralDensity,
                               TableFormatError, Tabulated, builtin_nv, builtin_siv,
                               component_integral, load_tabulated, ohmic, tail_estimate)
from dephaser.units import DomainError


def test_siv_parameters(siv):
    bulk, loc1, loc2 = siv.components
    assert (bulk.alpha, bulk.omega_c, bulk.d) == (0.0275, 1.0, 3)
    assert (loc1.J0, loc1.omega_loc, loc1.width_Gamma) == (0.0235, 15.19, 0.8414)
    assert (loc2.J1, loc2.omega_0, loc2.sigma) == (0.0025, 9.35, 2.4042)
    assert len(siv.components) == 3


def test_vanishes_at_origin_and_beyond_cutoff(siv):
    assert siv.evaluate(0.0) == 0.0
    assert siv.evaluate(siv.omega_max * 1.01) == 0.0


def test_loc1_peak_location(siv):
    w = np.linspace(10, 20, 100_001)
    j = siv.select("loc1").evaluate(w)
    assert w[np.argmax(j)] == pytest.approx(15.19, abs=0.02)
    assert siv.evaluate(15.19) > siv.evaluate(9.35)


def test_bulk_against_mpmath():
    mpmath.mp.dps = 40
    b = Bulk(0.0275, 1.0, 3)
    exact = 2 * mpmath.mpf("0.0275") * 8 * mpmath.exp(-2)
    assert b(2.0) == pytest.approx(float(exact), rel=1e-14)


def test_component_formulas():
    w = 3.7
    l1 = LorentzLocal(0.0235, 15.19, 0.8414)
    half = 0.8414 / 2
    assert l1(w) == pytest.approx(0.0235 * w ** 3 / (w / 15.19 + 1) ** 2
                                  * half / ((w - 15.19) ** 2 + half ** 2))
    g = GaussLocal(0.0025, 9.35, 2.4042)
    assert g(w) == pytest.approx(0.0025 * w ** 3 * math.exp(-(w - 9.35) ** 2 / (2 * 2.4042 ** 2)))
    o = Ohmic(0.1, 2.0, 1.5)
    assert o(w) == pytest.approx(0.1 * w ** 1.5 * math.exp(-w / 2.0))


def test_negative_frequency_rejected(siv):
    with pytest.raises(DomainError):
        siv.evaluate(-1.0)


def test_default_cutoff_is_capped_for_lorentzian_tail(siv):
    assert siv.omega_max == 200.0
    assert tail_estimate(siv, 1.0) > 0


def test_default_cutoff_for_ohmic():
    sdf = ohmic(1.0, 1.0)
    j = sdf.components[0]
    peak = 1.0
    assert j(sdf.omega_max) < 1e-6 * j(peak) * 1.001
    assert j(sdf.omega_max * 0.99) > 1e-6 * j(peak) * 0.99


def test_random_nonnegative(siv, nv, rng):
    for sdf in (siv, nv, ohmic(0.01, 2.0)):
        w = rng.uniform(0, sdf.omega_max, 1000)
        assert np.all(sdf.evaluate(w) >= 0)
        assert sdf.evaluate(0.0) == 0.0
        assert np.all(sdf.evaluate(sdf.omega_max + rng.uniform(1e-9, 50, 100)) == 0)


def test_integral_zero_density():
    empty = SpectralDensity((), 10.0)
    assert component_integral(empty)[0] == 0.0


def test_bulk_integral_against_gamma_function():
    b = Bulk(0.0275, 1.3, 3)
    sdf = SpectralDensity.from_components((b,))
    val, _ = component_integral(sdf)
    # 2 a wc^(1-d) Gamma(d+1) wc^(d+1) = 12 a wc^2 for d = 3, truncated at omega_max
    full = 12 * 0.0275 * 1.3 ** 2
    truncated = full * float(mpmath.gammainc(4, 0, sdf.omega_max / 1.3, regularized=True))
    assert val == pytest.approx(truncated, rel=1e-8)
    assert val == pytest.approx(full, rel=1e-6)


def test_loc1_integral(siv):
    val, err = component_integral(siv, "loc1")
    oracle = mpmath.quad(lambda w: siv.components[1](float(w)), [0, 14, 15.19, 17, 50, 200])
    assert val == pytest.approx(float(oracle), rel=1e-8)
    # narrow-Lorentzian estimate of the integral of J itself is (pi/4) J0 w_loc^3
    loc1 = siv.components[1]
    assert val == pytest.approx(math.pi / 4 * loc1.J0 * loc1.omega_loc ** 3, rel=0.15)


def test_config_round_trip(siv, nv):
    for sdf in (siv, nv):
        again = SpectralDensity.from_dict(json.loads(json.dumps(sdf.to_dict())))
        assert again == sdf
        w = np.linspace(0, sdf.omega_max, 101)
        assert np.array_equal(again.evaluate(w), sdf.evaluate(w))


def test_select(siv):
    assert len(siv.select(["bulk", "loc2"]).components) == 2
    assert siv.select("total") is siv
    with pytest.raises(KeyError):
        siv.select("ohmic")


# -- tabulated data ---------------------------------------------------------

def _table(text, **kw):
    return load_tabulated(io.StringIO(text), **kw)


def test_two_point_table_interpolates_linearly():
    sdf = _table("omega_thz,J_thz\n1,1\n2,0\n")
    assert sdf.evaluate(1.5) == pytest.approx(0.5)
    assert sdf.evaluate(2.5) == 0.0
    assert sdf.omega_max == 2.0


def test_table_exact_at_nodes_and_extrapolates():
    w = np.array([0.5, 1.0, 2.0, 3.0, 4.0])
    j = np.array([0.2, 1.0, 3.0, 1.5, 0.0])
    text = "# comment\nomega_thz,J_thz\n" + "".join(f"{a},{b}\n" for a, b in zip(w, j))
    sdf = _table(text, low_freq_exponent=3.0)
    np.testing.assert_allclose(sdf.evaluate(w), j, rtol=0, atol=1e-15)
    assert sdf.evaluate(0.25) == pytest.approx(0.2 * 0.5 ** 3)
    # continuous at the first node
    assert sdf.evaluate(0.5 - 1e-12) == pytest.approx(0.2, rel=1e-9)


def test_table_from_bytes_stream_and_scale():
    raw = b"omega_thz,J_thz\n1,2\n2,4\n"
    sdf = load_tabulated(io.BytesIO(raw), scale=0.5)
    assert sdf.evaluate(1.0) == pytest.approx(1.0)


def test_table_clamps_tiny_negatives():
    sdf = _table("omega_thz,J_thz\n1,1\n2,-5e-13\n")
    assert sdf.components[0].values[-1] == 0.0


@pytest.mark.parametrize("body,line", [
    ("1,1\n2,x\n", 3),
    ("1,1\n0.5,2\n", 3),
    ("1,1\n2,-1\n", 3),
    ("1,1,1\n", 2),
])
def test_table_errors_report_line(body, line):
    with pytest.raises(TableFormatError, match=f"line {line}"):
        _table("omega_thz,J_thz\n" + body)


def test_nv_sample_peak(nv):
    w = np.linspace(0.01, nv.omega_max, 30_001)
    assert w[np.argmax(nv.evaluate(w))] == pytest.approx(15.7, abs=0.05)
    assert nv.omega_max == pytest.approx(30.0)
    assert nv.low_freq_exponent == 3.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=3, max_size=20))
def test_pchip_never_negative(values):
    w = np.arange(1, len(values) + 1, dtype=float)
    tab = Tabulated(tuple(w), tuple(values))
    q = np.linspace(0.0, w[-1], 500)
    assert np.all(tab(q) >= 0)


def test_knots_include_table_nodes(siv, nv):
    assert siv.knots == siv.breakpoints
    nodes = nv.components[0].omega
    assert set(nodes[:-1]) <= set(nv.knots)
