import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dephaser.dephasing import BathConfig, TimeGrid, coherence_trace
from dephaser.measures import (ALL_MEASURES, DegenerateTraceError, NMReport, dephased_state,
                               measure_report, nm_blp, nm_coherence, nm_gamma, nm_rhp,
                               sweep_temperatures, sweep_to_csv, temperature_sweep,
                               trace_distance, trace_distance_dephasing)


@pytest.fixture(scope="module")
def siv_traces(siv, grid300):
    """300 ps SiV traces on the default grid, keyed by temperature."""
    return {T: coherence_trace(BathConfig(siv, T), grid300) for T in (0.01, 1.0, 10.0, 100.0, 300.0)}


@pytest.fixture(scope="module")
def siv_1K(siv_traces):
    return siv_traces[1.0]


# -- N_C ----------------------------------------------------------------------

def test_nc_decreasing_is_zero():
    assert nm_coherence(np.linspace(1, 0, 50)) == 0.0


def test_nc_closed_loop_is_one():
    assert nm_coherence([1.0, 0.4, 0.9, 0.2, 1.0]) == pytest.approx(1.0, abs=1e-15)


def test_nc_flat_trace_is_zero():
    assert nm_coherence(np.full(10, 0.3)) == 0.0
    assert nm_coherence([0.3, 0.3 + 1e-14, 0.3]) == 0.0


def test_nc_partial_revival():
    # down 0.6, up 0.2, down 0.2: 1 + (-0.6) / 1.0
    assert nm_coherence([1.0, 0.4, 0.6, 0.4]) == pytest.approx(0.4)


def test_nc_errors():
    with pytest.raises(DegenerateTraceError):
        nm_coherence([1.0])
    with pytest.raises(ValueError):
        nm_coherence([1.0, -0.1])
    with pytest.raises(ValueError):
        nm_coherence([1.0, math.nan])


def test_nc_bounds_on_random_traces(rng):
    for _ in range(1000):
        C = rng.uniform(0, 1, rng.integers(2, 40))
        assert 0.0 <= nm_coherence(C) <= 1.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=2, max_size=30))
def test_nc_zero_iff_non_increasing(ticks):
    # values on a 1e-6 lattice, so every rise is resolvable against the total variation
    C = np.asarray(ticks) * 1e-6
    non_increasing = np.all(np.diff(C) <= 0) or math.fsum(np.abs(np.diff(C))) < 1e-12
    assert (nm_coherence(C) == 0.0) == bool(non_increasing)


# -- N_gamma and N_RHP --------------------------------------------------------

def test_ngamma_non_negative_rate():
    t = np.linspace(0, 10, 101)
    assert nm_gamma(np.abs(np.sin(t)), t) == 0.0


def test_ngamma_unit_dip():
    t = np.linspace(0, 3, 3001)
    g = np.where(t <= 1.0, -1.0, 0.0)
    # trapezoid smears the step over one cell; the jump sits at a node
    assert nm_gamma(g, t) == pytest.approx(2.0, abs=2e-3)
    assert nm_gamma(-np.ones_like(t), t, 0.0, 1.0) == pytest.approx(2.0, rel=1e-14)


def test_ngamma_window_and_errors():
    t = np.linspace(0, 10, 11)
    g = -np.ones_like(t)
    assert nm_gamma(g, t, 2.5, 4.5) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        nm_gamma(g, t, 0.0, 11.0)
    with pytest.raises(ValueError):
        nm_gamma(g[:-1], t)


def test_ngamma_positive_iff_negative_rate(rng):
    t = np.linspace(0, 5, 200)
    for _ in range(200):
        g = rng.normal(size=t.size) + rng.uniform(-1, 3)
        assert (nm_gamma(g, t) > 0) == bool(np.any(g < -1e-12))


def test_rhp_equals_ngamma(siv_1K):
    t, g = siv_1K.t, siv_1K.gamma
    assert nm_rhp(g, t) == nm_gamma(g, t)
    assert nm_rhp(np.zeros(5), np.arange(5.0)) == 0.0


def test_ngamma_siv_grows_at_high_temperature(siv_traces):
    vals = {T: nm_gamma(siv_traces[T].gamma, siv_traces[T].t) for T in (100.0, 300.0)}
    assert vals[300.0] > vals[100.0]


# -- trace distance and BLP ---------------------------------------------------

def test_trace_distance_closed_form_against_eigenvalues(rng):
    plus = np.full((2, 2), 0.5, dtype=complex)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)
    G = rng.uniform(0, 30, 100)
    ref = [trace_distance(dephased_state(plus, x), dephased_state(minus, x)) for x in G]
    np.testing.assert_allclose(trace_distance_dephasing(G), ref, rtol=1e-12, atol=1e-300)


def test_trace_distance_limits():
    assert trace_distance_dephasing(0.0) == 1.0
    assert trace_distance_dephasing(800.0) == 0.0


def test_blp_examples():
    assert nm_blp(np.linspace(1, 0, 20)) == 0.0
    assert nm_blp([1.0, 0.5, 0.6, 0.2]) == pytest.approx(0.1)
    with pytest.raises(DegenerateTraceError):
        nm_blp([0.5])


def test_blp_input_equals_coherence(siv_1K):
    D = trace_distance_dephasing(siv_1K.Gamma)
    np.testing.assert_allclose(D, siv_1K.C / siv_1K.C[0], rtol=1e-12, atol=0)


# -- reports and sweeps -------------------------------------------------------

def test_grid_refinement_siv_1K(siv, siv_1K):
    fine = coherence_trace(BathConfig(siv, 1.0), TimeGrid.uniform(300.0, 0.01))
    assert abs(nm_coherence(fine.C) - nm_coherence(siv_1K.C)) < 1e-3


def test_report_json_keys(siv):
    rep = measure_report(siv, 1.0, TimeGrid.uniform(20.0, 0.02))
    d = json.loads(rep.to_json())
    for key in ("temperature_K", "N_C", "N_gamma", "N_BLP", "horizon_ps", "dt_ps", "sdf_id"):
        assert key in d
    assert d["gamma_window_ps"] == [0.0, 20.0]
    assert 0 <= rep.N_C <= 1 and rep.N_gamma >= 0 and rep.N_BLP >= 0
    assert len(rep.fingerprint) == 16


def test_unknown_measure(siv):
    with pytest.raises(ValueError):
        measure_report(siv, 1.0, TimeGrid.uniform(1.0, 0.1), measures=("nc", "mi"))


def test_sweep_matches_direct_and_captures_errors(siv):
    grid = TimeGrid.uniform(20.0, 0.02)
    reports = temperature_sweep(siv, [1.0, -2.0, 0.0], grid)
    assert reports[0] == measure_report(siv, 1.0, grid)
    assert not reports[1].ok and not reports[2].ok
    assert reports[1].N_C is None and "> 0" in reports[1].error
    text = sweep_to_csv(reports)
    lines = text.splitlines()
    assert lines[0] == "T_K,N_C,N_gamma,N_BLP"
    assert lines[2] == "-2,nan,nan,nan"


def test_sweep_is_deterministic(siv):
    grid = TimeGrid.uniform(10.0, 0.02)
    a = temperature_sweep(siv, [3.0, 30.0], grid)
    b = temperature_sweep(siv, [3.0, 30.0], grid)
    assert sweep_to_csv(a) == sweep_to_csv(b)


def test_sweep_temperatures():
    T = sweep_temperatures()
    assert T[0] == pytest.approx(0.01) and T[-1] == pytest.approx(300.0)
    assert np.allclose(np.diff(np.log(T)), np.log(T[1] / T[0]))
    with pytest.raises(ValueError):
        sweep_temperatures(spacing="cubic")


def test_siv_room_temperature_markovian_and_low_temperature_plateau(siv_traces):
    nc = {T: nm_coherence(tr.C) for T, tr in siv_traces.items()}
    assert nc[300.0] < 0.02
    assert abs(nc[0.01] - nc[1.0]) < 0.1


def test_siv_blp_decreases_to_room_temperature(siv_traces):
    blp = [nm_blp(trace_distance_dephasing(siv_traces[T].Gamma)) for T in (0.01, 10.0, 300.0)]
    assert blp[0] > blp[1] > blp[2]


def test_single_temperature_sweep_matches_trace(siv, siv_traces, grid300):
    (rep,) = temperature_sweep(siv, [300.0], grid300, measures=("nc",))
    assert rep.N_C == nm_coherence(siv_traces[300.0].C)


def test_all_measures_tuple():
    assert set(ALL_MEASURES) == {"nc", "ngamma", "nblp"}
    assert NMReport(1.0, None, None, None, 1.0, 0.1, "x").ok
