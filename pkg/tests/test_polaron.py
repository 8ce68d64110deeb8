import math

import numpy as np
import pytest
from scipy.integrate import quad

from dephaser.dephasing import BathConfig, exponent_bound
from dephaser.measures import sweep_temperatures
from dephaser.polaron import (DEFAULT_TOL, FPT, VPT, f_weight, fixed_point_residual,
                              polaron_shift, polaron_sweep, renorm_factor, solve_full,
                              solve_variational, sweep_to_csv)
from dephaser.spectral import SpectralDensity, ohmic
from dephaser.units import DomainError

OMEGA = 6e-4
DELTA = OMEGA / 2


@pytest.fixture(scope="module")
def sweep(siv):
    return polaron_sweep(siv, sweep_temperatures(0.01, 300.0, 20), OMEGA, DELTA)


def test_weight_examples():
    w = np.geomspace(1e-3, 100, 7)
    np.testing.assert_array_equal(f_weight(w, 0.0, 1.0, 10.0), 1.0)
    assert f_weight(1e9, 1.0, 1.0, 10.0) == pytest.approx(1.0, abs=1e-8)
    # w = w0 makes coth * tanh = 1 at any temperature
    for T in (0.5, 30.0, 300.0):
        assert f_weight(1.0, 1.0, 1.0, T) == pytest.approx(0.5, rel=1e-12)


def test_weight_range(rng):
    w = rng.uniform(1e-3, 50, 500)
    F = f_weight(w, 0.3, 0.5, 7.0)
    assert np.all((F > 0) & (F <= 1))


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0, 1.0), (1.0, -1.0, 1.0, 1.0),
                                  (1.0, 1.0, 0.0, 1.0), (1.0, 1.0, 1.0, 0.0)])
def test_weight_domain(args):
    with pytest.raises(DomainError):
        f_weight(*args)


def test_full_factor_against_dephasing_bound(siv):
    # B = exp(-2 int J/w^2 coth) and the dephasing bound is 4 int J/w^2 coth
    for T in (1.0, 50.0, 300.0):
        B, under = renorm_factor(siv, T)
        assert not under
        assert B == pytest.approx(math.exp(-0.5 * exponent_bound(BathConfig(siv, T))), rel=1e-8)


def test_zero_density():
    empty = SpectralDensity((), 10.0)
    assert renorm_factor(empty, 5.0) == (1.0, False)
    sol = solve_variational(empty, 5.0, 1.0, 0.5)
    assert sol.B == 1.0 and sol.iterations == 1 and sol.converged


def test_ohmic_full_factor_underflows():
    B, under = renorm_factor(ohmic(0.01, 1.0), 10.0)
    assert B == 0.0 and under
    sol = solve_full(ohmic(0.01, 1.0), 10.0, 1.0)
    assert sol.B == 0.0 and sol.Omega_R == 0.0 and sol.underflow


def test_undriven_variational_equals_full(siv):
    for T in (1.0, 100.0):
        v = solve_variational(siv, T, 0.0, DELTA)
        f = solve_full(siv, T, 0.0, DELTA)
        assert v.B == f.B


def test_domain(siv):
    with pytest.raises(DomainError):
        renorm_factor(siv, 0.0)
    with pytest.raises(DomainError):
        solve_variational(siv, 1.0, -1.0)
    with pytest.raises(DomainError):
        solve_variational(siv, 1.0, 1.0, tol=0.0)
    with pytest.raises(DomainError):
        solve_full(siv, 1.0, -1.0)


def test_sweep_invariants(sweep, siv):
    for p in sweep:
        for sol in (p.full, p.variational):
            assert 0.0 <= sol.B <= 1.0
            assert sol.Omega_R == pytest.approx(sol.B * OMEGA, rel=1e-12)
            assert sol.omega0 == pytest.approx(math.hypot(DELTA, sol.Omega_R), rel=1e-12)
        assert p.full.mode == FPT and p.variational.mode == VPT
        assert p.variational.converged and p.variational.residual < DEFAULT_TOL
        assert p.variational.B >= p.full.B


def test_fixed_point_residual(sweep, siv):
    for p in sweep[::4]:
        res = fixed_point_residual(siv, p.variational, p.T, OMEGA, DELTA)
        assert res <= 10 * DEFAULT_TOL
        assert fixed_point_residual(siv, p.full, p.T, OMEGA, DELTA) == 0.0


def test_full_factor_monotone_in_temperature(sweep, siv):
    B = [p.full.B for p in sweep]
    assert np.all(np.diff(B) <= 0)
    b10, b150, b300 = (renorm_factor(siv, T)[0] for T in (10.0, 150.0, 300.0))
    assert b10 >= b150 >= b300


def test_factor_negligible_at_high_temperature(sweep):
    hot = [p for p in sweep if p.T >= 120.0]
    assert hot and all(p.full.B < 0.05 for p in hot)
    assert sweep[0].full.B > 0.3


def test_non_convergence_is_flagged(siv):
    sol = solve_variational(siv, 0.01, 5.0, 0.0, max_iter=1)
    assert not sol.converged
    assert sol.iterations == 1 and sol.residual > DEFAULT_TOL


def test_strong_drive_converges(siv):
    # a drive comparable to the phonon frequencies makes F visibly < 1
    sol = solve_variational(siv, 10.0, 5.0, 0.0)
    full = solve_full(siv, 10.0, 5.0, 0.0)
    assert sol.converged
    assert sol.B > full.B
    assert fixed_point_residual(siv, sol, 10.0, 5.0, 0.0) <= 10 * DEFAULT_TOL


def test_polaron_shift(siv):
    f = lambda w: float(siv.evaluate(w)) / w
    cuts = [0, 3, 9.35, 15.19, 40, 200]
    ref = sum(quad(f, a, b, epsabs=0, epsrel=1e-12, limit=500)[0] for a, b in zip(cuts, cuts[1:]))
    assert polaron_shift(siv) == pytest.approx(-ref, rel=1e-9)
    half = polaron_shift(siv, weight=lambda w: 0.5)
    assert half == pytest.approx(-0.75 * ref, rel=1e-9)


def test_sweep_csv(sweep):
    text = sweep_to_csv(sweep, {"Omega_thz": OMEGA})
    lines = text.splitlines()
    assert lines[0] == f"# Omega_thz: {OMEGA}"
    assert lines[1] == "T_K,B_fpt,B_vpt,Omega_R_thz,iterations"
    assert len(lines) == 2 + len(sweep)
