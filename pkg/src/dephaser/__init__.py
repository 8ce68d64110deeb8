"""Dephasing dynamics and non-Markovianity measures for two-level systems in
structured phonon baths."""

__version__ = "0.1.0"

from .units import KB_OVER_HBAR, DomainError, bose_occupation, thermal_coth
from .spectral import (Bulk, GaussLocal, LorentzLocal, Ohmic, SpectralDensity, Tabulated,
                       builtin_nv, builtin_siv, component_integral, load_tabulated, ohmic)
from .quadrature import QuadResult, QuadSpec, QuadratureError, integrate, integrate_oscillatory
from .dephasing import (BathConfig, DephasingTrace, TimeGrid, coherence_trace, exponent,
                        exponent_bound, gamma_rate, rates_and_exponents,
                        sign_change_temperature)
from .measures import (NMReport, measure_report, nm_blp, nm_coherence, nm_gamma, nm_rhp,
                       temperature_sweep, trace_distance_dephasing)
from .weakcoupling import (DrivenSystem, FilteredTrace, FilterBreakdownError, exponents,
                           filter_S, filtered_coherence, rate_xi)
from .polaron import (PolaronSolution, f_weight, renorm_factor, solve_full,
                      solve_variational)
from .toymodel import CoherentModeModel, fock_oracle, toy_coherence
