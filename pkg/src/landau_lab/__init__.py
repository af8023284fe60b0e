"""
landau_lab: pseudo-spectral simulation of 1D kinetic free-transport dynamics
with a self-consistent electrostatic force, Gevrey-weighted norm diagnostics,
and quantitative plasma-echo models.
"""

__version__ = "0.1.0"

from .spectral import (Frame, ForceField, PhaseSpaceField, Rep, SpatialDensity,
                       SpectralGrid, density, eta_derivative, glide, l2_norm,
                       mass, poisson_force, read_snapshot, spectral_eval,
                       transform, write_snapshot)
from .solutions import (BumpProfile, band_limited_bump, single_mode_data,
                        traveling_waves, two_wave_data)
from .dynamics import (RunRecord, SimConfig, SimState, run, step_free_transport,
                       step_kick, strang_step, validity_window)
from .weights import (AdmissibilityResult, BoundSweep, ConstraintViolation,
                      CutoffWeight, EnergyReport, GevreyParams, WeightOverflow,
                      auto_weight_constant, check_initial_data, constraint_table,
                      cutoff_weight, density_bound_constant, density_energy,
                      derive_params, distribution_energy, exp_decay_bound_check,
                      stability_monitor, subadditivity_check, volterra_kernel,
                      z_parameter)
from .echoes import (BandEnergyTracker, EchoPrediction, FrozenFieldBackground,
                     GrowthFactor, SimulationBackground, TruncatedGrowth,
                     VolterraState, echo_chain_times, growth_factor,
                     measure_echo, model_cutoff_frequency, model_gevrey_exponent,
                     predict_echo, transport_growth_check, truncated_growth,
                     volterra_solve)
