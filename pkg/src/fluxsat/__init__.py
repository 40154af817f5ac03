"""Finite-volume, mass-coordinate and minimizing-movement solvers for flux-saturated diffusion."""
from .analytic import (BarrierFamily, BarrierSpec, check_vinequality, fit_k_tilde, jump_extinction_bound,
                       make_barrier, supnorm_bound, traveling_wave, waiting_time_bound)
from .core import (U_FLOOR, BadExponent, EmptyProfile, FluxSatError, Grid, Model, ModelSpec, NegativeDensity,
                   NonPositiveConstant, Profile, VacuumDensity, rescale, validate)
from .diagnostics import (FrontReport, check_comparison, contact_time, front_speed, l1_distance, mass,
                          measure_waiting_time, support_and_jumps)
from .dual import BlowUp, DisconnectedSupport, DualProfile, dual_evolve, from_dual, singular_set, to_dual
from .flux import cost_k, cost_k_star, flux_a, flux_b, flux_h, lagrangian
from .jko import Entropy, JkoConfig, QuantileFn, jko_evolve, jko_run, jko_step, quantiles, transport_cost
from .solver import BoundaryTouched, CflViolation, SolverOptions, Trajectory, evolve, step

__version__ = "0.1.0"
