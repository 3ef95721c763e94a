"""Mean-field interacting stochastic replicator dynamics on the simplex.

Simulation of N-particle systems and their McKean-Vlasov limit, the
Beta/Dirichlet invariant laws, goodness-of-fit machinery and persistence
diagnostics.
"""

from .errors import (ConfigError, EquilibriumNotInterior, IntegratorBlowup,
                     NoInteriorEquilibrium, NotContractive, RegimeError,
                     ReplicatorError, SimplexError, ToleranceExceeded)
from .invariant import (DirichletParams, FixedPointReport, beta_fixed_point_iterate,
                        beta_s, dirichlet_fixed_point, solve_perturbation, t_map)
from .presets import PS1, PS2, get as preset
from .sde import IntegratorConfig, Trajectory, simulate_single
from .simplex import (MeanSkew, ModelParams, PairwiseKernel, SimplexPoint, check_c1,
                      check_c2, invasion_rates, project_tangent)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "EquilibriumNotInterior", "IntegratorBlowup", "NoInteriorEquilibrium",
    "NotContractive", "RegimeError", "ReplicatorError", "SimplexError", "ToleranceExceeded",
    "DirichletParams", "FixedPointReport", "beta_fixed_point_iterate", "beta_s",
    "dirichlet_fixed_point", "solve_perturbation", "t_map", "PS1", "PS2", "preset",
    "IntegratorConfig", "Trajectory", "simulate_single", "MeanSkew", "ModelParams",
    "PairwiseKernel", "SimplexPoint", "check_c1", "check_c2", "invasion_rates",
    "project_tangent",
]
