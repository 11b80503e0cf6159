"""Thermal min-max games: replica predictions and finite-size simulations.

Submodules
----------
scalar_tools
    Gaussian special functions, truncated moments and quadrature rules.
zero_temperature
    Threshold equations and observables of the Nash equilibrium limit.
finite_temperature
    Self-consistent overlaps and free energy at two inverse temperatures.
game_ensemble
    Random payoff sampling and exact equilibria by linear programming.
ais_estimator
    Annealed importance sampling of the two-temperature partition function.
cli
    Command-line sweeps, comparisons and figure data.
"""

__version__ = "0.1.0"

from .finite_temperature import ModelParams, SolverConfig, solve_finite_t
from .game_ensemble import ensemble_run, sample_payoff, solve_matrix_game_lp
from .zero_temperature import solve_zero_t, zero_t_observables
from .ais_estimator import AisConfig, ais_free_energy

__all__ = [
    "__version__",
    "ModelParams",
    "SolverConfig",
    "solve_finite_t",
    "ensemble_run",
    "sample_payoff",
    "solve_matrix_game_lp",
    "solve_zero_t",
    "zero_t_observables",
    "AisConfig",
    "ais_free_energy",
]
