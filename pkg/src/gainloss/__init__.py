"""Mixed-state dynamics under complex Hamiltonians with balanced gain and loss."""

__version__ = "0.1.0"

from .dynamics import (
    evolution_speed,
    observable_rate,
    propagate_exact,
    propagate_exact_log,
    propagate_noise_unitary,
    pure_rhs,
    purity_rate,
    rhs,
    rhs_double_bracket,
)
from .experiments import find_equilibrium, order_parameter, standard_model, sweep
from .integrator import IntegratorConfig, Trajectory, integrate
from .spectral import Phase, analyze, evolve_eigenbasis, expand, predict_attractor, stationary_set
from .state import (
    DensityMatrix,
    GainLossModel,
    Observable,
    PureState,
    density_from_pure,
    expectation,
    gamma_variance,
    purity,
    validate_density,
)

__all__ = [
    "DensityMatrix", "GainLossModel", "IntegratorConfig", "Observable", "Phase", "PureState",
    "Trajectory", "analyze", "density_from_pure", "evolution_speed", "evolve_eigenbasis",
    "expand", "expectation", "find_equilibrium", "gamma_variance", "integrate",
    "observable_rate", "order_parameter", "predict_attractor", "propagate_exact",
    "propagate_exact_log", "propagate_noise_unitary", "pure_rhs", "purity", "purity_rate",
    "rhs", "rhs_double_bracket", "standard_model", "stationary_set", "sweep",
    "validate_density",
]
