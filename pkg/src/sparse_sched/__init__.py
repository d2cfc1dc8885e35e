"""Sparse time-varying actuator scheduling for discrete-time linear systems."""
from .baselines import greedy_trace_max_schedule, random_schedule, random_schedule_ensemble_energy
from .greedy import (
    GreedyConfig,
    GreedyDiagnostics,
    RankDeficientSchedule,
    feasible_candidates,
    flatten_schedule,
    greedy_inner,
    greedy_schedule,
    greedy_schedule_time_invariant,
    schedule_from_selection,
)
from .lds_model import (
    ActuatorSchedule,
    GramianState,
    LinearSystem,
    controllability_matrix,
    epsilon_auxiliary_energy,
    gramian,
    horizon_bounds,
    is_sparse_controllable,
    minimal_polynomial_degree,
    numerical_rank,
)
from .synthesis import InputSequence, Trajectory, control_energy, min_energy_inputs, simulate

__version__ = "0.1.0"

__all__ = [
    "ActuatorSchedule",
    "GramianState",
    "GreedyConfig",
    "GreedyDiagnostics",
    "InputSequence",
    "LinearSystem",
    "RankDeficientSchedule",
    "Trajectory",
    "control_energy",
    "controllability_matrix",
    "epsilon_auxiliary_energy",
    "feasible_candidates",
    "flatten_schedule",
    "gramian",
    "greedy_inner",
    "greedy_schedule",
    "greedy_schedule_time_invariant",
    "greedy_trace_max_schedule",
    "horizon_bounds",
    "is_sparse_controllable",
    "min_energy_inputs",
    "minimal_polynomial_degree",
    "numerical_rank",
    "random_schedule",
    "random_schedule_ensemble_energy",
    "schedule_from_selection",
    "simulate",
]
