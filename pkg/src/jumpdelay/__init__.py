"""Finite-horizon LQ control of Markov jump linear systems with input delay."""

from .controller import GainSchedule, NotSolvable, control, costate, gains, optimal_cost
from .model import (
    InitialData,
    JumpLinearModel,
    ModelError,
    ModePath,
    enumerate_paths,
    f_product,
    load_model,
    two_mode_example,
    validate_model,
)
from .riccati import RiccatiTables, WNotPositiveDefinite, table_identity_residual, solve_riccati
from .simulate import Trajectory, exact_expected_cost, monte_carlo_cost, rollout, sample_chain

__all__ = [
    "GainSchedule", "InitialData", "JumpLinearModel", "ModePath", "ModelError", "NotSolvable",
    "RiccatiTables", "Trajectory", "WNotPositiveDefinite", "table_identity_residual", "control",
    "costate", "enumerate_paths", "exact_expected_cost", "f_product", "gains", "load_model",
    "monte_carlo_cost", "optimal_cost", "two_mode_example", "rollout", "sample_chain",
    "solve_riccati", "validate_model",
]
