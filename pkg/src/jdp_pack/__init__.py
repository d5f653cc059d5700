"""Jointly differentially private packing-LP solver and audit harness."""

from .instance import Allocation, PackingInstance, generate, load, save, validate
from .noise import TruncatedLaplace
from .solver import (
    DerivedConstants,
    PrivacyParams,
    RoundRecord,
    SolveResult,
    SolverConfig,
    privacy_spent,
    scale_to_feasible,
    solve,
)
from .baseline import OracleResult, fixed_step_mwu, knapsack_oracle, nonprivate_mwu

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "DerivedConstants",
    "OracleResult",
    "PackingInstance",
    "PrivacyParams",
    "RoundRecord",
    "SolveResult",
    "SolverConfig",
    "TruncatedLaplace",
    "fixed_step_mwu",
    "generate",
    "knapsack_oracle",
    "load",
    "nonprivate_mwu",
    "privacy_spent",
    "save",
    "scale_to_feasible",
    "solve",
    "validate",
]
