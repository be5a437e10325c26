"""Structured LQR synthesis for continuous-time LTI systems.

Model-based structured policy iteration and its trajectory-data-driven
counterpart that never reads the state matrix, plus scenario fixtures for
a 6-agent diffusive network benchmark.
"""

from .learning import (DataMatrices, ExplorationSignal, PlantHandle,
                       RankDeficientError, RankReport, SrlConfig, check_rank,
                       collect, hide_state_matrix, make_exploration,
                       required_samples, solve_iteration, srl_synthesize)
from .model_based import (BoundReport, ConvergenceError,
                          IterateDestabilizedError, IterationRecord,
                          NotStabilizingError, SynthesisResult,
                          find_stabilizing_gain, kleinman_structured,
                          modified_are_residual, solve_lyapunov,
                          solve_unstructured_lqr, suboptimality_bound)
from .structure import (MembershipReport, SparsityMask, check_membership,
                        off_pattern, on_pattern, structured_gain)
from .system import (CostWeights, InputPolicy, LtiSystem, SimulationDiverged,
                     Trajectory, TruncationWarning, UnstableClosedLoopError,
                     evaluate_cost, evaluate_cost_analytic, is_hurwitz,
                     simulate, spectral_abscissa)

__all__ = [
    "BoundReport", "ConvergenceError", "CostWeights", "DataMatrices",
    "ExplorationSignal", "InputPolicy", "IterateDestabilizedError",
    "IterationRecord", "LtiSystem", "MembershipReport", "NotStabilizingError",
    "PlantHandle", "RankDeficientError", "RankReport", "SimulationDiverged",
    "SparsityMask", "SrlConfig", "SynthesisResult", "Trajectory",
    "TruncationWarning", "UnstableClosedLoopError", "check_membership",
    "check_rank", "collect", "evaluate_cost", "evaluate_cost_analytic",
    "find_stabilizing_gain", "hide_state_matrix", "is_hurwitz",
    "kleinman_structured", "make_exploration", "modified_are_residual",
    "off_pattern", "on_pattern", "required_samples", "simulate",
    "solve_iteration", "solve_lyapunov", "solve_unstructured_lqr",
    "spectral_abscissa", "srl_synthesize", "structured_gain",
]

__version__ = "0.1.0"
