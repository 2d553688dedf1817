"""Sparse direct LU solver with matching, nested dissection and supernodes."""

from .core import (NONE, CscMatrix, MatrixMarketError, ScalingPair, SparsityPattern, apply_transform,
                   dominance_profile, read_matrix_market, symmetrized_pattern, write_matrix_market)
from .matching import (MatchingResult, StructurallySingularError, maximum_cardinality_matching,
                       maximum_weight_matching)
from .numeric import SupernodalFactor, factorize, refactorize_incremental
from .ordering import OrderingResult, minimum_degree, nested_dissection, order
from .pipeline import Analysis, SolverConfig, analyze, factorize_analysis
from .symbolic import SymbolicFactor, elimination_tree, fill_pattern, supernode_partition, symbolic_factor
from .trisolve import SolveReport, SolveWorkspace, ZeroPivotError, backward, forward, relative_residual, \
    solve, solve_factored

__all__ = [
    "NONE", "CscMatrix", "MatrixMarketError", "ScalingPair", "SparsityPattern", "apply_transform",
    "dominance_profile", "read_matrix_market", "symmetrized_pattern", "write_matrix_market",
    "MatchingResult", "StructurallySingularError", "maximum_cardinality_matching",
    "maximum_weight_matching", "SupernodalFactor", "factorize", "refactorize_incremental",
    "OrderingResult", "minimum_degree", "nested_dissection", "order", "Analysis", "SolverConfig",
    "analyze", "factorize_analysis", "SymbolicFactor", "elimination_tree", "fill_pattern",
    "supernode_partition", "symbolic_factor", "SolveReport", "SolveWorkspace", "ZeroPivotError",
    "backward", "forward", "relative_residual", "solve", "solve_factored",
]
