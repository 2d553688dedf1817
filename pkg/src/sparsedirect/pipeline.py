"""Analysis pipeline: matching and scaling, ordering, symbolic factorization."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import CscMatrix, ScalingPair, apply_transform, compose_permutations, \
    identity_permutation, symmetrized_pattern
from .matching import MatchingResult, maximum_weight_matching
from .numeric import PANEL_CAP, PIVOT_REL_EPS, Parts, SupernodalFactor, build_parts, factorize
from .ordering import DEFAULT_LEAF_SIZE, OrderingResult, order
from .symbolic import SymbolicFactor, symbolic_factor

ORDERINGS = ("nd", "md", "natural")


@dataclass(frozen=True)
class SolverConfig:
    matching: bool = True
    ordering: str = "nd"
    nd_leaf_size: int = DEFAULT_LEAF_SIZE
    threads: int = 1
    panel_cap: int = PANEL_CAP
    pivot_rel_eps: float = PIVOT_REL_EPS

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        if self.threads < 1 or self.nd_leaf_size < 1 or self.panel_cap < 1:
            raise ValueError("threads, nd_leaf_size and panel_cap must be positive")


@dataclass
class Analysis:
    """Result of everything before numeric factorization.

    The matrix handed to the numeric phase is
    ``apply_transform(matrix, row_perm, col_perm, scaling)``.
    """

    matrix: CscMatrix
    matching: MatchingResult | None
    ordering: OrderingResult
    row_perm: np.ndarray
    col_perm: np.ndarray
    scaling: ScalingPair
    transformed: CscMatrix
    symbolic: SymbolicFactor
    parts: Parts
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def fill_factor(self) -> float:
        return self.symbolic.nnz_lu / self.matrix.nnz if self.matrix.nnz else float("nan")


def analyze(a: CscMatrix, config: SolverConfig | None = None) -> Analysis:
    config = config or SolverConfig()
    n = a.n
    timings = {}
    t = time.perf_counter()
    if config.matching:
        mw = maximum_weight_matching(a)
        row_match, scaling = mw.row_for_col, mw.scaling
    else:
        mw = None
        row_match, scaling = identity_permutation(n), ScalingPair.unit(n)
    matched = apply_transform(a, row_match, identity_permutation(n), scaling)
    timings["matching"] = time.perf_counter() - t

    t = time.perf_counter()
    ordering = order(symmetrized_pattern(matched), config.ordering, config.nd_leaf_size)
    timings["ordering"] = time.perf_counter() - t

    t = time.perf_counter()
    row_perm = compose_permutations(row_match, ordering.perm)
    col_perm = np.asarray(ordering.perm, dtype=np.int64)
    transformed = apply_transform(a, row_perm, col_perm, scaling)
    sym = symbolic_factor(symmetrized_pattern(transformed))
    parts = build_parts(sym, ordering)
    timings["symbolic"] = time.perf_counter() - t
    return Analysis(a, mw, ordering, row_perm, col_perm, scaling, transformed, sym, parts, timings)


def factorize_analysis(an: Analysis, config: SolverConfig | None = None) -> SupernodalFactor:
    config = config or SolverConfig()
    t = time.perf_counter()
    f = factorize(an.transformed, an.symbolic, an.parts, workers=config.threads,
                  panel_cap=config.panel_cap, pivot_rel_eps=config.pivot_rel_eps,
                  perm_row=an.row_perm, perm_col=an.col_perm, scaling=an.scaling)
    an.timings["factorize"] = time.perf_counter() - t
    return f
