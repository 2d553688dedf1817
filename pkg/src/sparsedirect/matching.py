"""Bipartite matchings on the row/column graph of a sparse matrix.

``maximum_cardinality_matching`` finds a structural transversal by repeated
augmenting-path search.  ``maximum_weight_matching`` solves the linear-sum
assignment problem with costs ``c_ij = log(colmax_j) - log|a_ij|`` by
shortest augmenting paths (Dijkstra on reduced costs) and turns the final
duals into row/column scalings for which the permuted matrix has unit
diagonal and no entry above one in magnitude.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .core import NONE, CscMatrix, ScalingPair, SparsityPattern, apply_transform, identity_permutation

TINY = 1e-300


class StructurallySingularError(ValueError):
    """No perfect matching exists; ``cardinality`` is the best achievable."""

    def __init__(self, cardinality: int, n: int, message: str | None = None):
        self.cardinality = cardinality
        self.n = n
        super().__init__(message or
                         f"matrix is structurally singular: maximum matching has "
                         f"cardinality {cardinality} < {n}")


@dataclass(frozen=True)
class CardinalityMatching:
    row_for_col: np.ndarray  # NONE where the column is unmatched
    cardinality: int

    @property
    def unmatched_cols(self) -> np.ndarray:
        return np.flatnonzero(self.row_for_col == NONE)

    @property
    def is_perfect(self) -> bool:
        return self.cardinality == self.row_for_col.size


@dataclass(frozen=True)
class MatchingResult:
    """Perfect matching with its assignment duals and derived scalings.

    ``row_for_col[j] = i`` pairs row ``i`` with column ``j``; used as a row
    permutation it moves the matched entries onto the diagonal.
    """

    row_for_col: np.ndarray
    u: np.ndarray
    v: np.ndarray
    scaling: ScalingPair
    column_max: np.ndarray
    tiny_entries: int = 0

    @property
    def n(self) -> int:
        return self.row_for_col.size

    def permuted(self, a: CscMatrix, scaled: bool = True) -> CscMatrix:
        """The matrix with matched entries on the diagonal (optionally scaled)."""
        return apply_transform(a, self.row_for_col, identity_permutation(a.n),
                               self.scaling if scaled else None)


def maximum_cardinality_matching(p: SparsityPattern | CscMatrix) -> CardinalityMatching:
    """Maximum matching of the bipartite row/column graph.

    A cheap greedy pass is followed by one depth-first augmenting-path search
    per unmatched column (Berge's theorem: the matching is maximum once no
    augmenting path is left).
    """
    n = p.n
    col_ptr, row_idx = p.col_ptr, p.row_idx
    row_for_col = np.full(n, NONE, dtype=np.int64)
    col_for_row = np.full(n, NONE, dtype=np.int64)

    for j in range(n):
        for i in row_idx[col_ptr[j]:col_ptr[j + 1]]:
            if col_for_row[i] == NONE:
                col_for_row[i] = j
                row_for_col[j] = i
                break

    visited = np.full(n, -1, dtype=np.int64)
    for j0 in range(n):
        if row_for_col[j0] != NONE:
            continue
        # iterative DFS over columns; stack holds (column, next edge position)
        stack = [(j0, col_ptr[j0])]
        parent_row: dict[int, int] = {}
        found = NONE
        while stack and found == NONE:
            j, pos = stack[-1]
            end = col_ptr[j + 1]
            advanced = False
            while pos < end:
                i = int(row_idx[pos])
                pos += 1
                if visited[i] == j0:
                    continue
                visited[i] = j0
                parent_row[i] = j
                if col_for_row[i] == NONE:
                    found = i
                    break
                stack[-1] = (j, pos)
                stack.append((int(col_for_row[i]), col_ptr[col_for_row[i]]))
                advanced = True
                break
            if found != NONE:
                break
            if not advanced:
                stack.pop()
        if found == NONE:
            continue
        i = found
        while True:
            j = parent_row[i]
            prev = row_for_col[j]
            row_for_col[j] = i
            col_for_row[i] = j
            if j == j0:
                break
            i = int(prev)

    card = int(np.count_nonzero(row_for_col != NONE))
    row_for_col.setflags(write=False)
    return CardinalityMatching(row_for_col, card)


def _costs(a: CscMatrix):
    absval = np.abs(a.values)
    tiny = absval < TINY
    cols = a.col_indices()
    colmax = np.zeros(a.n)
    np.maximum.at(colmax, cols, absval)
    cost = np.full(a.nnz, np.inf)
    ok = ~tiny
    cost[ok] = np.log(colmax[cols[ok]]) - np.log(absval[ok])
    # the column maximum itself has cost exactly 0
    np.maximum(cost, 0.0, out=cost)
    return cost, colmax, int(np.count_nonzero(tiny))


def maximum_weight_matching(a: CscMatrix) -> MatchingResult:
    """Perfect matching maximising the product of matched magnitudes.

    Raises :class:`StructurallySingularError` if no perfect matching exists
    on the entries with magnitude at least ``1e-300``.
    """
    n = a.n
    cost, colmax, tiny = _costs(a)
    col_ptr = a.col_ptr
    row_idx = a.row_idx
    if n and (np.any(colmax < TINY) or np.any(np.bincount(row_idx[np.isfinite(cost)], minlength=n) == 0)):
        raise StructurallySingularError(_cardinality_finite(a, cost), n,
                                        "matrix has an empty row or column")

    u = np.zeros(n)
    v = np.zeros(n)
    for j in range(n):
        c = cost[col_ptr[j]:col_ptr[j + 1]]
        v[j] = c.min() if c.size else 0.0

    row_for_col = np.full(n, NONE, dtype=np.int64)
    col_for_row = np.full(n, NONE, dtype=np.int64)
    # greedy start on tight edges
    for j in range(n):
        lo, hi = col_ptr[j], col_ptr[j + 1]
        for k in range(lo, hi):
            i = row_idx[k]
            if col_for_row[i] == NONE and cost[k] - u[i] - v[j] <= 0.0:
                row_for_col[j] = i
                col_for_row[i] = j
                break

    dist = np.full(n, np.inf)
    pred = np.full(n, NONE, dtype=np.int64)   # column from which row was reached
    done = np.zeros(n, dtype=bool)
    for j0 in range(n):
        if row_for_col[j0] != NONE:
            continue
        touched: list[int] = []
        finalized: list[int] = []
        heap: list[tuple[float, int]] = []

        def relax(j, base):
            vj = v[j]
            for k in range(col_ptr[j], col_ptr[j + 1]):
                ck = cost[k]
                if ck == np.inf:
                    continue
                i = row_idx[k]
                if done[i]:
                    continue
                d = base + max(ck - u[i] - vj, 0.0)
                if d < dist[i]:
                    if dist[i] == np.inf:
                        touched.append(int(i))
                    dist[i] = d
                    pred[i] = j
                    heapq.heappush(heap, (d, int(i)))

        relax(j0, 0.0)
        sink = NONE
        shortest = 0.0
        while heap:
            d, i = heapq.heappop(heap)
            if done[i] or d > dist[i]:
                continue
            done[i] = True
            finalized.append(i)
            if col_for_row[i] == NONE:
                sink, shortest = i, d
                break
            relax(int(col_for_row[i]), d)

        if sink == NONE:
            raise StructurallySingularError(_cardinality_finite(a, cost), n)

        # dual update keeps every reduced cost nonnegative and the path tight
        v[j0] += shortest
        for i in finalized:
            delta = shortest - dist[i]
            u[i] -= delta
            if col_for_row[i] != NONE and i != sink:
                v[col_for_row[i]] += delta

        i = sink
        while True:
            j = int(pred[i])
            prev = row_for_col[j]
            row_for_col[j] = i
            col_for_row[i] = j
            if j == j0:
                break
            i = int(prev)

        for i in touched:
            dist[i] = np.inf
            pred[i] = NONE
            done[i] = False

    scaling = scalings_from_duals(u, v, colmax)
    for arr in (row_for_col, u, v, colmax):
        arr.setflags(write=False)
    return MatchingResult(row_for_col, u, v, scaling, colmax, tiny)


def _cardinality_finite(a: CscMatrix, cost) -> int:
    keep = np.isfinite(cost)
    cols = a.col_indices()[keep]
    rows = a.row_idx[keep]
    order = np.lexsort((rows, cols))
    col_ptr = np.zeros(a.n + 1, dtype=np.int64)
    np.add.at(col_ptr, cols + 1, 1)
    pat = SparsityPattern(a.n, np.cumsum(col_ptr), rows[order])
    return maximum_cardinality_matching(pat).cardinality


def scalings_from_duals(u, v, column_max) -> ScalingPair:
    """``d_r = exp(u)``, ``d_c = exp(v) / column_max``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    column_max = np.asarray(column_max, dtype=np.float64)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("nonfinite dual value: an infinite cost reached a matched edge")
    if np.any(~np.isfinite(column_max)) or np.any(column_max <= 0):
        raise ValueError("column maxima must be finite and positive")
    return ScalingPair(np.exp(u), np.exp(v) / column_max)


def matching_objective(a: CscMatrix, row_for_col) -> float:
    """Product of ``|a[row_for_col[j], j]|`` over all columns."""
    return math.prod(abs(a.get(int(i), j)) for j, i in enumerate(row_for_col))


def log_objective(a: CscMatrix, row_for_col) -> float:
    return float(sum(math.log(abs(a.get(int(i), j))) for j, i in enumerate(row_for_col)))
