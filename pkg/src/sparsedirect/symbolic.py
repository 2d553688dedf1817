"""Symbolic analysis on a symmetric pattern: elimination forest, fill of
``L`` (equal to that of ``U^T``), supernodes and a level schedule of the
forest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NONE, SparsityPattern


@dataclass(frozen=True)
class EliminationForest:
    parent: np.ndarray  # NONE for roots

    @property
    def n(self) -> int:
        return self.parent.size

    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in range(self.n)]
        for j, p in enumerate(self.parent.tolist()):
            if p != NONE:
                kids[p].append(j)
        return kids

    def roots(self) -> np.ndarray:
        return np.flatnonzero(self.parent == NONE)

    def ancestor_closure(self, cols) -> np.ndarray:
        """Sorted set of ``cols`` together with all their ancestors."""
        mark = np.zeros(self.n, dtype=bool)
        parent = self.parent
        for j in cols:
            j = int(j)
            while j != NONE and not mark[j]:
                mark[j] = True
                j = int(parent[j])
        return np.flatnonzero(mark)


@dataclass(frozen=True)
class SupernodePartition:
    sizes: np.ndarray
    xsuper: np.ndarray  # xsuper[m] = first column of supernode m, xsuper[-1] = n

    @classmethod
    def from_sizes(cls, sizes) -> "SupernodePartition":
        sizes = np.asarray(sizes, dtype=np.int64)
        xsuper = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        return cls(sizes, xsuper)

    @property
    def count(self) -> int:
        return self.sizes.size


@dataclass(frozen=True)
class SymbolicFactor:
    """Everything the numeric phase needs about the structure of ``L``/``U^T``.

    ``fill`` is the strictly lower pattern of ``L``; ``U^T`` has the same one.
    """

    pattern: SparsityPattern
    forest: EliminationForest
    fill: SparsityPattern
    supernodes: SupernodePartition

    @property
    def n(self) -> int:
        return self.pattern.n

    @property
    def nnz_l(self) -> int:
        """Strictly lower entries of ``L``."""
        return self.fill.nnz

    @property
    def nnz_lu(self) -> int:
        """Entries of ``L + U`` (diagonal counted once)."""
        return 2 * self.fill.nnz + self.n


def elimination_tree(p: SparsityPattern) -> EliminationForest:
    """Parent array of the elimination forest, with path compression.

    For each column ``k`` and each ``i < k`` in it, walk from ``i`` towards
    the root through the ancestor shortcuts, redirecting them to ``k``; the
    first vertex without a parent gets ``k``.
    """
    n = p.n
    parent = np.full(n, NONE, dtype=np.int64)
    ancestor = np.full(n, NONE, dtype=np.int64)
    col_ptr, row_idx = p.col_ptr, p.row_idx
    for k in range(n):
        for i in row_idx[col_ptr[k]:col_ptr[k + 1]]:
            if i >= k:
                break
            i = int(i)
            while i != NONE and i < k:
                j = int(ancestor[i])
                ancestor[i] = k
                if j == NONE:
                    parent[i] = k
                i = j
    parent.setflags(write=False)
    return EliminationForest(parent)


def _lower_rows(p: SparsityPattern, j: int) -> np.ndarray:
    col = p.column(j)
    return col[np.searchsorted(col, j, side="right"):]


def fill_pattern(p: SparsityPattern, forest: EliminationForest | None = None) -> SparsityPattern:
    """Strictly lower pattern of the factor.

    Column ``j`` starts from the entries of ``A`` below the diagonal, and
    passes everything below its parent on to the parent.
    """
    if forest is None:
        forest = elimination_tree(p)
    cols, _ = _fill_columns(p, forest, track_supernodes=False)
    return SparsityPattern.from_columns(p.n, cols)


def _fill_columns(p: SparsityPattern, forest: EliminationForest, track_supernodes: bool):
    n = p.n
    parent = forest.parent
    pending: list[np.ndarray | None] = [None] * n
    cols: list[np.ndarray] = []
    sizes: list[int] = []
    first_count = 0
    for j in range(n):
        mine = _lower_rows(p, j)
        if pending[j] is not None:
            mine = np.union1d(mine, pending[j])
            pending[j] = None
        cols.append(mine)
        if track_supernodes:
            r = mine.size
            if j > 0 and parent[j - 1] == j and sizes[-1] + r == first_count:
                sizes[-1] += 1
            else:
                sizes.append(1)
                first_count = r
        k = int(parent[j])
        if k != NONE:
            up = mine[mine > k]
            pending[k] = up if pending[k] is None else np.union1d(pending[k], up)
    return cols, sizes


def supernode_partition(p: SparsityPattern, forest: EliminationForest | None = None):
    """Fill pattern together with the maximal fundamental supernodes.

    Column ``j`` continues the current supernode iff ``j`` is the parent of
    ``j - 1`` and it has exactly one entry fewer than its predecessor.
    """
    if forest is None:
        forest = elimination_tree(p)
    cols, sizes = _fill_columns(p, forest, track_supernodes=True)
    return SparsityPattern.from_columns(p.n, cols), SupernodePartition.from_sizes(sizes)


def symbolic_factor(p: SparsityPattern) -> SymbolicFactor:
    forest = elimination_tree(p)
    fill, sn = supernode_partition(p, forest)
    return SymbolicFactor(p, forest, fill, sn)


def subtree_schedule(forest: EliminationForest) -> list[list[int]]:
    """Group columns by height in the forest.

    Leaves form level 0; a column sits one level above its highest child.
    Columns sharing a level are never ancestors of one another, and every
    column comes after all of its descendants.
    """
    n = forest.n
    height = np.zeros(n, dtype=np.int64)
    parent = forest.parent
    for j in range(n):  # children precede parents
        k = parent[j]
        if k != NONE and height[k] < height[j] + 1:
            height[k] = height[j] + 1
    if n == 0:
        return []
    levels: list[list[int]] = [[] for _ in range(int(height.max()) + 1)]
    for j in range(n):
        levels[height[j]].append(j)
    return levels


def supernode_histogram(sn: SupernodePartition) -> dict[int, int]:
    sizes, counts = np.unique(sn.sizes, return_counts=True)
    return {int(s): int(c) for s, c in zip(sizes, counts)}
