"""Small matrices used throughout the tests, the docs and the CLI bench."""

from __future__ import annotations

import numpy as np

from .core import CscMatrix

# 6x6 example with perfect matching {(1,2),(2,4),(3,5),(4,1),(5,3),(6,6)} (1-based)
MATCHING_EXAMPLE = np.array([
    [1, 3, 0, 2, 0, 0],
    [3, 0, 0, 4, 0, 1],
    [0, 0, 0, 0, 3, 0],
    [2, 4, 0, 0, 1, 0],
    [0, 0, 3, 1, 0, 0],
    [0, 1, 0, 0, 0, 2],
], dtype=float)

# 6x6 example already ordered as V1 = {1,2}, V2 = {3,4}, Vs = {5,6} (1-based)
PARTITION_EXAMPLE = np.array([
    [2, 0, 0, 0, 4, 1],
    [0, 3, 0, 0, 0, 1],
    [0, 0, 3, 0, 0, 0],
    [0, 0, 0, 2, 1, 0],
    [1, 0, 0, 0, 3, 2],
    [3, 0, 0, 1, 0, 4],
], dtype=float)


def matching_example() -> CscMatrix:
    return CscMatrix.from_dense(MATCHING_EXAMPLE)


def partition_example() -> CscMatrix:
    return CscMatrix.from_dense(PARTITION_EXAMPLE)


def grid_laplacian(m: int, k: int | None = None) -> CscMatrix:
    """5-point Laplacian on an ``m x k`` grid (natural row-major numbering)."""
    k = m if k is None else k
    n = m * k
    idx = np.arange(n).reshape(m, k)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [np.full(n, 4.0)]
    for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
        a, b = a.ravel(), b.ravel()
        rows += [a, b]
        cols += [b, a]
        vals += [np.full(a.size, -1.0)] * 2
    return CscMatrix.from_coo(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def random_sparse(n: int, density: float, rng: np.random.Generator, *,
                  diag: bool = False) -> CscMatrix:
    mask = rng.random((n, n)) < density
    if diag:
        np.fill_diagonal(mask, True)
    vals = rng.standard_normal((n, n)) * mask
    return CscMatrix.from_dense(vals)


def random_dominant(n: int, density: float, rng: np.random.Generator) -> CscMatrix:
    """Random nonsymmetric, strictly row and column diagonally dominant matrix."""
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    a = rng.uniform(-1.0, 1.0, (n, n)) * mask
    d = np.maximum(np.abs(a).sum(axis=0), np.abs(a).sum(axis=1)) + rng.uniform(0.5, 1.5, n)
    a[np.diag_indices(n)] = d * rng.choice([-1.0, 1.0], n)
    return CscMatrix.from_dense(a)


def random_nonsingular(n: int, density: float, rng: np.random.Generator) -> CscMatrix:
    """Structurally nonsingular random matrix with a hidden permuted diagonal
    and entries spread over many orders of magnitude."""
    mask = rng.random((n, n)) < density
    perm = rng.permutation(n)
    mask[perm, np.arange(n)] = True
    mag = 10.0 ** rng.uniform(-6, 6, (n, n))
    a = mag * rng.choice([-1.0, 1.0], (n, n)) * mask
    return CscMatrix.from_dense(a)


def badly_scaled_unsymmetric(n: int = 479, seed: int = 0) -> CscMatrix:
    """Stand-in for a chemical-process flowsheet matrix.

    Block-banded coupling between consecutive "units", many structurally zero
    diagonal entries, and coefficients spanning ten orders of magnitude.  It
    exercises the same code paths as such matrices but is not one.
    """
    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    perm = rng.permutation(n)
    for j in range(n):
        # a guaranteed transversal that avoids the diagonal for most columns
        i = perm[j]
        rows.append(i)
        cols.append(j)
        vals.append(rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-2, 4))
        for _ in range(rng.integers(1, 4)):
            i = int(np.clip(j + rng.integers(-8, 9), 0, n - 1))
            rows.append(i)
            cols.append(j)
            vals.append(rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-5, 5))
    a = CscMatrix.from_coo(n, rows, cols, vals)
    return a
