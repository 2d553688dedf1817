"""Small dense kernels used on supernodal panels.

They avoid BLAS on purpose: every reduction runs in a fixed order, so the
result does not depend on threading inside a linear-algebra library.
"""

from __future__ import annotations

import numpy as np


def gemm_nt(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ b.T`` with a fixed summation order."""
    return np.einsum("ik,jk->ij", a, b, optimize=False)


def gemm_nt_sub(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> None:
    """``c -= a @ b.T`` in place."""
    if a.shape[1] == 0 or c.size == 0:
        return
    c -= gemm_nt(a, b)


def lu_nopivot(d: np.ndarray, eps: float) -> list[int]:
    """In-place LU of a square block without row exchanges.

    On return the strict lower part holds ``L`` (unit diagonal implied) and
    the upper part holds ``U``.  A pivot smaller than ``eps`` in magnitude is
    replaced by ``sign(pivot) * eps`` (``+eps`` for an exact zero); the
    indices of those pivots are returned.
    """
    m = d.shape[0]
    perturbed = []
    for k in range(m):
        piv = d[k, k]
        if abs(piv) < eps:
            piv = eps if piv >= 0 else -eps
            d[k, k] = piv
            perturbed.append(k)
        if k + 1 < m:
            d[k + 1:, k] /= piv
            d[k + 1:, k + 1:] -= np.multiply.outer(d[k + 1:, k], d[k, k + 1:])
    return perturbed


def solve_upper_right(b: np.ndarray, u: np.ndarray) -> None:
    """Overwrite ``b`` with ``x`` solving ``x @ triu(u) = b``."""
    for k in range(u.shape[0]):
        if k:
            b[:, k] -= np.einsum("ik,k->i", b[:, :k], u[:k, k], optimize=False)
        b[:, k] /= u[k, k]


def solve_unit_lower_t_right(b: np.ndarray, l: np.ndarray) -> None:
    """Overwrite ``b`` with ``x`` solving ``x @ L^T = b`` (``L`` unit lower)."""
    for k in range(1, l.shape[0]):
        b[:, k] -= np.einsum("ik,k->i", b[:, :k], l[k, :k], optimize=False)
