"""Compressed sparse column storage and the pattern/permutation utilities
shared by every stage of the solver.

All indices are 0-based.  Matrix Market files are 1-based and are converted
at the I/O boundary.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

NONE = -1


class MatrixMarketError(ValueError):
    """Raised for malformed or unsupported Matrix Market input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """Square sparse pattern in CSC layout (no values)."""

    n: int
    col_ptr: np.ndarray
    row_idx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "col_ptr", _frozen(self.col_ptr, np.int64))
        object.__setattr__(self, "row_idx", _frozen(self.row_idx, np.int64))
        _check_structure(self.n, self.col_ptr, self.row_idx)

    @property
    def nnz(self) -> int:
        return int(self.col_ptr[-1])

    def column(self, j: int) -> np.ndarray:
        return self.row_idx[self.col_ptr[j]:self.col_ptr[j + 1]]

    def has(self, i: int, j: int) -> bool:
        col = self.column(j)
        k = np.searchsorted(col, i)
        return bool(k < col.size and col[k] == i)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=bool)
        cols = np.repeat(np.arange(self.n), np.diff(self.col_ptr))
        out[self.row_idx, cols] = True
        return out

    @classmethod
    def from_dense(cls, mask) -> "SparsityPattern":
        mask = np.asarray(mask, dtype=bool)
        n = mask.shape[0]
        rows, cols = np.nonzero(mask.T)
        col_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(col_ptr, rows + 1, 1)
        return cls(n, np.cumsum(col_ptr), cols)

    @classmethod
    def from_columns(cls, n: int, columns: Iterable[Iterable[int]]) -> "SparsityPattern":
        col_ptr = [0]
        rows: list[int] = []
        for col in columns:
            rows.extend(sorted(col))
            col_ptr.append(len(rows))
        return cls(n, np.array(col_ptr), np.array(rows, dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.col_ptr, other.col_ptr)
                and np.array_equal(self.row_idx, other.row_idx))

    def __repr__(self):
        return f"SparsityPattern(n={self.n}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class CscMatrix:
    """Square real sparse matrix in compressed sparse column format.

    Row indices are strictly increasing inside each column and no explicit
    zeros or duplicates are stored (use :meth:`from_coo` to normalise raw
    triplets).
    """

    n: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "col_ptr", _frozen(self.col_ptr, np.int64))
        object.__setattr__(self, "row_idx", _frozen(self.row_idx, np.int64))
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        _check_structure(self.n, self.col_ptr, self.row_idx)
        if self.values.shape != self.row_idx.shape:
            raise ValueError("values and row_idx differ in length")

    @property
    def nnz(self) -> int:
        return int(self.col_ptr[-1])

    @property
    def pattern(self) -> SparsityPattern:
        return SparsityPattern(self.n, self.col_ptr, self.row_idx)

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self.row_idx[lo:hi], self.values[lo:hi]

    def col_indices(self) -> np.ndarray:
        """Column index of every stored entry."""
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.col_ptr))

    def get(self, i: int, j: int) -> float:
        rows, vals = self.column(j)
        k = np.searchsorted(rows, i)
        if k < rows.size and rows[k] == i:
            return float(vals[k])
        return 0.0

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n)
        cols = self.col_indices()
        on = self.row_idx == cols
        d[cols[on]] = self.values[on]
        return d

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.row_idx, self.col_indices()] = self.values
        return out

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.nnz else 0.0

    def transpose(self) -> "CscMatrix":
        return CscMatrix.from_coo(self.n, self.col_indices(), self.row_idx, self.values)

    def __matmul__(self, x):
        x = np.asarray(x, dtype=np.float64)
        y = np.zeros(self.n)
        np.add.at(y, self.row_idx, self.values * x[self.col_indices()])
        return y

    def with_values(self, values) -> "CscMatrix":
        """Same pattern, new values (explicit zeros are kept so the pattern is preserved)."""
        return CscMatrix(self.n, self.col_ptr, self.row_idx, values)

    @classmethod
    def from_coo(cls, n: int, rows, cols, vals, *, drop_zeros: bool = True) -> "CscMatrix":
        """Build from triplets; duplicates are summed, then zeros dropped."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise ValueError("index out of range")
        key = cols * n + rows
        order = np.argsort(key, kind="stable")
        key, vals = key[order], vals[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(vals, start) if vals.size else vals
        if drop_zeros:
            keep = summed != 0.0
            uniq, summed = uniq[keep], summed[keep]
        r, c = uniq % n, uniq // n
        col_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(col_ptr, c + 1, 1)
        return cls(n, np.cumsum(col_ptr), r, summed)

    @classmethod
    def from_dense(cls, a) -> "CscMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("square 2-d array required")
        r, c = np.nonzero(a)
        return cls.from_coo(a.shape[0], r, c, a[r, c])

    @classmethod
    def identity(cls, n: int) -> "CscMatrix":
        return cls(n, np.arange(n + 1), np.arange(n), np.ones(n))

    def __eq__(self, other):
        if not isinstance(other, CscMatrix):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.col_ptr, other.col_ptr)
                and np.array_equal(self.row_idx, other.row_idx)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"CscMatrix(n={self.n}, nnz={self.nnz})"


def _check_structure(n, col_ptr, row_idx):
    if n < 0:
        raise ValueError("negative dimension")
    if col_ptr.shape != (n + 1,) or col_ptr[0] != 0:
        raise ValueError("col_ptr must have length n+1 and start at 0")
    if np.any(np.diff(col_ptr) < 0) or col_ptr[-1] != row_idx.size:
        raise ValueError("col_ptr must be nondecreasing and end at nnz")
    if row_idx.size:
        if row_idx.min() < 0 or row_idx.max() >= n:
            raise ValueError("row index out of range")
        # strictly increasing within each column
        step = np.diff(row_idx)
        starts = np.zeros(row_idx.size, dtype=bool)
        starts[col_ptr[:-1][np.diff(col_ptr) > 0]] = True
        if np.any((step <= 0) & ~starts[1:]):
            raise ValueError("row indices must be strictly increasing within a column")


@dataclass(frozen=True, eq=False)
class ScalingPair:
    """Positive row and column scalings ``d_r``, ``d_c``."""

    d_r: np.ndarray
    d_c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d_r", _frozen(self.d_r, np.float64))
        object.__setattr__(self, "d_c", _frozen(self.d_c, np.float64))
        if self.d_r.shape != self.d_c.shape:
            raise ValueError("scaling vectors differ in length")
        for d in (self.d_r, self.d_c):
            if not np.all(np.isfinite(d)) or np.any(d <= 0):
                raise ValueError("scalings must be finite and positive")

    @classmethod
    def unit(cls, n: int) -> "ScalingPair":
        return cls(np.ones(n), np.ones(n))

    def reciprocal(self) -> "ScalingPair":
        return ScalingPair(1.0 / self.d_r, 1.0 / self.d_c)


# -- permutations -----------------------------------------------------------
# perm[k] = original index placed at position k

def identity_permutation(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def is_permutation(perm, n: int | None = None) -> bool:
    perm = np.asarray(perm)
    if n is None:
        n = perm.size
    if perm.shape != (n,):
        return False
    seen = np.zeros(n, dtype=bool)
    if perm.size and (perm.min() < 0 or perm.max() >= n):
        return False
    seen[perm] = True
    return bool(seen.all())


def inverse_permutation(perm) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size, dtype=np.int64)
    return inv


def compose_permutations(first, second) -> np.ndarray:
    """Permutation equivalent to applying ``first`` and then ``second``.

    If ``x1 = x[first]`` and ``x2 = x1[second]`` then ``x2 = x[compose(first, second)]``.
    """
    return np.asarray(first, dtype=np.int64)[np.asarray(second, dtype=np.int64)]


# -- pattern / value transforms --------------------------------------------

def symmetrized_pattern(a: CscMatrix | SparsityPattern) -> SparsityPattern:
    """Pattern of ``|A| + |A|^T`` with every diagonal position present."""
    n = a.n
    cols = np.repeat(np.arange(n, dtype=np.int64), np.diff(a.col_ptr))
    rows = a.row_idx
    diag = np.arange(n, dtype=np.int64)
    r = np.concatenate([rows, cols, diag])
    c = np.concatenate([cols, rows, diag])
    key = np.unique(c * n + r)
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(col_ptr, key // n + 1, 1)
    return SparsityPattern(n, np.cumsum(col_ptr), key % n)


def apply_transform(a: CscMatrix, row_perm, col_perm, s: ScalingPair | None = None) -> CscMatrix:
    """Return ``P_r^T D_r A D_c P_c``.

    Entry ``(p, q)`` of the result is ``d_r[i] * a[i, j] * d_c[j]`` with
    ``i = row_perm[p]`` and ``j = col_perm[q]``.
    """
    n = a.n
    row_perm = np.asarray(row_perm, dtype=np.int64)
    col_perm = np.asarray(col_perm, dtype=np.int64)
    if row_perm.shape != (n,) or col_perm.shape != (n,):
        raise ValueError("permutation length does not match matrix")
    cols = a.col_indices()
    vals = a.values
    if s is not None:
        if s.d_r.shape != (n,):
            raise ValueError("scaling length does not match matrix")
        vals = s.d_r[a.row_idx] * vals * s.d_c[cols]
    new_rows = inverse_permutation(row_perm)[a.row_idx]
    new_cols = inverse_permutation(col_perm)[cols]
    key = new_cols * n + new_rows
    order = np.argsort(key, kind="stable")
    key = key[order]
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(col_ptr, key // n + 1, 1)
    return CscMatrix(n, np.cumsum(col_ptr), key % n, vals[order])


def dominance_profile(a: CscMatrix) -> np.ndarray:
    """Relative diagonal dominance ``|a_ii| / sum_j |a_ij|`` of every row.

    Rows without entries get 0.  A value above 1/2 means the row is strictly
    diagonally dominant.
    """
    absval = np.abs(a.values)
    row_sum = np.zeros(a.n)
    np.add.at(row_sum, a.row_idx, absval)
    diag = np.abs(a.diagonal())
    out = np.zeros(a.n)
    nz = row_sum > 0
    out[nz] = diag[nz] / row_sum[nz]
    return np.minimum(out, 1.0)


# -- Matrix Market ----------------------------------------------------------

def load_matrix_market(text: TextIO | str) -> CscMatrix:
    """Parse a Matrix Market ``coordinate`` file (real/integer, general/symmetric).

    ``text`` may be an open text stream or the file contents as a string.
    Duplicate entries are summed and explicit zeros dropped.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    lineno = 0
    header = None
    for raw in text:
        lineno += 1
        header = raw.strip()
        if header:
            break
    if not header:
        raise MatrixMarketError("empty input", lineno or 1)
    tokens = header.split()
    if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("missing '%%MatrixMarket' header", lineno)
    obj, fmt, field, symmetry = (t.lower() for t in tokens[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported object/format '{obj} {fmt}'", lineno)
    if field == "pattern":
        raise MatrixMarketError("pattern-only files carry no values", lineno)
    if field not in ("real", "integer"):
        raise MatrixMarketError(f"unsupported field '{field}'", lineno)
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry '{symmetry}'", lineno)

    size = None
    for raw in text:
        lineno += 1
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        size = line.split()
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    try:
        nrows, ncols, nnz = (int(t) for t in size)
    except ValueError:
        raise MatrixMarketError("size line must hold three integers", lineno) from None
    if nrows != ncols:
        raise MatrixMarketError(f"matrix is not square ({nrows}x{ncols})", lineno)
    if nrows < 0 or nnz < 0:
        raise MatrixMarketError("negative size", lineno)

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    k = 0
    for raw in text:
        lineno += 1
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if k >= nnz:
            raise MatrixMarketError(f"more than {nnz} entries", lineno)
        parts = line.split()
        if len(parts) != 3:
            raise MatrixMarketError("entry must be 'row col value'", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            v = float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"cannot parse entry '{line}'", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range", lineno)
        if symmetry == "symmetric" and i < j:
            raise MatrixMarketError("symmetric file has an entry above the diagonal", lineno)
        rows[k], cols[k], vals[k] = i - 1, j - 1, v
        k += 1
    if k != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {k}", lineno)

    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return CscMatrix.from_coo(nrows, rows, cols, vals)


def read_matrix_market(path) -> CscMatrix:
    with open(path) as fh:
        return load_matrix_market(fh)


def dump_matrix_market(a: CscMatrix, comment: str | None = None) -> str:
    """Serialise as ``coordinate real general`` (round-trips exactly)."""
    out = ["%%MatrixMarket matrix coordinate real general"]
    if comment:
        out.extend(f"% {line}" for line in comment.splitlines())
    out.append(f"{a.n} {a.n} {a.nnz}")
    cols = a.col_indices()
    out.extend(f"{i + 1} {j + 1} {v!r}" for i, j, v in
               zip(a.row_idx.tolist(), cols.tolist(), a.values.tolist()))
    return "\n".join(out) + "\n"


def write_matrix_market(path, a: CscMatrix, comment: str | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(dump_matrix_market(a, comment))


def load_vector(text: TextIO | str, n: int | None = None) -> np.ndarray:
    """Plain-text vector, one value per line (blank and ``%``/``#`` lines ignored)."""
    if isinstance(text, str):
        text = io.StringIO(text)
    vals = []
    for lineno, raw in enumerate(text, 1):
        line = raw.strip()
        if not line or line[0] in "%#":
            continue
        try:
            vals.append(float(line))
        except ValueError:
            raise MatrixMarketError(f"cannot parse vector value '{line}'", lineno) from None
    out = np.array(vals)
    if n is not None and out.size != n:
        raise MatrixMarketError(f"vector has {out.size} values, expected {n}")
    return out


def dump_vector(x) -> str:
    return "".join(f"{v!r}\n" for v in np.asarray(x, dtype=np.float64).tolist())
