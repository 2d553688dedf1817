"""Static-pivot supernodal LU with padded dense panels.

Storage follows the classic panel layout: consecutive columns with nested
patterns form a panel whose columns all share one row-index list (the
panel's first column plus everything below it).  Each column is stored with
the full panel height, so the positions above its diagonal are padding
zeros.  ``lnz`` holds ``L`` (unit diagonal stored as 1.0) and ``unz`` holds
``U^T`` in exactly the same layout.

Panels are grouped into *parts* whose updates only touch their own rows and
the trailing *separator*; the separator is processed last.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dense
from .core import NONE, CscMatrix, ScalingPair, identity_permutation
from .ordering import OrderingResult
from .symbolic import SymbolicFactor

PIVOT_REL_EPS = 1e-14
PANEL_CAP = 128


class PatternMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Parts:
    """Column ranges that can be processed independently, plus the separator.

    Columns ``[sep_start, n)`` form the separator.
    """

    ranges: tuple[tuple[int, int], ...]
    sep_start: int


def build_parts(sym: SymbolicFactor, ordering: OrderingResult | None = None) -> Parts:
    """Parts from the top level of a nested-dissection tree.

    Each child range of the root becomes a part and the root separator is the
    serial tail.  Without a dissection tree (or if the fill pattern would let
    a part reach into another part) a single part and an empty separator are
    returned.
    """
    n = sym.n
    single = Parts(((0, n),) if n else (), n)
    if ordering is None or ordering.root is None:
        return single
    root = ordering.tree[ordering.root]
    if root.is_leaf or root.start != 0 or root.stop != n:
        return single
    ranges = tuple((ordering.tree[c].start, ordering.tree[c].stop) for c in root.children
                   if ordering.tree[c].stop > ordering.tree[c].start)
    parts = Parts(ranges, root.sep_start)
    return parts if parts_are_isolated(sym, parts) else single


def parts_are_isolated(sym: SymbolicFactor, parts: Parts) -> bool:
    """True if every fill row of a part lies inside the part or the separator."""
    fill = sym.fill
    for lo, hi in parts.ranges:
        rows = fill.row_idx[fill.col_ptr[lo]:fill.col_ptr[hi]]
        if np.any((rows >= hi) & (rows < parts.sep_start)):
            return False
    covered = sum(hi - lo for lo, hi in parts.ranges)
    return covered == parts.sep_start and all(
        a[1] == b[0] for a, b in zip(parts.ranges, parts.ranges[1:]))


@dataclass(frozen=True)
class PanelLayout:
    n: int
    xsuper: np.ndarray          # first column of each panel (+ n)
    xindx: np.ndarray           # start of each panel's row list in indx
    indx: np.ndarray
    xlnz: np.ndarray            # start of each column in lnz / unz
    panel_of_col: np.ndarray
    parts: tuple[tuple[int, int], ...]   # panel ranges
    sep_start: int
    sep_panel: int
    sources: tuple[np.ndarray, ...]     # panels updating each panel, ascending
    levels: tuple[np.ndarray, ...]      # panel tree height levels

    @property
    def npanels(self) -> int:
        return self.xsuper.size - 1

    def rows(self, p: int) -> np.ndarray:
        return self.indx[self.xindx[p]:self.xindx[p + 1]]

    def block(self, values: np.ndarray, p: int) -> np.ndarray:
        """Writable ``h x w`` view of panel ``p`` inside ``values``."""
        c0, c1 = self.xsuper[p], self.xsuper[p + 1]
        h = self.xindx[p + 1] - self.xindx[p]
        return values[self.xlnz[c0]:self.xlnz[c1]].reshape(c1 - c0, h).T

    @property
    def size(self) -> int:
        return int(self.xlnz[-1])


def panel_layout(sym: SymbolicFactor, parts: Parts | None = None,
                 panel_cap: int = PANEL_CAP) -> PanelLayout:
    n = sym.n
    if parts is None:
        parts = Parts(((0, n),) if n else (), n)
    cuts = {0, n, parts.sep_start}
    for lo, hi in parts.ranges:
        cuts.update((lo, hi))
    starts = []
    xs = sym.supernodes.xsuper
    for m in range(xs.size - 1):
        a, b = int(xs[m]), int(xs[m + 1])
        c = a
        while c < b:
            starts.append(c)
            nxt = min(b, c + panel_cap)
            inner = [x for x in cuts if c < x < nxt]
            c = min(inner) if inner else nxt
    xsuper = np.array(starts + [n], dtype=np.int64)
    npan = xsuper.size - 1
    panel_of_col = np.repeat(np.arange(npan, dtype=np.int64), np.diff(xsuper))

    fill = sym.fill
    xindx = np.zeros(npan + 1, dtype=np.int64)
    pieces = []
    xlnz = np.zeros(n + 1, dtype=np.int64)
    for p in range(npan):
        c0, c1 = int(xsuper[p]), int(xsuper[p + 1])
        rows = np.concatenate([[c0], fill.column(c0)]).astype(np.int64)
        pieces.append(rows)
        xindx[p + 1] = xindx[p] + rows.size
        xlnz[c0 + 1:c1 + 1] = xlnz[c0] + rows.size * np.arange(1, c1 - c0 + 1)
    indx = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int64)

    src: list[list[int]] = [[] for _ in range(npan)]
    panel_parent = np.full(npan, NONE, dtype=np.int64)
    for q in range(npan):
        c1 = xsuper[q + 1]
        below = indx[xindx[q]:xindx[q + 1]][c1 - xsuper[q]:]
        targets = np.unique(panel_of_col[below])
        for p in targets.tolist():
            src[p].append(q)
        if below.size:
            panel_parent[q] = panel_of_col[below[0]]
    height = np.zeros(npan, dtype=np.int64)
    for q in range(npan):
        pp = panel_parent[q]
        if pp != NONE:
            height[pp] = max(height[pp], height[q] + 1)
    levels = tuple(np.flatnonzero(height == h) for h in range(int(height.max()) + 1)) if npan else ()

    part_panels = tuple((int(panel_of_col[lo]), int(panel_of_col[hi - 1]) + 1)
                        for lo, hi in parts.ranges)
    sep_panel = int(panel_of_col[parts.sep_start]) if parts.sep_start < n else npan
    return PanelLayout(n, xsuper, xindx, indx, xlnz, panel_of_col, part_panels,
                       parts.sep_start, sep_panel,
                       tuple(np.array(s, dtype=np.int64) for s in src), levels)


@dataclass(frozen=True)
class SupernodalFactor:
    """Numeric ``L`` and ``U`` of a transformed matrix, stored panel-wise.

    ``perm_row``, ``perm_col`` and ``scaling`` record how the factored matrix
    was obtained from the user's matrix: it equals
    ``apply_transform(A, perm_row, perm_col, scaling)``.
    """

    n: int
    layout: PanelLayout
    lnz: np.ndarray
    unz: np.ndarray
    symbolic: SymbolicFactor
    matrix: CscMatrix
    eps_pivot: float
    perturbed: np.ndarray               # per column flag
    pivot_rel_eps: float = PIVOT_REL_EPS
    perm_row: np.ndarray = None
    perm_col: np.ndarray = None
    scaling: ScalingPair | None = None
    recomputed: np.ndarray = field(default=None)
    seconds: float = 0.0

    # -- the index arrays under their customary names
    @property
    def xsuper(self) -> np.ndarray:
        return self.layout.xsuper

    @property
    def xlnz(self) -> np.ndarray:
        return self.layout.xlnz

    @property
    def xindx(self) -> np.ndarray:
        return self.layout.xindx

    @property
    def indx(self) -> np.ndarray:
        return self.layout.indx

    @property
    def parts(self) -> tuple[tuple[int, int], ...]:
        return self.layout.parts

    @property
    def sep_start(self) -> int:
        return self.layout.sep_start

    @property
    def perturbations(self) -> int:
        return int(np.count_nonzero(self.perturbed))

    @property
    def growth(self) -> float:
        amax = self.matrix.max_abs()
        top = max(np.abs(self.lnz).max(initial=0.0), np.abs(self.unz).max(initial=0.0))
        return float(top / amax) if amax else 0.0

    def u_diagonal(self) -> np.ndarray:
        lay = self.layout
        cols = np.arange(self.n)
        first = lay.xsuper[lay.panel_of_col]
        return self.unz[lay.xlnz[cols] + (cols - first)] if self.n else np.zeros(0)

    def l_dense(self) -> np.ndarray:
        return unpack_dense(self.layout, self.lnz)

    def u_dense(self) -> np.ndarray:
        return unpack_dense(self.layout, self.unz).T

    def fill_positions(self) -> list[tuple[int, int]]:
        """Positions that are numerically nonzero in ``L + U`` but absent from the matrix."""
        lu = np.tril(self.l_dense(), -1) + self.u_dense()
        mask = (lu != 0) & ~self.matrix.pattern.to_dense()
        return [tuple(map(int, ij)) for ij in np.argwhere(mask)]


def unpack_dense(layout: PanelLayout, values: np.ndarray) -> np.ndarray:
    """Expand panel storage into a dense ``n x n`` lower-trapezoidal array."""
    out = np.zeros((layout.n, layout.n))
    for p in range(layout.npanels):
        c0, c1 = layout.xsuper[p], layout.xsuper[p + 1]
        out[np.ix_(layout.rows(p), np.arange(c0, c1))] = layout.block(values, p)
    return out


def pack_dense(layout: PanelLayout, lower: np.ndarray) -> np.ndarray:
    """Inverse of :func:`unpack_dense`; entries outside the panels are ignored."""
    values = np.zeros(layout.size)
    for p in range(layout.npanels):
        c0, c1 = layout.xsuper[p], layout.xsuper[p + 1]
        layout.block(values, p)[:] = lower[np.ix_(layout.rows(p), np.arange(c0, c1))]
    return values


class _PanelKernel:
    """Left-looking computation of one panel (or the tail of one)."""

    def __init__(self, layout: PanelLayout, a: CscMatrix, lnz, unz, perturbed, eps):
        self.layout = layout
        self.a = a
        self.at = a.transpose()
        self.lnz = lnz
        self.unz = unz
        self.perturbed = perturbed
        self.eps = eps

    def __call__(self, p: int, start: int | None = None) -> None:
        lay = self.layout
        c0, c1 = int(lay.xsuper[p]), int(lay.xsuper[p + 1])
        if start is None:
            start = c0
        w = c1 - c0
        o = start - c0
        ws = c1 - start
        rows = lay.rows(p)
        h = rows.size
        bl = np.zeros((h - o, ws))
        bu = np.zeros((h - w, ws))

        a, at = self.a, self.at
        for t, j in enumerate(range(start, c1)):
            r, v = a.column(j)
            k = np.searchsorted(r, start)
            bl[np.searchsorted(rows, r[k:]) - o, t] = v[k:]
            r, v = at.column(j)
            k = np.searchsorted(r, c1)
            bu[np.searchsorted(rows, r[k:]) - w, t] = v[k:]

        for q in lay.sources[p].tolist():
            rq = lay.rows(q)
            lo = rq.searchsorted(start)
            mid = rq.searchsorted(c1)
            if lo == mid:
                continue
            lq = lay.block(self.lnz, q)
            uq = lay.block(self.unz, q)
            jpos = rq[lo:mid] - start
            pos = rows.searchsorted(rq[lo:]) - o
            bl[pos[:, None], jpos] -= dense.gemm_nt(lq[lo:], uq[lo:mid])
            if mid < rq.size:
                pos2 = rows.searchsorted(rq[mid:]) - w
                bu[pos2[:, None], jpos] -= dense.gemm_nt(uq[mid:], lq[lo:mid])

        lp = lay.block(self.lnz, p)
        up = lay.block(self.unz, p)
        if o:
            # earlier columns of this same panel act as one more source
            dense.gemm_nt_sub(bl, lp[o:, :o], up[o:w, :o])
            dense.gemm_nt_sub(bu, up[w:, :o], lp[o:w, :o])

        diag = bl[:ws]
        bad = dense.lu_nopivot(diag, self.eps)
        self.perturbed[start:c1] = False
        for k in bad:
            self.perturbed[start + k] = True
        below = bl[ws:]
        dense.solve_upper_right(below, diag)
        dense.solve_unit_lower_t_right(bu, diag)

        lp[:, o:] = 0.0
        up[:, o:] = 0.0
        lp[o:w, o:] = np.tril(diag, -1) + np.eye(ws)
        lp[w:, o:] = below
        up[o:w, o:] = np.triu(diag).T
        up[w:, o:] = bu


def _check_input(a: CscMatrix, sym: SymbolicFactor):
    if a.n != sym.n:
        raise ValueError("matrix and symbolic factor differ in size")
    cols = a.col_indices()
    lo = np.minimum(a.row_idx, cols)
    hi = np.maximum(a.row_idx, cols)
    fill = sym.fill
    for j in np.unique(lo[lo != hi]).tolist():
        need = hi[(lo == j) & (hi != lo)]
        if not np.all(np.isin(need, fill.column(j))):
            raise PatternMismatchError(f"entry in column {j} lies outside the symbolic pattern")


def factorize(a: CscMatrix, sym: SymbolicFactor, parts: Parts | None = None, *,
              workers: int = 1, panel_cap: int = PANEL_CAP,
              pivot_rel_eps: float = PIVOT_REL_EPS,
              perm_row=None, perm_col=None, scaling: ScalingPair | None = None,
              layout: PanelLayout | None = None) -> SupernodalFactor:
    """Numeric factorization ``A = L U`` with static pivots.

    ``a`` must already be matched, scaled and ordered; its pattern has to be
    contained in the symmetric pattern ``sym`` was built from.  Tiny pivots
    are perturbed to ``eps_pivot = pivot_rel_eps * max|a|`` and flagged in
    ``perturbed``.  With ``workers > 1`` independent panels of the panel tree
    are factored concurrently; the arithmetic per panel does not change, so
    the result is bitwise identical to the serial run.
    """
    t0 = time.perf_counter()
    _check_input(a, sym)
    if layout is None:
        layout = panel_layout(sym, parts, panel_cap)
    n = a.n
    lnz = np.zeros(layout.size)
    unz = np.zeros(layout.size)
    perturbed = np.zeros(n, dtype=bool)
    eps = pivot_rel_eps * a.max_abs()
    kernel = _PanelKernel(layout, a, lnz, unz, perturbed, eps)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for level in layout.levels:
                list(pool.map(kernel, level.tolist()))
    else:
        for p in range(layout.npanels):
            kernel(p)
    for arr in (lnz, unz, perturbed):
        arr.setflags(write=False)
    ident = identity_permutation(n)
    return SupernodalFactor(
        n, layout, lnz, unz, sym, a, eps, perturbed, pivot_rel_eps,
        perm_row=ident if perm_row is None else np.asarray(perm_row),
        perm_col=ident if perm_col is None else np.asarray(perm_col),
        scaling=scaling, recomputed=np.arange(n), seconds=time.perf_counter() - t0)


def _pivot_decisions_stable(f: SupernodalFactor, eps: float) -> bool:
    # a reused pivot must be classified the same way under the new threshold
    if f.perturbations:
        return False
    return bool(np.all(np.abs(f.u_diagonal()) >= eps))


def refactorize_incremental(f: SupernodalFactor, a2: CscMatrix, changed_cols) -> SupernodalFactor:
    """Refactor after the values in ``changed_cols`` of the matrix changed.

    Only the ancestor closure (in the elimination forest) of the affected
    columns is recomputed; everything else is reused.  A changed entry
    above the diagonal, ``(i, j)`` with ``i < j``, lands in row ``i`` of
    ``U`` and therefore also seeds column ``i``.
    """
    t0 = time.perf_counter()
    old = f.matrix
    if (a2.n != old.n or not np.array_equal(a2.col_ptr, old.col_ptr)
            or not np.array_equal(a2.row_idx, old.row_idx)):
        raise PatternMismatchError("new matrix does not have the factored pattern")
    changed = sorted({int(j) for j in changed_cols})
    if any(j < 0 or j >= f.n for j in changed):
        raise ValueError("changed column out of range")
    diff_cols = np.unique(a2.col_indices()[a2.values != old.values])
    if not set(diff_cols.tolist()) <= set(changed):
        raise ValueError("values changed outside changed_cols")
    if not changed:
        return replace(f, matrix=a2, recomputed=np.zeros(0, dtype=np.int64),
                       seconds=time.perf_counter() - t0)

    eps = f.pivot_rel_eps * a2.max_abs()
    if eps != f.eps_pivot and not _pivot_decisions_stable(f, eps):
        return factorize(a2, f.symbolic, layout=f.layout, perm_row=f.perm_row,
                         perm_col=f.perm_col, scaling=f.scaling,
                         pivot_rel_eps=f.pivot_rel_eps)

    seeds = set(changed)
    cols = a2.col_indices()
    moved = (a2.values != old.values) & (a2.row_idx < cols)
    seeds.update(a2.row_idx[moved].tolist())
    dirty = f.symbolic.forest.ancestor_closure(sorted(seeds))

    lay = f.layout
    lnz = f.lnz.copy()
    unz = f.unz.copy()
    perturbed = f.perturbed.copy()
    kernel = _PanelKernel(lay, a2, lnz, unz, perturbed, eps)
    panels = lay.panel_of_col[dirty]
    # dirty columns inside a panel form a suffix (panel columns are a chain)
    first = {}
    for p, j in zip(panels.tolist(), dirty.tolist()):
        first.setdefault(p, j)
    for p in sorted(first):
        kernel(p, first[p])
    for arr in (lnz, unz, perturbed):
        arr.setflags(write=False)
    return replace(f, lnz=lnz, unz=unz, matrix=a2, eps_pivot=eps, perturbed=perturbed,
                   recomputed=dirty, seconds=time.perf_counter() - t0)


# -- debug dump -------------------------------------------------------------

def dump_factor(f: SupernodalFactor, json_path, blob_path) -> None:
    """Metadata as JSON; ``lnz`` then ``unz`` as little-endian float64 in the blob."""
    lay = f.layout
    meta = {
        "schema": 1,
        "n": f.n,
        "xsuper": lay.xsuper.tolist(),
        "xlnz": lay.xlnz.tolist(),
        "xindx": lay.xindx.tolist(),
        "indx": lay.indx.tolist(),
        "parts": [list(p) for p in lay.parts],
        "sep_start": lay.sep_start,
        "perturbations": f.perturbations,
        "eps_pivot": f.eps_pivot,
        "values": {"dtype": "<f8", "lnz": [0, lay.size], "unz": [lay.size, 2 * lay.size]},
    }
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=1)
    with open(blob_path, "wb") as fh:
        fh.write(np.asarray(f.lnz, dtype="<f8").tobytes())
        fh.write(np.asarray(f.unz, dtype="<f8").tobytes())


def load_factor_dump(json_path, blob_path) -> tuple[dict, np.ndarray, np.ndarray]:
    with open(json_path) as fh:
        meta = json.load(fh)
    raw = np.fromfile(blob_path, dtype="<f8")
    a, b = meta["values"]["lnz"]
    c, d = meta["values"]["unz"]
    return meta, raw[a:b].astype(np.float64), raw[c:d].astype(np.float64)
