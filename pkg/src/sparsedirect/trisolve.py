"""Forward and backward substitution over a :class:`SupernodalFactor`.

Parts run concurrently.  During the forward sweep a part never writes into
the separator rows of ``r`` directly: its contributions go to its own
column of the temporary array ``t``, which is folded back into ``r`` in
fixed part order before the separator panels are processed serially.  The
backward sweep handles the separator first and then the parts, which only
read separator entries, so it needs no temporaries.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import CscMatrix
from .numeric import SupernodalFactor
from .pipeline import SolverConfig, analyze, factorize_analysis


class ZeroPivotError(ZeroDivisionError):
    def __init__(self, column: int):
        self.column = column
        super().__init__(f"exact zero on the diagonal of U in column {column}")


@dataclass
class SolveWorkspace:
    r: np.ndarray
    t: np.ndarray  # (separator size, number of parts)

    @classmethod
    def for_factor(cls, f: SupernodalFactor, rhs) -> "SolveWorkspace":
        r = np.array(rhs, dtype=np.float64, copy=True)
        if r.shape != (f.n,):
            raise ValueError(f"right-hand side must have length {f.n}")
        nsep = f.n - f.layout.sep_start
        return cls(r, np.zeros((nsep, max(len(f.layout.parts), 1))))


def _map_parts(fn, count: int, workers: int):
    if workers > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
            list(pool.map(fn, range(count)))
    else:
        for k in range(count):
            fn(k)


def forward(f: SupernodalFactor, w: SolveWorkspace, workers: int = 1, writes: list | None = None) -> None:
    """Overwrite ``w.r`` with ``y`` solving ``L y = r``.

    ``writes``, if given, receives one set per part with the indices of
    ``r`` that part wrote to (instrumentation for tests).
    """
    lay = f.layout
    lnz = f.lnz
    r = w.r
    t = w.t
    sep = lay.sep_start
    t[:] = 0.0
    if writes is not None:
        writes[:] = [set() for _ in lay.parts]

    def run_part(k: int) -> None:
        plo, phi = lay.parts[k]
        tk = t[:, k]
        seen = writes[k] if writes is not None else None
        for p in range(plo, phi):
            c0, c1 = int(lay.xsuper[p]), int(lay.xsuper[p + 1])
            rows = lay.rows(p)
            blk = lay.block(lnz, p)
            s = int(np.searchsorted(rows, sep))
            for c, j in enumerate(range(c0, c1)):
                rj = r[j]
                own = rows[c + 1:s]
                r[own] -= rj * blk[c + 1:s, c]
                if s < rows.size:
                    tk[rows[s:] - sep] += rj * blk[s:, c]
                if seen is not None:
                    seen.update(own.tolist())

    _map_parts(run_part, len(lay.parts), workers)
    for k in range(len(lay.parts)):
        r[sep:] -= t[:, k]
    for p in range(lay.sep_panel, lay.npanels):
        c0, c1 = int(lay.xsuper[p]), int(lay.xsuper[p + 1])
        rows = lay.rows(p)
        blk = lay.block(lnz, p)
        for c, j in enumerate(range(c0, c1)):
            r[rows[c + 1:]] -= r[j] * blk[c + 1:, c]


def _backward_panel(lay, unz, r, p: int) -> None:
    c0, c1 = int(lay.xsuper[p]), int(lay.xsuper[p + 1])
    rows = lay.rows(p)
    blk = lay.block(unz, p)
    for c in range(c1 - c0 - 1, -1, -1):
        j = c0 + c
        d = blk[c, c]
        if d == 0.0:
            raise ZeroPivotError(j)
        r[j] = (r[j] - np.dot(blk[c + 1:, c], r[rows[c + 1:]])) / d


def backward(f: SupernodalFactor, w: SolveWorkspace, workers: int = 1) -> None:
    """Overwrite ``w.r`` with ``x`` solving ``U x = r``."""
    lay = f.layout
    unz = f.unz
    r = w.r
    for p in range(lay.npanels - 1, lay.sep_panel - 1, -1):
        _backward_panel(lay, unz, r, p)

    def run_part(k: int) -> None:
        plo, phi = lay.parts[k]
        for p in range(phi - 1, plo - 1, -1):
            _backward_panel(lay, unz, r, p)

    _map_parts(run_part, len(lay.parts), workers)


def solve_factored(f: SupernodalFactor, b, workers: int = 1) -> np.ndarray:
    """Solve ``A x = b`` for the original ``A`` behind the factor.

    The factored matrix is ``P_r^T D_r A D_c P_c``; the right-hand side is
    scaled and permuted on the way in, the solution on the way out.
    """
    b = np.asarray(b, dtype=np.float64)
    d_r = f.scaling.d_r if f.scaling is not None else np.ones(f.n)
    d_c = f.scaling.d_c if f.scaling is not None else np.ones(f.n)
    w = SolveWorkspace.for_factor(f, (d_r * b)[f.perm_row])
    forward(f, w, workers)
    backward(f, w, workers)
    x = np.empty(f.n)
    x[f.perm_col] = d_c[f.perm_col] * w.r
    return x


def relative_residual(a: CscMatrix, x, b) -> float:
    """``||Ax - b||_inf / (max|a_ij| * ||x||_inf + ||b||_inf)``."""
    x = np.asarray(x, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    res = np.abs(a @ x - b).max(initial=0.0)
    den = a.max_abs() * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
    if den == 0.0:
        return 0.0 if res == 0.0 else float("inf")
    return float(res / den)


@dataclass
class SolveReport:
    residual: float
    perturbations: int
    fill_factor: float
    timings: dict[str, float] = field(default_factory=dict)


def solve(a: CscMatrix, b, config: SolverConfig | None = None):
    """Run the whole pipeline and return ``(x, report)``."""
    config = config or SolverConfig()
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (a.n,):
        raise ValueError(f"right-hand side must have length {a.n}")
    an = analyze(a, config)
    f = factorize_analysis(an, config)
    t = time.perf_counter()
    x = solve_factored(f, b, config.threads)
    an.timings["solve"] = time.perf_counter() - t
    return x, SolveReport(relative_residual(a, x, b), f.perturbations, an.fill_factor, dict(an.timings))
