"""Command-line driver: ``sparsedirect analyze|solve|bench <matrix.mtx> [flags]``."""

from __future__ import annotations

import argparse
import csv
import gc
import json
import sys
import time
from pathlib import Path

import numpy as np

from .core import MatrixMarketError, dominance_profile, dump_vector, load_vector, read_matrix_market
from .matching import StructurallySingularError
from .numeric import factorize, refactorize_incremental
from .pipeline import SolverConfig, analyze, factorize_analysis
from .symbolic import supernode_histogram
from .trisolve import relative_residual, solve_factored

SCHEMA = 1
EXIT_OK, EXIT_PARSE, EXIT_SINGULAR, EXIT_RESIDUAL = 0, 2, 3, 4

BENCH_HELP = """\
bench writes CSV with columns
  k              number of perturbed columns
  closure_size   columns recomputed (ancestor closure of the perturbed set)
  t_incremental  seconds for the incremental refactorization
  t_full         seconds for a full factorization of the same values
k runs over 0, 1, 2, 4, ... and always ends with k = n."""


def _on_off(s: str) -> bool:
    if s not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return s == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsedirect", description="Sparse direct LU solver.",
                                     epilog=BENCH_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("analyze", "matching, ordering and symbolic analysis"),
                        ("solve", "full solve with residual check"),
                        ("bench", "full vs incremental refactorization timings (CSV)")):
        p = sub.add_parser(name, help=help_, epilog=BENCH_HELP if name == "bench" else None,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("matrix", help="Matrix Market file")
        p.add_argument("--matching", type=_on_off, default=True, metavar="on|off")
        p.add_argument("--ordering", choices=("nd", "md", "natural"), default="nd")
        p.add_argument("--nd-leaf-size", type=int, default=64, metavar="N")
        p.add_argument("--threads", type=int, default=1, metavar="N")
        p.add_argument("--report", metavar="JSON", help="write the JSON report here (default: stdout)")
        if name == "analyze":
            p.add_argument("--dump-dominance", metavar="CSV",
                           help="write sorted dominance profiles before/after matching")
        if name == "solve":
            p.add_argument("--rhs", default="ones", help="'ones' or a file with one value per line")
            p.add_argument("--residual-tol", type=float, default=1e-6, metavar="X")
            p.add_argument("--output", "-o", metavar="FILE", help="solution file (default: <matrix>.sol)")
        if name == "bench":
            p.add_argument("--seed", type=int, default=42)
            p.add_argument("--repeats", type=int, default=3, help="timings are the minimum over repeats")
            p.add_argument("--csv", metavar="FILE", help="write the CSV here (default: stdout)")
    return parser


def _config(args) -> SolverConfig:
    return SolverConfig(matching=args.matching, ordering=args.ordering,
                        nd_leaf_size=args.nd_leaf_size, threads=args.threads)


def _emit_report(report: dict, path) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _base_report(path, a, config: SolverConfig) -> dict:
    return {"schema": SCHEMA, "matrix": Path(path).name, "n": a.n, "nnz": a.nnz,
            "matching": config.matching, "ordering": config.ordering, "threads": config.threads}


def _analysis_fields(an) -> dict:
    sn = an.symbolic.supernodes
    before = dominance_profile(an.matrix)
    after = dominance_profile(an.transformed)
    return {
        "parent": an.symbolic.forest.parent.tolist(),
        "nnz_l": int(an.symbolic.nnz_l),
        "nnz_lu": int(an.symbolic.nnz_lu),
        "fill_count": int(an.symbolic.nnz_lu - an.matrix.nnz),
        "fill_factor": an.fill_factor,
        "supernode_count": int(sn.count),
        "supernode_max_size": int(sn.sizes.max(initial=0)),
        "supernode_histogram": {str(k): v for k, v in sorted(supernode_histogram(sn).items())},
        "dominant_rows_before": int((before > 0.5).sum()),
        "dominant_rows_after": int((after > 0.5).sum()),
    }


def _load(path):
    return read_matrix_market(path)


def cmd_analyze(args) -> int:
    a = _load(args.matrix)
    config = _config(args)
    report = _base_report(args.matrix, a, config)
    an = analyze(a, config)
    report.update(_analysis_fields(an))
    report["timings"] = an.timings
    if args.dump_dominance:
        before = np.sort(dominance_profile(an.matrix))[::-1]
        after = np.sort(dominance_profile(an.transformed))[::-1]
        with open(args.dump_dominance, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rank", "before", "after"])
            for i in range(a.n):
                w.writerow([i, repr(float(before[i])), repr(float(after[i]))])
    _emit_report(report, args.report)
    return EXIT_OK


def cmd_solve(args) -> int:
    a = _load(args.matrix)
    config = _config(args)
    if args.rhs == "ones":
        b = np.ones(a.n)
    else:
        b = load_vector(Path(args.rhs).read_text(), a.n)
    report = _base_report(args.matrix, a, config)
    an = analyze(a, config)
    f = factorize_analysis(an, config)
    t = time.perf_counter()
    x = solve_factored(f, b, config.threads)
    an.timings["solve"] = time.perf_counter() - t
    res = relative_residual(a, x, b)
    report.update(_analysis_fields(an))
    report.update({"perturbations": f.perturbations, "residual": res,
                   "residual_tol": args.residual_tol, "timings": an.timings})
    out = args.output or str(Path(args.matrix).with_suffix(".sol"))
    Path(out).write_text(dump_vector(x))
    report["solution"] = out
    _emit_report(report, args.report)
    if not res <= args.residual_tol:
        print(f"residual {res:.3e} exceeds tolerance {args.residual_tol:.3e}", file=sys.stderr)
        return EXIT_RESIDUAL
    return EXIT_OK


def bench_sweep(n: int) -> list[int]:
    ks = [0]
    k = 1
    while k < n:
        ks.append(k)
        k *= 2
    ks.append(n)
    return ks


def incremental_sweep(an, base, seed: int = 42, repeats: int = 3, threads: int = 1,
                      full_repeats: int | None = None):
    """Rows ``(k, changed, incremental, full, t_incremental, t_full)`` of the bench sweep.

    The changed sets are nested prefixes of one seeded random column order;
    the values of every entry in those columns are scaled by a random factor
    in ``[0.9, 1.1]``.  Repetitions go round-robin over the whole sweep and
    each timing is the minimum over them, so a transient slowdown of the
    machine cannot distort a single point.  The garbage collector is off
    while timing.  ``full_repeats`` (default ``repeats``) bounds how many of
    the passes also time the full factorization.
    """
    ahat = an.transformed
    rng = np.random.default_rng(seed)
    order = rng.permutation(ahat.n)
    cols = ahat.col_indices()
    cases = []
    for k in bench_sweep(ahat.n):
        changed = np.sort(order[:k])
        mask = np.isin(cols, changed)
        vals = ahat.values.copy()
        vals[mask] *= 1.0 + 0.1 * rng.uniform(-1.0, 1.0, int(mask.sum()))
        cases.append((k, changed, ahat.with_values(vals)))
    t_inc = [float("inf")] * len(cases)
    t_full = [float("inf")] * len(cases)
    results: list = [None] * len(cases)
    full_repeats = repeats if full_repeats is None else full_repeats
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for rep in range(max(repeats, 1)):
            for idx, (k, changed, a2) in enumerate(cases):
                t = time.perf_counter()
                g = refactorize_incremental(base, a2, changed)
                t_inc[idx] = min(t_inc[idx], time.perf_counter() - t)
                if rep < max(full_repeats, 1):
                    t = time.perf_counter()
                    full = factorize(a2, an.symbolic, layout=base.layout, workers=threads)
                    t_full[idx] = min(t_full[idx], time.perf_counter() - t)
                    results[idx] = (g, full)
    finally:
        if gc_was_enabled:
            gc.enable()
    return [(k, changed, *results[idx], t_inc[idx], t_full[idx])
            for idx, (k, changed, _) in enumerate(cases)]


def cmd_bench(args) -> int:
    a = _load(args.matrix)
    config = _config(args)
    an = analyze(a, config)
    base = factorize_analysis(an, config)
    rows = [(k, int(g.recomputed.size), ti, tf)
            for k, _, g, _, ti, tf in incremental_sweep(an, base, args.seed, args.repeats, config.threads)]
    fh = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["k", "closure_size", "t_incremental", "t_full"])
        for k, c, ti, tf in rows:
            w.writerow([k, c, f"{ti:.6e}", f"{tf:.6e}"])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"analyze": cmd_analyze, "solve": cmd_solve, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except (MatrixMarketError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except StructurallySingularError as exc:
        report = {"schema": SCHEMA, "matrix": Path(args.matrix).name, "error": "structurally singular",
                  "cardinality": exc.cardinality, "n": exc.n}
        _emit_report(report, getattr(args, "report", None))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
