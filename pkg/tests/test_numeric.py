import numpy as np
import pytest

from oracles import lu_nopivot
from sparsedirect import gallery
from sparsedirect.core import CscMatrix, symmetrized_pattern
from sparsedirect.numeric import (Parts, PatternMismatchError, build_parts, dump_factor, factorize,
                                  load_factor_dump, pack_dense, parts_are_isolated, refactorize_incremental)
from sparsedirect.pipeline import SolverConfig, analyze
from sparsedirect.symbolic import symbolic_factor

FIXTURE_PARTS = Parts(((0, 2), (2, 4)), 4)


def factor_of(a, parts=None, **kw):
    return factorize(a, symbolic_factor(symmetrized_pattern(a)), parts, **kw)


def test_identity():
    f = factor_of(CscMatrix.identity(5))
    assert np.array_equal(f.l_dense(), np.eye(5))
    assert np.array_equal(f.u_dense(), np.eye(5))
    assert f.perturbations == 0


def test_fixture_reconstructs_with_single_fill():
    a = gallery.partition_example()
    f = factor_of(a, FIXTURE_PARTS)
    assert np.allclose(f.l_dense() @ f.u_dense(), a.to_dense(), rtol=0, atol=1e-14)
    assert f.fill_positions() == [(5, 4)]
    l_ref, u_ref = lu_nopivot(a.to_dense())
    assert np.allclose(f.l_dense(), l_ref, atol=1e-15)
    assert np.allclose(f.u_dense(), u_ref, atol=1e-15)


def test_random_dominant_vs_dense_lu():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a = gallery.random_dominant(30, 0.1, rng)
        f = factor_of(a)
        l_ref, u_ref = lu_nopivot(a.to_dense())
        assert np.abs(f.l_dense() - l_ref).max() <= 1e-11
        assert np.abs(f.u_dense() - u_ref).max() <= 1e-11


def test_small_panel_cap_same_values():
    rng = np.random.default_rng(5)
    a = gallery.random_dominant(40, 0.3, rng)
    f1 = factor_of(a)
    f2 = factor_of(a, panel_cap=3)
    assert np.allclose(f1.l_dense(), f2.l_dense(), atol=1e-13)
    assert np.allclose(f1.u_dense(), f2.u_dense(), atol=1e-13)
    assert f2.xsuper.size > f1.xsuper.size


def test_parts_fixture_and_diagonal():
    a = gallery.partition_example()
    sym = symbolic_factor(symmetrized_pattern(a))
    assert parts_are_isolated(sym, FIXTURE_PARTS)
    an = analyze(a, SolverConfig(matching=False, nd_leaf_size=2))
    assert len(an.parts.ranges) == 2 and a.n - an.parts.sep_start <= 2
    d = CscMatrix.from_dense(np.diag([1.0, 2.0, 3.0]))
    p = build_parts(symbolic_factor(symmetrized_pattern(d)))
    assert p.ranges == ((0, 3),) and p.sep_start == 3


def test_parts_grid_scan():
    an = analyze(gallery.grid_laplacian(16), SolverConfig(matching=False))
    parts = an.parts
    assert len(parts.ranges) == 2
    fill = an.symbolic.fill.to_dense() | an.symbolic.fill.to_dense().T
    for k, (lo, hi) in enumerate(parts.ranges):
        for k2, (lo2, hi2) in enumerate(parts.ranges):
            if k != k2:
                assert not fill[lo:hi, lo2:hi2].any()


def test_static_pivot_perturbation():
    a = CscMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 1.0]]))
    f = factor_of(a)
    assert f.perturbations == 1
    assert f.u_diagonal()[0] == pytest.approx(1e-14)


def test_parallel_factorization_bitwise():
    a = gallery.grid_laplacian(12)
    an = analyze(a)
    f1 = factorize(an.transformed, an.symbolic, an.parts, workers=1)
    for w in (2, 4, 8):
        fw = factorize(an.transformed, an.symbolic, an.parts, workers=w)
        assert np.array_equal(f1.lnz, fw.lnz) and np.array_equal(f1.unz, fw.unz)


def perturb_columns(a, cols, rng, lower_only=False):
    vals = a.values.copy()
    mask = np.isin(a.col_indices(), cols)
    if lower_only:
        mask &= a.row_idx >= a.col_indices()
    vals[mask] *= 1.0 + 0.2 * rng.uniform(-1, 1, int(mask.sum()))
    return a.with_values(vals)


def test_incremental_empty_is_noop():
    a = gallery.partition_example()
    f = factor_of(a, FIXTURE_PARTS)
    g = refactorize_incremental(f, a, [])
    assert np.array_equal(g.lnz, f.lnz) and np.array_equal(g.unz, f.unz)
    assert g.recomputed.size == 0


def test_incremental_fixture_leaf_change():
    a = gallery.partition_example()
    f = factor_of(a, FIXTURE_PARTS)
    dense = a.to_dense()
    dense[4, 0] = 1.5
    a2 = CscMatrix.from_dense(dense)
    g = refactorize_incremental(f, a2, [0])
    assert g.recomputed.tolist() == [0, 4, 5]
    full = factor_of(a2, FIXTURE_PARTS)
    assert np.array_equal(g.lnz, full.lnz) and np.array_equal(g.unz, full.unz)


def test_incremental_random_single_column():
    rng = np.random.default_rng(3)
    for _ in range(30):
        a = gallery.random_dominant(30, 0.08, rng)
        sym = symbolic_factor(symmetrized_pattern(a))
        f = factorize(a, sym)
        j = int(rng.integers(30))
        a2 = perturb_columns(a, [j], rng, lower_only=True)
        g = refactorize_incremental(f, a2, [j])
        full = factorize(a2, sym)
        assert np.abs(g.lnz - full.lnz).max(initial=0) <= 1e-12
        assert np.abs(g.unz - full.unz).max(initial=0) <= 1e-12
        assert g.recomputed.tolist() == sym.forest.ancestor_closure([j]).tolist()


def test_incremental_upper_entries_seed_their_rows():
    rng = np.random.default_rng(4)
    a = gallery.random_dominant(30, 0.15, rng)
    sym = symbolic_factor(symmetrized_pattern(a))
    f = factorize(a, sym)
    cols = [3, 17, 29]
    a2 = perturb_columns(a, cols, rng)
    g = refactorize_incremental(f, a2, cols)
    full = factorize(a2, sym)
    assert np.abs(g.lnz - full.lnz).max() <= 1e-12 and np.abs(g.unz - full.unz).max() <= 1e-12
    ci = a.col_indices()
    upper_rows = a.row_idx[np.isin(ci, cols) & (a.row_idx < ci)]
    seeds = sorted(set(cols) | set(upper_rows.tolist()))
    assert g.recomputed.tolist() == sym.forest.ancestor_closure(seeds).tolist()


def test_incremental_rejects_bad_input():
    a = gallery.partition_example()
    f = factor_of(a)
    with pytest.raises(PatternMismatchError):
        refactorize_incremental(f, CscMatrix.identity(6), [0])
    a2 = a.with_values(a.values * 2)
    with pytest.raises(ValueError):
        refactorize_incremental(f, a2, [0])


def test_incremental_growing_max_falls_back_correctly():
    a = gallery.partition_example()
    f = factor_of(a)
    dense = a.to_dense()
    dense[0, 0] = 1e20
    a2 = CscMatrix.from_dense(dense)
    g = refactorize_incremental(f, a2, [0])
    full = factor_of(a2)
    assert np.array_equal(g.lnz, full.lnz) and np.array_equal(g.unz, full.unz)


def test_dump_roundtrip(tmp_path):
    a = gallery.grid_laplacian(6)
    an = analyze(a)
    f = factorize(an.transformed, an.symbolic, an.parts)
    dump_factor(f, tmp_path / "f.json", tmp_path / "f.bin")
    meta, lnz, unz = load_factor_dump(tmp_path / "f.json", tmp_path / "f.bin")
    assert meta["schema"] == 1 and meta["xsuper"] == f.xsuper.tolist()
    assert meta["sep_start"] == f.sep_start and meta["perturbations"] == 0
    assert np.array_equal(lnz, f.lnz) and np.array_equal(unz, f.unz)
    assert (tmp_path / "f.bin").stat().st_size == 16 * f.lnz.size


def test_pack_unpack_inverse():
    a = gallery.grid_laplacian(5)
    f = factor_of(a)
    assert np.array_equal(pack_dense(f.layout, f.l_dense()), f.lnz)
