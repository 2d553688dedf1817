import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsedirect import gallery
from sparsedirect.core import (CscMatrix, MatrixMarketError, ScalingPair, SparsityPattern, apply_transform,
                               compose_permutations, dominance_profile, dump_matrix_market, dump_vector,
                               inverse_permutation, is_permutation, load_matrix_market, load_vector,
                               symmetrized_pattern)


def mm(body, header="%%MatrixMarket matrix coordinate real general"):
    return header + "\n" + body


def test_smallest_file():
    a = load_matrix_market(mm("1 1 1\n1 1 5.0\n"))
    assert a.n == 1 and a.nnz == 1 and a.get(0, 0) == 5.0


def test_matching_example_roundtrip_entries():
    rows, cols = np.nonzero(gallery.MATCHING_EXAMPLE)
    lines = [f"{i + 1} {j + 1} {gallery.MATCHING_EXAMPLE[i, j]}" for i, j in zip(rows, cols)]
    a = load_matrix_market(mm(f"6 6 {len(lines)}\n" + "\n".join(lines) + "\n"))
    assert a.nnz == 14
    assert (a.get(0, 0), a.get(0, 1), a.get(0, 3)) == (1.0, 3.0, 2.0)
    assert np.array_equal(a.to_dense(), gallery.MATCHING_EXAMPLE)


def test_dump_and_reparse_agree():
    a = gallery.badly_scaled_unsymmetric(80, seed=3)
    b = load_matrix_market(dump_matrix_market(a))
    assert a == b


def test_duplicates_summed_and_zeros_dropped():
    a = load_matrix_market(mm("2 2 4\n1 1 1.5\n1 1 2.5\n2 1 0\n2 2 -1\n"))
    assert a.nnz == 2 and a.get(0, 0) == 4.0 and a.get(1, 0) == 0.0


def test_symmetric_file_expanded():
    a = load_matrix_market(mm("2 2 2\n1 1 1\n2 1 3\n",
                              "%%MatrixMarket matrix coordinate real symmetric"))
    assert np.array_equal(a.to_dense(), [[1, 3], [3, 0]])


@pytest.mark.parametrize("text, line", [
    ("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1\n", 2),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1\n", 3),
    ("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n", 1),
    ("hello\n", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(MatrixMarketError) as exc:
        load_matrix_market(text)
    assert exc.value.line == line


def test_vector_io():
    x = np.array([1.0, -2.5, 1e-300])
    assert np.array_equal(load_vector(dump_vector(x)), x)
    with pytest.raises(MatrixMarketError):
        load_vector("1\n2\n", 3)


def test_symmetrized_diagonal_and_fixture():
    d = CscMatrix.from_dense(np.diag([1.0, 2.0, 3.0]))
    assert np.array_equal(symmetrized_pattern(d).to_dense(), np.eye(3, dtype=bool))
    s = symmetrized_pattern(gallery.partition_example()).to_dense()
    assert s[4, 5] and s[5, 4]
    assert np.array_equal(s, s.T)


def test_symmetrized_random_against_dense():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = rng.random((10, 10)) < 0.2
        p = SparsityPattern.from_dense(m)
        assert np.array_equal(symmetrized_pattern(p).to_dense(), m | m.T | np.eye(10, dtype=bool))


def test_apply_transform_identity_and_matching_example():
    a = gallery.matching_example()
    n = a.n
    assert apply_transform(a, np.arange(n), np.arange(n)) == a
    rows = np.array([4, 1, 5, 2, 3, 6]) - 1
    t = apply_transform(a, rows, np.arange(n))
    assert np.array_equal(t.diagonal(), [2, 3, 3, 4, 3, 2])


def test_apply_transform_dense_oracle():
    rng = np.random.default_rng(1)
    for _ in range(10):
        dense = rng.standard_normal((8, 8)) * (rng.random((8, 8)) < 0.4)
        a = CscMatrix.from_dense(dense)
        pr, pc = rng.permutation(8), rng.permutation(8)
        s = ScalingPair(rng.uniform(0.1, 10, 8), rng.uniform(0.1, 10, 8))
        expect = (np.diag(s.d_r) @ dense @ np.diag(s.d_c))[np.ix_(pr, pc)]
        assert np.allclose(apply_transform(a, pr, pc, s).to_dense(), expect, rtol=1e-15, atol=0)


def test_dominance_profile():
    assert np.array_equal(dominance_profile(CscMatrix.identity(4)), np.ones(4))
    r = dominance_profile(gallery.partition_example())
    assert r[0] == pytest.approx(2 / 7)
    dense = gallery.PARTITION_EXAMPLE
    expect = np.abs(np.diag(dense)) / np.abs(dense).sum(axis=1)
    assert np.allclose(r, expect)


def test_permutation_helpers():
    p = np.array([2, 0, 1])
    q = inverse_permutation(p)
    assert np.array_equal(p[q], np.arange(3))
    assert is_permutation(p) and not is_permutation([0, 0, 1])
    x = np.array([10.0, 20.0, 30.0])
    assert np.array_equal(x[compose_permutations(p, p)], x[p][p])


def test_matvec_and_transpose():
    a = gallery.matching_example()
    x = np.arange(6.0)
    assert np.allclose(a @ x, gallery.MATCHING_EXAMPLE @ x)
    assert np.array_equal(a.transpose().to_dense(), gallery.MATCHING_EXAMPLE.T)


def test_arrays_are_read_only():
    a = gallery.matching_example()
    with pytest.raises(ValueError):
        a.values[0] = 9.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_matrix_market_roundtrip_property(n, seed):
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.5)
    a = CscMatrix.from_dense(dense)
    assert load_matrix_market(io.StringIO(dump_matrix_market(a))) == a
