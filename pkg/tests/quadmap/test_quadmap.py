import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from qshs.quadmap import (
    QuadMapError,
    dimension_from_length,
    half_length,
    hvec,
    mat_op,
    qvec,
    qvec_rows,
    stacked_mat_op,
    system_order,
    unhvec,
)


def _random_symmetric(rng, n):
    M = rng.normal(size=(n, n))
    return M + M.T


def test_hvec_examples():
    assert_array_equal(hvec([[1.0, 2.0], [2.0, 3.0]]), [1.0, 2.0, 3.0])
    assert_array_equal(hvec(np.eye(3)), [1.0, 0.0, 0.0, 1.0, 0.0, 1.0])
    assert_array_equal(hvec(np.zeros((4, 4))), np.zeros(10))


def test_unhvec_examples():
    assert_array_equal(unhvec([1.0, 2.0, 3.0], 2), [[1.0, 2.0], [2.0, 3.0]])
    assert_array_equal(unhvec(np.zeros(6), 3), np.zeros((3, 3)))


def test_hvec_roundtrip_is_exact():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        W = _random_symmetric(rng, n)
        assert_array_equal(unhvec(hvec(W), n), W)


def test_mat_op_examples():
    assert_array_equal(mat_op([1.0, 2.0]).toarray(), [[1.0, 2.0, 0.0], [0.0, 1.0, 2.0]])
    assert_array_equal(mat_op([-0.7]).toarray(), [[-0.7]])


def test_qvec_examples():
    assert_array_equal(qvec([1.0, 2.0]), [0.5, 2.0, 2.0])
    assert_array_equal(qvec(np.zeros(3)), np.zeros(6))


def test_operator_identities_on_seeded_pairs():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        x = rng.normal(size=n)
        W = _random_symmetric(rng, n)
        h = hvec(W)

        assert_allclose(mat_op(x) @ h, W @ x, rtol=1e-12, atol=1e-12)
        assert qvec(x) @ h == pytest.approx(0.5 * x @ W @ x, rel=1e-12, abs=1e-12)


def test_dimension_law():
    for n in range(1, 7):
        p = half_length(n)
        assert hvec(np.eye(n)).size == p
        assert mat_op(np.ones(n)).shape == (n, p)
        assert qvec(np.ones(n)).size == p
        assert system_order(n) == p + n
        assert dimension_from_length(p) == n


def test_qvec_rows_matches_rowwise_qvec():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(7, 4))
    assert_array_equal(qvec_rows(X), np.vstack([qvec(row) for row in X]))


def test_stacked_operator_blocks():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(4, 3))
    stacked = stacked_mat_op(X).toarray()
    n, p = 3, half_length(3)

    assert stacked.shape == (4 * n, p + n)
    for i, row in enumerate(X):
        block = stacked[i * n:(i + 1) * n]
        assert_array_equal(block[:, :p], mat_op(row).toarray())
        assert_array_equal(block[:, p:], np.eye(n))


def test_invalid_inputs():
    with pytest.raises(QuadMapError):
        hvec([[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(QuadMapError):
        hvec(np.ones((2, 3)))
    with pytest.raises(QuadMapError):
        unhvec([1.0, 2.0], 2)
    with pytest.raises(QuadMapError):
        qvec([])
    with pytest.raises(QuadMapError):
        mat_op([1.0, np.nan])
    with pytest.raises(QuadMapError):
        dimension_from_length(4)
