"""Half-vectorisation, matrix and quadratic-feature operators.

All three operators share one canonical ordering of the upper triangle of an
``n x n`` symmetric matrix: row-major, i.e. ``(0,0), (0,1), ..., (0,n-1),
(1,1), ..., (n-1,n-1)``. For a symmetric ``W`` and a vector ``x``::

    mat_op(x) @ hvec(W) == W @ x
    qvec(x) @ hvec(W)   == 0.5 * x @ W @ x
"""

from __future__ import annotations

from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import sparse


class QuadMapError(ValueError):
    """Raised for non-symmetric, empty or dimension-inconsistent operands."""


def half_length(n: int) -> int:
    """Length ``n(n+1)/2`` of a half-vector for dimension ``n``."""

    return n * (n + 1) // 2


def system_order(n: int) -> int:
    """Order ``(n^2+3n)/2`` of the stacked ``[w_tilde; b]`` unknown."""

    return half_length(n) + n


@lru_cache(maxsize=64)
def upper_indices(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the upper triangle in canonical order."""

    rows, cols = np.triu_indices(n)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def dimension_from_length(length: int) -> int:
    """Invert :func:`half_length`, rejecting lengths that are not triangular."""

    n = int((np.sqrt(8 * length + 1) - 1) // 2)
    if n < 1 or half_length(n) != length:
        raise QuadMapError(f"Length {length} is not n(n+1)/2 for any n >= 1")
    return n


def _as_vector(x) -> np.ndarray:
    vector = np.asarray(x, dtype=float)
    if vector.ndim != 1 or vector.size == 0:
        raise QuadMapError("Expected a non-empty one-dimensional vector")
    if not np.all(np.isfinite(vector)):
        raise QuadMapError("Vector entries must be finite")
    return vector


def hvec(W) -> np.ndarray:
    """Half-vectorise a symmetric matrix (exact symmetry required)."""

    matrix = np.asarray(W, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise QuadMapError(f"Expected a non-empty square matrix, got shape {matrix.shape}")
    if not np.array_equal(matrix, matrix.T):
        raise QuadMapError("Matrix is not symmetric")
    rows, cols = upper_indices(matrix.shape[0])
    return matrix[rows, cols].copy()


def unhvec(values, n: int) -> np.ndarray:
    """Rebuild the symmetric matrix whose half-vector is ``values``."""

    vector = np.asarray(values, dtype=float)
    if vector.ndim != 1 or vector.size != half_length(n) or n < 1:
        raise QuadMapError(
            f"Half-vector of length {vector.size} does not match dimension n={n}"
        )
    rows, cols = upper_indices(n)
    matrix = np.zeros((n, n))
    matrix[rows, cols] = vector
    matrix[cols, rows] = vector
    return matrix


def qvec(x) -> np.ndarray:
    """Quadratic feature map: products ``x_i x_j`` with the diagonal halved."""

    vector = _as_vector(x)
    rows, cols = upper_indices(vector.size)
    features = vector[rows] * vector[cols]
    features[rows == cols] *= 0.5
    return features


def qvec_rows(X) -> np.ndarray:
    """Apply :func:`qvec` to every row of ``X``."""

    matrix = np.asarray(X, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise QuadMapError(f"Expected a 2-D sample matrix, got shape {matrix.shape}")
    rows, cols = upper_indices(matrix.shape[1])
    features = matrix[:, rows] * matrix[:, cols]
    features[:, rows == cols] *= 0.5
    return features


def _mat_triplets(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """COO triplets of the stacked ``Mat(x_i)`` blocks for every row of ``X``.

    Entry ``w_ab`` (a <= b) contributes ``x_b`` to row ``a`` and, off the
    diagonal, ``x_a`` to row ``b``.
    """

    N, n = X.shape
    rows, cols = upper_indices(n)
    positions = np.arange(rows.size)
    off = rows != cols

    local_rows = np.concatenate([rows, cols[off]])
    local_cols = np.concatenate([positions, positions[off]])
    source = np.concatenate([cols, rows[off]])

    block = np.arange(N)[:, None] * n
    out_rows = (block + local_rows[None, :]).ravel()
    out_cols = np.tile(local_cols, N)
    values = X[:, source].ravel()
    return out_rows, out_cols, values


def mat_op(x) -> sparse.csr_matrix:
    """Sparse ``n x n(n+1)/2`` operator with ``mat_op(x) @ hvec(W) == W @ x``."""

    vector = _as_vector(x)
    n = vector.size
    rows, cols, values = _mat_triplets(vector[None, :])
    return sparse.csr_matrix((values, (rows, cols)), shape=(n, half_length(n)))


def stacked_mat_op(X) -> sparse.csr_matrix:
    """Vertical stack of ``[Mat(x_i)  I_n]`` over all rows of ``X``.

    The result has shape ``(N*n, (n^2+3n)/2)`` so that its Gram matrix is
    ``sum_i [Mat(x_i) I_n]^T [Mat(x_i) I_n]``.
    """

    matrix = np.asarray(X, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise QuadMapError(f"Expected a 2-D sample matrix, got shape {matrix.shape}")
    N, n = matrix.shape
    p = half_length(n)
    rows, cols, values = _mat_triplets(matrix)

    eye_rows = np.arange(N * n)
    eye_cols = p + np.tile(np.arange(n), N)
    all_rows = np.concatenate([rows, eye_rows])
    all_cols = np.concatenate([cols, eye_cols])
    all_values = np.concatenate([values, np.ones(N * n)])
    return sparse.csr_matrix((all_values, (all_rows, all_cols)), shape=(N * n, p + n))
