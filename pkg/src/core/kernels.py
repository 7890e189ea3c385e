"""
Batch-order-independent linear algebra kernels.

Every function here works on a batch of row vectors of shape (n, d) and
accumulates over columns in a fixed order using elementwise operations only.
A row's result therefore never depends on how many other rows share the
batch, which is what makes serial and multi-process ensembles bit-identical.
BLAS-backed ``@`` gives no such guarantee.
"""
from __future__ import annotations

import numpy as np


def matvec(M: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row-wise ``M @ x`` for every row x of *X* (shape (n, d) -> (n, m))."""
    M = np.asarray(M, dtype=float)
    X = np.atleast_2d(X)
    out = X[:, 0, None] * M[:, 0]
    for j in range(1, M.shape[1]):
        out = out + X[:, j, None] * M[:, j]
    return out


def rowdot(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise inner products of two (n, d) batches."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    out = A[:, 0] * B[:, 0]
    for j in range(1, A.shape[1]):
        out = out + A[:, j] * B[:, j]
    return out


def sq_norm(X: np.ndarray) -> np.ndarray:
    """Row-wise squared Euclidean norms."""
    return rowdot(X, X)


def norm(X: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean norms."""
    return np.sqrt(sq_norm(X))


def batched_matvec(Ms: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row-wise ``Ms[i] @ X[i]`` for a stack of matrices Ms (n, m, d)."""
    X = np.atleast_2d(X)
    out = Ms[:, :, 0] * X[:, 0, None]
    for j in range(1, Ms.shape[2]):
        out = out + Ms[:, :, j] * X[:, j, None]
    return out
