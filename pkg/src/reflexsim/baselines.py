"""Pairwise row/column similarity metrics used as baselines.

Undefined values (empty neighbourhoods, zero or constant vectors) are mapped
to 0 rather than NaN.
"""
from __future__ import annotations

import enum

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .matrix import as_dense


class Mode(str, enum.Enum):
    ROWS = "rows"
    COLS = "cols"


def _vectors(A, mode) -> np.ndarray:
    mode = Mode(str(getattr(mode, "value", mode)).lower())
    # negative entries are allowed: unclamped noisy matrices carry them
    X = as_dense(A)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise ValueError("input must be a finite 2-D matrix")
    return X if mode is Mode.ROWS else np.ascontiguousarray(X.T)


# elements materialized per chunk of pairwise products
_CHUNK_ELEMENTS = 1 << 22


def _sorted_sum(P: np.ndarray) -> np.ndarray:
    """Sum over the last axis after sorting it.

    Equal multisets of terms give bit-identical sums, so the result does not
    depend on the order of the vector entries.
    """
    return np.sort(P, axis=-1).sum(axis=-1)


def _gram(U: np.ndarray) -> np.ndarray:
    """Order-independent inner products between the rows of ``U``."""
    n, m = U.shape
    G = np.empty((n, n))
    chunk = max(1, _CHUNK_ELEMENTS // max(1, n * m))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        G[start:stop] = _sorted_sum(U[start:stop, None, :] * U[None, :, :])
    return G


def _unit_diagonal(M: np.ndarray, defined: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(defined)
    M[idx, idx] = 1.0
    return M


def jaccard_similarity(A, mode="rows", threshold: float = 0.0) -> np.ndarray:
    """``|N_i & N_j| / |N_i | N_j|`` with neighbourhoods ``N_i = {k : x_ik > threshold}``."""
    B = (_vectors(A, mode) > threshold).astype(float)
    inter = B @ B.T
    size = B.sum(axis=1)
    union = size[:, None] + size[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return _unit_diagonal(out, size > 0)


def cosine_similarity(A, mode="rows") -> np.ndarray:
    X = _vectors(A, mode)
    lengths = np.sqrt(_sorted_sum(X * X))
    ok = lengths > 0
    U = np.zeros_like(X)
    U[ok] = X[ok] / lengths[ok, None]
    return np.clip(_unit_diagonal(_gram(U), ok), -1.0, 1.0)


def pearson_similarity(A, mode="rows") -> np.ndarray:
    X = _vectors(A, mode)
    C = X - (_sorted_sum(X) / X.shape[1])[:, None]
    lengths = np.sqrt(_sorted_sum(C * C))
    # constant vectors: centred values are pure rounding residue
    scale = np.max(np.abs(X), axis=1)
    ok = lengths > 1e-12 * np.maximum(scale, 1e-300) * np.sqrt(X.shape[1])
    U = np.zeros_like(C)
    U[ok] = C[ok] / lengths[ok, None]
    return np.clip(_unit_diagonal(_gram(U), ok), -1.0, 1.0)


METRICS = {
    "jaccard": jaccard_similarity,
    "cosine": cosine_similarity,
    "pearson": pearson_similarity,
}


class PairwiseSimilarity(BaseEstimator):
    """Row and column similarity from one of the pairwise metrics.

    ``metric`` is one of ``"jaccard"``, ``"cosine"``, ``"pearson"``;
    ``threshold`` only affects Jaccard binarization.
    """

    def __init__(self, metric="cosine", threshold=0.0):
        self.metric = metric
        self.threshold = threshold

    def fit(self, X, y=None):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {sorted(METRICS)}")
        X = check_array(X, accept_sparse="csr", dtype=np.float64)
        kw = {"threshold": self.threshold} if self.metric == "jaccard" else {}
        fn = METRICS[self.metric]
        self.row_similarity_ = fn(X, Mode.ROWS, **kw)
        self.col_similarity_ = fn(X, Mode.COLS, **kw)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).row_similarity_

    def similarity_pair(self) -> tuple[np.ndarray, np.ndarray]:
        check_is_fitted(self, "row_similarity_")
        return self.row_similarity_, self.col_similarity_
