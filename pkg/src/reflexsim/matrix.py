"""Primitive operations on nonnegative bipartite weight matrices.

Matrices are plain ``numpy.ndarray`` objects (dense layout) or
``scipy.sparse`` matrices (coordinate-sparse layout). Every function here is
pure: inputs are never modified.
"""
from __future__ import annotations

import enum
import math
import warnings

import numpy as np
import scipy.sparse as sp


class ZeroRowWarning(UserWarning):
    """Raised (as a warning) when row normalization meets all-zero rows."""


class NormKind(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, value) -> "NormKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown norm kind {value!r}; expected one of l1, l2, linf"
            ) from None


def _values(M):
    """Flat view of the stored entries of ``M`` (explicit entries only for sparse)."""
    if sp.issparse(M):
        return np.asarray(M.tocsr().data, dtype=float)
    return np.asarray(M, dtype=float).ravel()


def validate_adjacency(A, copy: bool = False):
    """Check the adjacency invariants and return ``A`` as float64.

    Dense input comes back as a C-contiguous ndarray, sparse input as CSR.
    Raises ``ValueError`` on wrong dimensionality, empty shape, non-finite or
    negative entries.
    """
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=float, copy=copy)
        A.sum_duplicates()
    else:
        A = np.array(A, dtype=float, copy=copy or None, order="C")
        if A.ndim != 2:
            raise ValueError(f"adjacency matrix must be 2-D, got {A.ndim}-D")
    n, m = A.shape
    if n < 1 or m < 1:
        raise ValueError(f"adjacency matrix must be at least 1x1, got {n}x{m}")
    vals = _values(A)
    if not np.all(np.isfinite(vals)):
        raise ValueError("adjacency matrix contains non-finite entries")
    if np.any(vals < 0):
        raise ValueError("adjacency matrix contains negative entries")
    return A


def as_dense(M) -> np.ndarray:
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


def row_sums(A) -> np.ndarray:
    return np.asarray(A.sum(axis=1), dtype=float).ravel()


def row_normalize(A, return_zero_rows: bool = False):
    """Divide each row of ``A`` by its sum.

    Rows that sum to zero are left as all-zero rows and reported with a
    :class:`ZeroRowWarning`. With ``return_zero_rows`` the boolean mask of
    such rows is returned alongside the normalized matrix.
    """
    A = validate_adjacency(A)
    sums = row_sums(A)
    zero = sums == 0
    # divide rather than scale by the reciprocal, which overflows for tiny sums
    div = np.where(zero, 1.0, sums)
    if sp.issparse(A):
        out = A.copy()
        out.data = out.data / np.repeat(div, np.diff(out.indptr))
    else:
        out = A / div[:, None]
    if zero.any():
        warnings.warn(
            f"{int(zero.sum())} all-zero row(s) left unnormalized: "
            f"{np.flatnonzero(zero)[:10].tolist()}",
            ZeroRowWarning,
            stacklevel=2,
        )
    if return_zero_rows:
        return out, zero
    return out


def column_normalize(A, return_zero_rows: bool = False):
    """Row-normalize the transpose of ``A``; the result has shape ``(m, n)``."""
    At = A.T.tocsr() if sp.issparse(A) else np.ascontiguousarray(np.asarray(A).T)
    return row_normalize(At, return_zero_rows=return_zero_rows)


def matrix_vector_norm(M, kind="l2") -> float:
    """Norm of the entries of ``M`` taken as one flat vector."""
    kind = NormKind.parse(kind)
    v = _values(M)
    if not np.all(np.isfinite(v)):
        raise ValueError("matrix contains non-finite entries")
    if v.size == 0:
        return 0.0
    a = np.abs(v)
    # fsum is correctly rounded, hence independent of entry order
    if kind is NormKind.L1:
        return math.fsum(a)
    if kind is NormKind.LINF:
        return float(np.max(a))
    # scaled to avoid overflow on large entries
    top = np.max(a)
    if top == 0:
        return 0.0
    return float(top * math.sqrt(math.fsum((a / top) ** 2)))


def frobenius_norm(M) -> float:
    return matrix_vector_norm(M, NormKind.L2)


# --- permutations -----------------------------------------------------------

def check_permutation(p, size: int | None = None) -> np.ndarray:
    """Return ``p`` as an int array after checking it is a bijection on [0, k)."""
    p = np.asarray(p)
    if p.ndim != 1 or not np.issubdtype(p.dtype, np.integer):
        raise ValueError("permutation must be a 1-D integer array")
    k = p.size
    if size is not None and k != size:
        raise ValueError(f"permutation of size {k} does not match dimension {size}")
    if k and (p.min() < 0 or p.max() >= k or np.unique(p).size != k):
        raise ValueError("permutation is not a bijection on [0, k)")
    return p.astype(np.intp, copy=False)


def identity_permutation(k: int) -> np.ndarray:
    return np.arange(k, dtype=np.intp)


def invert_permutation(p) -> np.ndarray:
    p = check_permutation(p)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.size, dtype=np.intp)
    return inv


def random_permutation(k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(k).astype(np.intp)


def apply_permutation(M, row_p, col_p):
    """Move entry ``(i, j)`` of ``M`` to ``(row_p[i], col_p[j])``.

    Entries are relocated, never recombined, so the result is bit-exact and
    applying the inverse permutations restores ``M``.
    """
    n, m = M.shape
    row_p = check_permutation(row_p, n)
    col_p = check_permutation(col_p, m)
    # out[row_p[i], col_p[j]] = M[i, j]  <=>  out = M[inv_r][:, inv_c]
    inv_r = invert_permutation(row_p)
    inv_c = invert_permutation(col_p)
    if sp.issparse(M):
        return sp.csr_matrix(M.tocsr()[inv_r][:, inv_c])
    M = np.asarray(M)
    return M[np.ix_(inv_r, inv_c)]


def permute_symmetric(S, p):
    """Apply the same permutation to rows and columns of a square matrix."""
    return apply_permutation(S, p, p)
