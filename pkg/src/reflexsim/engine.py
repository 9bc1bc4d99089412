"""Reflexive regular equivalence: coupled row/column similarity iteration.

Row similarity ``S`` (n x n) is computed from column similarity ``S'``
(m x m) and vice versa::

    S_ij = (1 - alpha) * a_i' S' a_j  +  alpha * c_ij' S' c_ij

where ``a_i`` is row ``i`` of the row-normalized adjacency matrix and
``c_ij = a_i * a_j`` (element-wise) holds the weights of the neighbours that
``i`` and ``j`` share. ``alpha = 0`` is plain bipartite regular equivalence
(``S = A S' A^T``); ``alpha = 1`` keeps only the common-neighbour term.
"""
from __future__ import annotations

import dataclasses
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted, check_non_negative

from .matrix import (
    NormKind,
    column_normalize,
    frobenius_norm,
    matrix_vector_norm,
    row_normalize,
    validate_adjacency,
)

DEFAULT_TOLERANCE = 1e-5
DEFAULT_MAX_ITERATIONS = 500

# batched dense evaluation of the common-neighbour term materializes
# chunk x n x m floats at a time
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.5
    norm_kind: NormKind = NormKind.LINF
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    seed: int = 0
    diagonal_rescale: bool = True
    # compare successive iterates instead of successive Frobenius norms
    strict_convergence: bool = False

    def __post_init__(self):
        object.__setattr__(self, "norm_kind", NormKind.parse(self.norm_kind))
        alpha = float(self.alpha)
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if int(self.max_iterations) < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        object.__setattr__(self, "max_iterations", int(self.max_iterations))
        if int(self.seed) < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["norm_kind"] = self.norm_kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**d)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    norm_s: float
    norm_s_prime: float
    # Frobenius norm of S and S' taken together (S and S' differ in shape)
    norm_combined: float
    delta_s: float
    delta_s_prime: float
    # norm of the configured kind after normalization (1 unless degenerate)
    unit_norm_s: float
    unit_norm_s_prime: float
    seconds: float


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations_used(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def norm_deltas(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute change in ``||S||_F`` and ``||S'||_F`` between iterations."""
        return np.abs(np.diff(self.column("norm_s"))), np.abs(np.diff(self.column("norm_s_prime")))

    def to_rows(self) -> list[dict]:
        return [dataclasses.asdict(r) for r in self.records]


@dataclass
class SimilarityPair:
    S: np.ndarray
    S_prime: np.ndarray
    trace: ConvergenceTrace

    @property
    def converged(self) -> bool:
        return self.trace.converged


def initialize_similarity(dim: int, seed=0) -> np.ndarray:
    """Random symmetric start: off-diagonals uniform on [0, 1), unit diagonal.

    ``seed`` is an integer for ``numpy.random.default_rng`` (PCG64) or a
    ``Generator``. Upper-triangle values are drawn in row-major order and
    mirrored.
    """
    if int(dim) < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    dim = int(dim)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    S = np.zeros((dim, dim))
    iu = np.triu_indices(dim, k=1)
    S[iu] = rng.random(iu[0].size)
    S = S + S.T
    np.fill_diagonal(S, 1.0)
    return S


def _symmetrize_upper(M: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle so the result is exactly symmetric."""
    U = np.triu(M)
    return U + np.triu(M, 1).T


def _common_neighbour_dense(A: np.ndarray, S: np.ndarray) -> np.ndarray:
    n, m = A.shape
    Q = np.empty((n, n))
    chunk = max(1, _CHUNK_ELEMENTS // max(1, n * m))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        C = A[start:stop, None, :] * A[None, :, :]
        Q[start:stop] = np.einsum("ijk,ijk->ij", np.matmul(C, S), C)
    return Q


def _common_neighbour_sparse(A: sp.csr_matrix, S: np.ndarray) -> np.ndarray:
    """Per-row evaluation restricted to the supports of each row.

    For row ``i`` only columns ``K`` in its support and rows ``J >= i`` that
    touch ``K`` can contribute, so the work is ``|J| |K|^2`` per row.
    """
    n = A.shape[0]
    Q = np.zeros((n, n))
    csc = A.tocsc()
    indptr, indices, data = A.indptr, A.indices, A.data
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        if lo == hi:
            continue
        K = indices[lo:hi]
        w = data[lo:hi]
        sub = csc[:, K]
        J = np.unique(sub.indices)
        J = J[J >= i]
        C = sub[J].toarray() * w
        Q[i, J] = np.einsum("jk,jk->j", C @ S[np.ix_(K, K)], C)
    return Q


def _use_sparse_path(A) -> bool:
    n, m = A.shape
    if sp.issparse(A):
        deg = np.diff(A.indptr)
    else:
        deg = np.count_nonzero(A, axis=1)
    support_work = n * float(np.sum(deg.astype(float) ** 2)) + 2e4 * n
    return support_work < 0.25 * float(n) * n * m * m


def common_neighbour_term(A_norm, S_other: np.ndarray) -> np.ndarray:
    """``Q_ij = c_ij' S_other c_ij`` with ``c_ij`` the element-wise row product."""
    if _use_sparse_path(A_norm):
        A = A_norm if sp.issparse(A_norm) else sp.csr_matrix(A_norm)
        A = sp.csr_matrix(A)
        A.sort_indices()
        return _common_neighbour_sparse(A, S_other)
    A = A_norm.toarray() if sp.issparse(A_norm) else np.asarray(A_norm)
    return _common_neighbour_dense(A, S_other)


def _check_square_symmetric_input(A, S) -> None:
    m = A.shape[1]
    if S.shape != (m, m):
        raise ValueError(
            f"similarity matrix of shape {S.shape} does not match {m} adjacency columns"
        )
    if not np.all(np.isfinite(S)):
        raise ValueError("similarity matrix contains non-finite entries")


def update_similarity(A_norm, S_other, alpha: float) -> np.ndarray:
    """One half-step: similarity among the rows of ``A_norm`` from ``S_other``.

    ``S_other`` is the similarity among the columns of ``A_norm``. For the
    column-mode update pass the row-normalized transpose. The result is
    exactly symmetric (upper triangle mirrored) and not normalized.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    A = A_norm if sp.issparse(A_norm) else np.asarray(A_norm, dtype=float)
    if A.ndim != 2:
        raise ValueError("adjacency matrix must be 2-D")
    if not np.all(np.isfinite(A.data if sp.issparse(A) else A)):
        raise ValueError("adjacency matrix contains non-finite entries")
    S_other = np.asarray(S_other, dtype=float)
    _check_square_symmetric_input(A, S_other)

    out = np.zeros((A.shape[0], A.shape[0]))
    if alpha < 1.0:
        if sp.issparse(A):
            base = np.asarray(A @ (A @ S_other).T)
        else:
            base = A @ S_other @ A.T
        out += (1.0 - alpha) * base
    if alpha > 0.0:
        out += alpha * common_neighbour_term(A, S_other)
    return _symmetrize_upper(out)


def stopping_rule(trace: ConvergenceTrace, tolerance: float, strict: bool = False) -> bool:
    """Whether the last iteration meets the convergence test.

    Default: successive Frobenius norms of both ``S`` and ``S'`` changed by
    less than ``tolerance``. ``strict``: the Frobenius norm of the change of
    each matrix is below ``tolerance``.
    """
    recs = trace.records
    if len(recs) < 2:
        return False
    last = recs[-1]
    if strict:
        return last.delta_s < tolerance and last.delta_s_prime < tolerance
    prev = recs[-2]
    return (
        abs(last.norm_s - prev.norm_s) < tolerance
        and abs(last.norm_s_prime - prev.norm_s_prime) < tolerance
    )


def _normalize(M: np.ndarray, kind: NormKind) -> np.ndarray:
    scale = matrix_vector_norm(M, kind)
    if scale == 0:
        return M
    return M / scale


def diagonal_rescale(S: np.ndarray) -> np.ndarray:
    """``S_ij / sqrt(S_ii S_jj)``; indices with a non-positive diagonal keep divisor 1."""
    d = np.diag(S).copy()
    d[d <= 0] = 1.0
    d = np.sqrt(d)
    return S / np.outer(d, d)


def reflexive_similarity(A, cfg: RunConfig | None = None, init=None) -> SimilarityPair:
    """Iterate the coupled updates until the stopping rule holds.

    Each full iteration computes ``S'`` from the current ``S``, normalizes it,
    then computes ``S`` from the new ``S'`` and normalizes it. ``init`` is an
    optional starting ``S``; by default one is drawn with ``cfg.seed``.
    A run that exhausts ``max_iterations`` is returned with
    ``converged=False``.
    """
    cfg = cfg or RunConfig()
    A = validate_adjacency(A)
    if (A.nnz == 0 or A.max() == 0) if sp.issparse(A) else not np.any(A > 0):
        raise ValueError("adjacency matrix has no positive entries")
    n, m = A.shape

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        A_rows = row_normalize(A)
        A_cols = column_normalize(A)

    if init is None:
        S = initialize_similarity(n, cfg.seed)
    else:
        S = np.array(init, dtype=float)
        if S.shape != (n, n):
            raise ValueError(f"initial similarity has shape {S.shape}, expected {(n, n)}")
    S_prime = None
    trace = ConvergenceTrace()

    for it in range(1, cfg.max_iterations + 1):
        t0 = time.perf_counter()
        new_prime = _normalize(update_similarity(A_cols, S, cfg.alpha), cfg.norm_kind)
        new_S = _normalize(update_similarity(A_rows, new_prime, cfg.alpha), cfg.norm_kind)
        elapsed = time.perf_counter() - t0

        norm_s = frobenius_norm(new_S)
        norm_sp = frobenius_norm(new_prime)
        trace.records.append(
            IterationRecord(
                iteration=it,
                norm_s=norm_s,
                norm_s_prime=norm_sp,
                norm_combined=float(np.hypot(norm_s, norm_sp)),
                delta_s=frobenius_norm(new_S - S),
                delta_s_prime=np.inf if S_prime is None else frobenius_norm(new_prime - S_prime),
                unit_norm_s=matrix_vector_norm(new_S, cfg.norm_kind),
                unit_norm_s_prime=matrix_vector_norm(new_prime, cfg.norm_kind),
                seconds=elapsed,
            )
        )
        S, S_prime = new_S, new_prime
        if stopping_rule(trace, cfg.tolerance, strict=cfg.strict_convergence):
            trace.converged = True
            break

    if cfg.diagonal_rescale:
        S = diagonal_rescale(S)
        S_prime = diagonal_rescale(S_prime)
    return SimilarityPair(S=S, S_prime=S_prime, trace=trace)


class ReflexiveSimilarity(BaseEstimator):
    """Estimator wrapper around :func:`reflexive_similarity`.

    Parameters
    ----------
    alpha : float in [0, 1]
        Weight of the common-neighbour term.
    norm : {"l1", "l2", "linf"}
        Flat-vector norm used to rescale ``S`` and ``S'`` at every iteration.
    tol : float
        Convergence tolerance.
    max_iter : int
        Maximum number of full iterations.
    random_state : int
        Seed of the random initial row similarity.
    diagonal_rescale : bool
        Rescale the final matrices to a unit diagonal.
    strict_convergence : bool
        Stop on the norm of the change instead of the change of the norm.

    Attributes
    ----------
    row_similarity_ : ndarray of shape (n_rows, n_rows)
    col_similarity_ : ndarray of shape (n_cols, n_cols)
    trace_ : ConvergenceTrace
    n_iter_ : int
    converged_ : bool
    """

    def __init__(
        self,
        alpha=0.5,
        norm="linf",
        tol=DEFAULT_TOLERANCE,
        max_iter=DEFAULT_MAX_ITERATIONS,
        random_state=0,
        diagonal_rescale=True,
        strict_convergence=False,
    ):
        self.alpha = alpha
        self.norm = norm
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state
        self.diagonal_rescale = diagonal_rescale
        self.strict_convergence = strict_convergence

    def run_config(self) -> RunConfig:
        return RunConfig(
            alpha=self.alpha,
            norm_kind=self.norm,
            tolerance=self.tol,
            max_iterations=self.max_iter,
            seed=self.random_state,
            diagonal_rescale=self.diagonal_rescale,
            strict_convergence=self.strict_convergence,
        )

    def fit(self, X, y=None):
        X = check_array(X, accept_sparse="csr", dtype=np.float64)
        check_non_negative(X, "ReflexiveSimilarity.fit")
        result = reflexive_similarity(X, self.run_config())
        self.row_similarity_ = result.S
        self.col_similarity_ = result.S_prime
        self.trace_ = result.trace
        self.n_iter_ = result.trace.iterations_used
        self.converged_ = result.trace.converged
        self.n_features_in_ = X.shape[1]
        if not self.converged_:
            warnings.warn(
                f"reflexive similarity did not converge in {self.max_iter} iterations",
                ConvergenceWarning,
            )
        return self

    def fit_transform(self, X, y=None):
        """Fit and return the row similarity matrix."""
        return self.fit(X).row_similarity_

    def similarity_pair(self) -> SimilarityPair:
        check_is_fitted(self, "row_similarity_")
        return SimilarityPair(self.row_similarity_, self.col_similarity_, self.trace_)
