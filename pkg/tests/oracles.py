"""Slow, literal reference implementations used as test oracles."""
import itertools

import numpy as np


def neighbour_set_parts(A, S_other):
    """The two four-sums over neighbour sets for a binary ``A``.

    ``part`` pairs the non-common neighbours of ``i`` with all of ``j``'s and
    the common neighbours of ``i`` with ``j``'s non-common ones; ``common``
    is the common x common block.
    """
    n = A.shape[0]
    G = [set(np.flatnonzero(A[i])) for i in range(n)]
    part, common = np.zeros((n, n)), np.zeros((n, n))
    for i, j in itertools.product(range(n), repeat=2):
        C = G[i] & G[j]
        total = 0.0
        for k in G[i] - C:
            for l in G[j]:
                total += S_other[k, l]
        for k in C:
            for l in G[j] - C:
                total += S_other[k, l]
        part[i, j] = total
        total = 0.0
        for k in C:
            for l in C:
                total += S_other[k, l]
        common[i, j] = total
    return part, common


def neighbour_set_update(A, S_other, alpha):
    """Non-common terms discounted by ``1 - alpha``, common block undiscounted."""
    part, common = neighbour_set_parts(A, S_other)
    return (1 - alpha) * part + common


def weighted_update(A, S_other, alpha):
    """Explicit quadruple loop of the weighted form with real-valued products."""
    n, m = A.shape
    out = np.zeros((n, n))
    for i, j in itertools.product(range(n), repeat=2):
        total = 0.0
        for k, l in itertools.product(range(m), repeat=2):
            total += (1 - alpha) * A[i, k] * A[j, l] * S_other[k, l]
            total += alpha * A[i, k] * A[j, k] * A[i, l] * A[j, l] * S_other[k, l]
        out[i, j] = total
    return out


def mu_loops(S, S_hat, Sp, Sp_hat):
    n, m = S.shape[0], Sp.shape[0]
    a = sum((S[i, j] - S_hat[i, j]) ** 2 for i in range(n) for j in range(n)) ** 0.5
    b = sum((Sp[i, j] - Sp_hat[i, j]) ** 2 for i in range(m) for j in range(m)) ** 0.5
    return 0.5 * a / n**2 + 0.5 * b / m**2


def precision_loops(S, labels, include_self=True):
    """Precision at every rank by explicit pair enumeration and sorting."""
    n = S.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i if include_self else i + 1, n)]
    pairs = [p for p in pairs if S[p] > 0]
    pairs.sort(key=lambda p: (-S[p], p[0], p[1]))
    hits, out = 0, []
    for r, (i, j) in enumerate(pairs, 1):
        hits += labels[i] == labels[j]
        out.append(hits / r)
    return np.array(out)


def random_binary(rng, max_n=8, max_m=8, p=None):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    p = rng.uniform(0.2, 0.8) if p is None else p
    return (rng.random((n, m)) < p).astype(float)


def random_symmetric(rng, dim):
    M = rng.random((dim, dim))
    return (M + M.T) / 2
