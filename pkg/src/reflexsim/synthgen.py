"""Seeded generators for the synthetic experiments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrix import (
    apply_permutation,
    check_permutation,
    identity_permutation,
    invert_permutation,
    random_permutation,
    validate_adjacency,
)

# three row blocks over five column blocks; column block 2 is shared by row
# blocks 1 and 2, the other assignments sit off the main diagonal
UNBALANCED_ASSIGNMENT = ((0, 1), (2,), (2, 3, 4))


@dataclass(frozen=True)
class BlockSpec:
    row_block_sizes: tuple
    col_block_sizes: tuple
    # block_assignment[r] lists the column blocks filled for row block r
    block_assignment: tuple = None
    fill_density: float = 1.0
    fill_value: float = 1.0

    def __post_init__(self):
        rows = tuple(int(s) for s in self.row_block_sizes)
        cols = tuple(int(s) for s in self.col_block_sizes)
        object.__setattr__(self, "row_block_sizes", rows)
        object.__setattr__(self, "col_block_sizes", cols)
        if not rows or not cols or min(rows) < 1 or min(cols) < 1:
            raise ValueError("block sizes must be positive")
        assignment = self.block_assignment
        if assignment is None:
            if len(rows) != len(cols):
                raise ValueError(
                    "diagonal assignment needs as many row blocks as column blocks"
                )
            assignment = tuple((r,) for r in range(len(rows)))
        assignment = tuple(tuple(int(c) for c in cs) for cs in assignment)
        if len(assignment) != len(rows):
            raise ValueError("block_assignment needs one entry per row block")
        for cs in assignment:
            for c in cs:
                if not 0 <= c < len(cols):
                    raise ValueError(f"block_assignment references unknown column block {c}")
        object.__setattr__(self, "block_assignment", assignment)
        if not 0.0 < float(self.fill_density) <= 1.0:
            raise ValueError(f"fill_density must lie in (0, 1], got {self.fill_density}")
        if not float(self.fill_value) > 0:
            raise ValueError(f"fill_value must be positive, got {self.fill_value}")

    @property
    def shape(self) -> tuple[int, int]:
        return sum(self.row_block_sizes), sum(self.col_block_sizes)

    def to_dict(self) -> dict:
        return {
            "row_block_sizes": list(self.row_block_sizes),
            "col_block_sizes": list(self.col_block_sizes),
            "block_assignment": [list(cs) for cs in self.block_assignment],
            "fill_density": float(self.fill_density),
            "fill_value": float(self.fill_value),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BlockSpec":
        return cls(**d)


@dataclass
class GroundTruth:
    row_labels: np.ndarray
    col_labels: np.ndarray
    # row_perm[i] is the current position of original row i
    row_perm: np.ndarray = field(default=None)
    col_perm: np.ndarray = field(default=None)

    def __post_init__(self):
        self.row_labels = np.asarray(self.row_labels, dtype=np.intp)
        self.col_labels = np.asarray(self.col_labels, dtype=np.intp)
        if self.row_perm is None:
            self.row_perm = identity_permutation(self.row_labels.size)
        if self.col_perm is None:
            self.col_perm = identity_permutation(self.col_labels.size)
        self.row_perm = check_permutation(self.row_perm, self.row_labels.size)
        self.col_perm = check_permutation(self.col_perm, self.col_labels.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.row_labels.size, self.col_labels.size


def random_block_sizes(total: int, k: int, seed=0, min_size: int = 2) -> tuple:
    """Split ``total`` into ``k`` random positive sizes, each at least ``min_size``."""
    if k < 1 or total < k * min_size:
        raise ValueError(f"cannot split {total} into {k} blocks of size >= {min_size}")
    rng = np.random.default_rng(seed)
    extra = rng.multinomial(total - k * min_size, np.full(k, 1.0 / k))
    return tuple(int(min_size + e) for e in extra)


def diagonal_spec(n: int, m: int, n_blocks: int, fill_density: float = 1.0,
                  seed=None, min_size: int = 2) -> BlockSpec:
    """Block-diagonal spec; equal-as-possible sizes unless ``seed`` is given."""
    if seed is None:
        rows = tuple(len(b) for b in np.array_split(np.arange(n), n_blocks))
        cols = tuple(len(b) for b in np.array_split(np.arange(m), n_blocks))
    else:
        ss = np.random.SeedSequence(seed)
        r_seed, c_seed = ss.spawn(2)
        rows = random_block_sizes(n, n_blocks, np.random.default_rng(r_seed), min_size)
        cols = random_block_sizes(m, n_blocks, np.random.default_rng(c_seed), min_size)
    return BlockSpec(rows, cols, None, fill_density)


def unbalanced_spec(n: int, m: int, fill_density: float = 1.0,
                    assignment=UNBALANCED_ASSIGNMENT) -> BlockSpec:
    """Three row blocks over five column blocks."""
    rows = tuple(len(b) for b in np.array_split(np.arange(n), 3))
    cols = tuple(len(b) for b in np.array_split(np.arange(m), 5))
    return BlockSpec(rows, cols, assignment, fill_density)


def generate_blocks(spec: BlockSpec, n: int, m: int, seed=0):
    """Fill the assigned blocks with ``fill_value`` cells at rate ``fill_density``.

    Returns ``(A, GroundTruth)``; labels are the row and column block indices.
    """
    if spec.shape != (n, m):
        raise ValueError(f"block sizes describe a {spec.shape} matrix, not {(n, m)}")
    rng = np.random.default_rng(seed)
    row_edges = np.concatenate([[0], np.cumsum(spec.row_block_sizes)])
    col_edges = np.concatenate([[0], np.cumsum(spec.col_block_sizes)])
    A = np.zeros((n, m))
    for r, col_blocks in enumerate(spec.block_assignment):
        r0, r1 = row_edges[r], row_edges[r + 1]
        for c in col_blocks:
            c0, c1 = col_edges[c], col_edges[c + 1]
            if spec.fill_density >= 1.0:
                A[r0:r1, c0:c1] = spec.fill_value
            else:
                mask = rng.random((r1 - r0, c1 - c0)) < spec.fill_density
                A[r0:r1, c0:c1] = np.where(mask, spec.fill_value, 0.0)
    gt = GroundTruth(
        row_labels=np.repeat(np.arange(len(spec.row_block_sizes)), spec.row_block_sizes),
        col_labels=np.repeat(np.arange(len(spec.col_block_sizes)), spec.col_block_sizes),
    )
    return A, gt


def permute_randomly(A, gt: GroundTruth | None = None, seed=0):
    """Shuffle rows and columns independently; labels follow their rows/columns.

    The returned ground truth stores the composed permutations, so
    :func:`restore_order` recovers the original matrix bit-exactly.
    """
    n, m = A.shape
    if gt is None:
        gt = GroundTruth(np.zeros(n, dtype=np.intp), np.zeros(m, dtype=np.intp))
    rng = np.random.default_rng(seed)
    p = random_permutation(n, rng)
    q = random_permutation(m, rng)
    A_hat = apply_permutation(A, p, q)
    row_labels = np.empty_like(gt.row_labels)
    row_labels[p] = gt.row_labels
    col_labels = np.empty_like(gt.col_labels)
    col_labels[q] = gt.col_labels
    return A_hat, GroundTruth(row_labels, col_labels, p[gt.row_perm], q[gt.col_perm])


def restore_order(M, gt: GroundTruth):
    """Undo the permutations recorded in ``gt`` on an n x m matrix."""
    return apply_permutation(M, invert_permutation(gt.row_perm), invert_permutation(gt.col_perm))


def add_gaussian_noise(A, sigma: float, seed=0, clamp: bool = True) -> np.ndarray:
    """Add i.i.d. ``Normal(0, sigma^2)`` noise to every entry.

    Negative results are clamped to zero unless ``clamp`` is false.
    ``sigma = 0`` returns an unchanged copy.
    """
    sigma = float(sigma)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    A = validate_adjacency(A)
    A = A.toarray() if hasattr(A, "toarray") else np.array(A)
    if sigma == 0:
        return A
    rng = np.random.default_rng(seed)
    noisy = A + rng.normal(0.0, sigma, size=A.shape)
    if clamp:
        np.maximum(noisy, 0.0, out=noisy)
    return noisy
