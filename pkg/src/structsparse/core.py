"""Dense linear-algebra primitives shared by every learner.

Block bookkeeping for class-partitioned dictionaries and codes, the block
"doubling" operator M(.), column-mean matrices, shrinkage operators and a
symmetric eigenvalue helper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BlockPartition:
    """Partition of one matrix axis into class blocks plus an optional shared block.

    Blocks are laid out as ``[class 1, ..., class C, shared]``.

    Attributes:
        class_sizes: Number of rows/columns owned by each class.
        shared_size: Size of the trailing shared block (0 when absent).
    """

    class_sizes: tuple[int, ...]
    shared_size: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.class_sizes)
        if any(s < 0 for s in sizes) or self.shared_size < 0:
            raise ValueError("block sizes must be non-negative")
        object.__setattr__(self, "class_sizes", sizes)
        object.__setattr__(self, "shared_size", int(self.shared_size))

    @classmethod
    def from_labels(cls, labels, shared_size: int = 0) -> "BlockPartition":
        """Build a partition from a label vector sorted by class."""
        labels = np.asarray(labels)
        if labels.size and np.any(np.diff(labels) < 0):
            raise ValueError("labels must be sorted to form contiguous blocks")
        _, counts = np.unique(labels, return_counts=True)
        return cls(tuple(int(c) for c in counts), shared_size)

    @property
    def n_classes(self) -> int:
        return len(self.class_sizes)

    @property
    def class_total(self) -> int:
        return int(sum(self.class_sizes))

    @property
    def total(self) -> int:
        return self.class_total + self.shared_size

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.class_sizes)]).astype(int)

    def block(self, c: int) -> slice:
        """Slice of class block ``c`` (0-based)."""
        off = self.offsets
        return slice(int(off[c]), int(off[c + 1]))

    @property
    def shared(self) -> slice:
        return slice(self.class_total, self.total)

    def blocks(self, include_shared: bool = True) -> list[slice]:
        out = [self.block(c) for c in range(self.n_classes)]
        if include_shared and self.shared_size > 0:
            out.append(self.shared)
        return out

    def without_shared(self) -> "BlockPartition":
        return BlockPartition(self.class_sizes, 0)


def _check_axis(length: int, part: BlockPartition, name: str) -> None:
    if part.total != length:
        raise ValueError(f"{name} partition covers {part.total} entries, axis has {length}")


def doubled_diagonal(A: np.ndarray, rowp: BlockPartition, colp: BlockPartition) -> np.ndarray:
    """Return M(A): ``A`` with every diagonal block added once more.

    Diagonal blocks pair class ``c`` of ``rowp`` with class ``c`` of ``colp``.
    The shared blocks count as a diagonal pair only when both partitions
    carry one.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    _check_axis(A.shape[0], rowp, "row")
    _check_axis(A.shape[1], colp, "column")
    if rowp.n_classes != colp.n_classes:
        raise ValueError("row and column partitions have different class counts")
    out = A.copy()
    for c in range(rowp.n_classes):
        r, s = rowp.block(c), colp.block(c)
        out[r, s] += A[r, s]
    if rowp.shared_size and colp.shared_size:
        out[rowp.shared, colp.shared] += A[rowp.shared, colp.shared]
    return out


def column_mean_matrix(A: np.ndarray, n: int | None = None) -> np.ndarray:
    """Return an ``rows x n`` matrix whose columns all equal the mean column of ``A``."""
    A = np.asarray(A, dtype=float)
    if n is None:
        n = A.shape[1]
    if n <= 0:
        raise ValueError("n must be positive")
    if A.shape[1] == 0:
        raise ValueError("A must have at least one column")
    m = A.mean(axis=1, keepdims=True)
    return np.repeat(m, n, axis=1)


def soft_threshold(x: np.ndarray, alpha: float) -> np.ndarray:
    """Elementwise ``sign(x) * max(|x| - alpha, 0)``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - alpha, 0.0)


def svt(A: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding, the proximal map of ``tau * ||.||_*``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return A.copy()
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"SVD did not converge: {exc}") from exc
    s = np.maximum(s - tau, 0.0)
    return (U * s) @ Vt


def project_unit_columns(D: np.ndarray) -> np.ndarray:
    """Scale every column with norm above 1 back onto the unit sphere."""
    D = np.asarray(D, dtype=float)
    norms = np.linalg.norm(D, axis=0)
    return D / np.maximum(norms, 1.0)


def normalize_columns(D: np.ndarray) -> np.ndarray:
    """Scale every nonzero column to unit norm; zero columns stay zero."""
    D = np.asarray(D, dtype=float)
    norms = np.linalg.norm(D, axis=0)
    norms[norms == 0] = 1.0
    return D / norms


def extreme_eigenvalue(S: np.ndarray, which: str = "max") -> float:
    """Largest or smallest eigenvalue of the symmetric part of ``S``.

    An empty matrix yields 0, which keeps Lipschitz sums well defined when
    an optional block (e.g. a shared dictionary) is absent.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    if which not in ("max", "min"):
        raise ValueError("which must be 'max' or 'min'")
    if S.shape[0] == 0:
        return 0.0
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    return float(w[-1] if which == "max" else w[0])
