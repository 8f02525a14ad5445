"""Quadratic-surrogate dictionary update and the plain reconstructive learner."""

from __future__ import annotations

import numpy as np

from .core import normalize_columns
from .solvers import lasso_code

#: Diagonal entries of F below this are treated as unused atoms.
UNUSED_ATOM_TOL = 1e-12


def dict_objective(D: np.ndarray, E: np.ndarray, F: np.ndarray) -> float:
    """``-2 tr(E D^T) + tr(D F D^T)``."""
    return float(-2.0 * np.sum(E * D) + np.sum((D @ F) * D))


def odl_dict_update(
    E: np.ndarray,
    F: np.ndarray,
    D_init: np.ndarray,
    max_pass: int = 10,
    tol: float = 1e-6,
    sphere: bool = False,
    return_info: bool = False,
):
    """Minimize ``-2 tr(E D^T) + tr(D F D^T)`` over dictionaries with bounded columns.

    Columns are visited in ascending order. Each visit applies the exact
    coordinate minimizer ``u_j = (e_j - D f_j) / F_jj + d_j`` followed by a
    projection onto the unit ball, or onto the unit sphere when ``sphere``
    is set.

    Args:
        E: ``(d, k)`` linear term.
        F: ``(k, k)`` symmetric PSD quadratic term.
        D_init: ``(d, k)`` starting dictionary.
        max_pass: Maximum number of sweeps over the columns.
        tol: Stop once the largest column change in a sweep falls below it.
        sphere: Normalize columns to exactly unit norm.
        return_info: Also return ``{"skipped": [...], "passes": int}``.

    Returns:
        The updated dictionary (and the info dict on request). Columns whose
        ``F_jj`` is below ``1e-12`` are left untouched and listed in
        ``info["skipped"]``.
    """
    E = np.asarray(E, dtype=float)
    F = np.asarray(F, dtype=float)
    D = np.array(D_init, dtype=float, copy=True)
    d, k = D.shape
    if E.shape != (d, k) or F.shape != (k, k):
        raise ValueError(f"shape mismatch: E {E.shape}, F {F.shape}, D {D.shape}")
    if k and np.max(np.abs(F - F.T)) > 1e-10 * max(1.0, float(np.max(np.abs(F)))):
        raise ValueError("F must be symmetric")

    skipped = [j for j in range(k) if F[j, j] < UNUSED_ATOM_TOL]
    active = [j for j in range(k) if F[j, j] >= UNUSED_ATOM_TOL]
    passes = 0
    for _ in range(max_pass):
        passes += 1
        biggest = 0.0
        for j in active:
            u = (E[:, j] - D @ F[:, j]) / F[j, j] + D[:, j]
            nrm = np.linalg.norm(u)
            if sphere:
                new = u / nrm if nrm > 0 else D[:, j]
            else:
                new = u / max(nrm, 1.0)
            biggest = max(biggest, float(np.linalg.norm(new - D[:, j])))
            D[:, j] = new
        if biggest < tol:
            break
    if return_info:
        return D, {"skipped": skipped, "passes": passes}
    return D


def lasso_objective(Y: np.ndarray, D: np.ndarray, X: np.ndarray, lam: float) -> float:
    """``0.5 ||Y - D X||_F^2 + lam ||X||_1``."""
    R = Y - D @ X
    return 0.5 * float(np.sum(R * R)) + lam * float(np.abs(X).sum())


def initial_dictionary(Y: np.ndarray, k: int, seed: int | None = None) -> np.ndarray:
    """First ``k`` data columns, unit-normalized.

    Missing columns (``k > N``) and the whole dictionary when ``seed`` is
    given are drawn from a seeded Gaussian instead.
    """
    Y = np.asarray(Y, dtype=float)
    d, N = Y.shape
    rng = np.random.default_rng(0 if seed is None else seed)
    if seed is not None:
        return normalize_columns(rng.standard_normal((d, k)))
    D = Y[:, : min(k, N)]
    if k > N:
        D = np.hstack([D, rng.standard_normal((d, k - N))])
    return normalize_columns(D)


def odl_learn(
    Y: np.ndarray,
    k: int,
    lam: float,
    iters: int = 10,
    max_pass: int = 10,
    tol: float = 1e-6,
    coding_iter: int = 300,
    seed: int | None = None,
    return_info: bool = False,
):
    """Learn ``(D, X)`` minimizing ``0.5 ||Y - D X||^2 + lam ||X||_1``.

    Alternates :func:`lasso_code` (warm-started) with
    :func:`odl_dict_update` on ``E = Y X^T`` and ``F = X X^T``.

    Returns:
        ``(D, X)``, plus ``{"objective": history}`` when ``return_info`` is
        set. The history holds the objective after every coding step and
        every dictionary step.
    """
    Y = np.asarray(Y, dtype=float)
    if k < 1:
        raise ValueError("k must be at least 1")
    if Y.ndim != 2 or Y.shape[1] == 0:
        raise ValueError("Y must be a non-empty matrix")
    D = initial_dictionary(Y, k, seed)
    X = np.zeros((k, Y.shape[1]))
    history = [lasso_objective(Y, D, X, lam)]
    for _ in range(iters):
        X = lasso_code(Y, D, lam, max_iter=coding_iter, init=X)
        history.append(lasso_objective(Y, D, X, lam))
        D = odl_dict_update(Y @ X.T, X @ X.T, D, max_pass=max_pass, tol=tol)
        history.append(lasso_objective(Y, D, X, lam))
    if return_info:
        return D, X, {"objective": history}
    return D, X
