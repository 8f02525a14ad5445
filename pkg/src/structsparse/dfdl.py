"""Discriminative feature-oriented dictionary learning and the patch pipeline.

Each class gets a dictionary that represents its own samples well with a
few atoms while representing the other classes' samples poorly::

    min_D  1/N ||Y - D X||^2 - rho/Nbar ||Ybar - D Xbar||^2,   ||d_j|| = 1

with ``X``, ``Xbar`` the ``L``-sparse OMP codes of in-class samples ``Y``
and out-of-class samples ``Ybar``. Shifting ``F`` by its smallest
eigenvalue makes the dictionary step convex without changing its value
on the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import extreme_eigenvalue
from .odl import dict_objective, odl_dict_update, odl_learn
from .results import ClassificationResult
from .solvers import lasso_code, omp_batch

HEALTHY = "healthy"
DISEASED = "diseased"


class DfdlDivergenceError(RuntimeError):
    """Raised when the training objective keeps rising, usually because rho is too large."""


def estimate_sparsity_level(X0: np.ndarray, thresh: float = 1e-10) -> int:
    """Rounded mean number of nonzeros per column, at least 1."""
    X0 = np.asarray(X0)
    if X0.size == 0:
        raise ValueError("code matrix is empty")
    counts = np.sum(np.abs(X0) > thresh, axis=0)
    return max(1, int(np.round(counts.mean())))


def dfdl_dict_terms(Y_in, X_in, Y_out, X_out, rho):
    """``E`` and ``F`` of the dictionary objective ``-2tr(ED^T) + tr(DFD^T)``."""
    N, Nb = Y_in.shape[1], Y_out.shape[1]
    E = Y_in @ X_in.T / N - rho * (Y_out @ X_out.T) / Nb
    F = X_in @ X_in.T / N - rho * (X_out @ X_out.T) / Nb
    return E, 0.5 * (F + F.T)


def dfdl_objective(D, Y_in, X_in, Y_out, X_out, rho) -> float:
    """``1/N ||Y - DX||^2 - rho/Nbar ||Ybar - D Xbar||^2``."""
    r_in = np.sum((Y_in - D @ X_in) ** 2) / Y_in.shape[1]
    r_out = np.sum((Y_out - D @ X_out) ** 2) / Y_out.shape[1]
    return float(r_in - rho * r_out)


@dataclass
class DfdlDictionary:
    """One class's learned dictionary and training trace.

    ``surrogate`` holds ``(before, after)`` values of the convexified
    dictionary objective around every dictionary update.
    """

    D: np.ndarray
    L: int
    history: list[float] = field(default_factory=list)
    surrogate: list[tuple[float, float]] = field(default_factory=list)


def dfdl_train(
    Y_in, Y_out, k, rho, lam, iters=30, tol=1e-4, init_iters=10, max_pass=10, patience=3,
    divergence_tol=0.5,
) -> DfdlDictionary:
    """Learn the dictionary of one class.

    Args:
        Y_in: ``d x N`` samples of the class.
        Y_out: ``d x Nbar`` samples of all other classes.
        k: Number of atoms.
        rho: Weight of the out-of-class term.
        lam: Lasso weight for the reconstructive warm start.
        iters: Maximum outer iterations.
        tol: Stop once the relative objective change falls below it.
        patience: After this many consecutive objective increases, training
            stops. ``None`` disables the check.
        divergence_tol: If, at that point, the objective sits more than this
            relative amount above the best value seen, the run is treated as
            divergent. Smaller rises are OMP re-coding jitter around a
            plateau and end training normally.

    Raises:
        DfdlDivergenceError: if the objective keeps rising materially.
    """
    Y_in = np.asarray(Y_in, dtype=float)
    Y_out = np.asarray(Y_out, dtype=float)
    if Y_in.shape[1] == 0 or Y_out.shape[1] == 0:
        raise ValueError("both in-class and out-of-class samples are required")
    D, X0 = odl_learn(Y_in, k, lam, iters=init_iters)
    D = D / np.maximum(np.linalg.norm(D, axis=0), 1e-300)
    L = min(estimate_sparsity_level(X0), k)
    N = Y_in.shape[1]
    model = DfdlDictionary(D, L)
    rises, best = 0, np.inf
    for _ in range(iters):
        X = omp_batch(np.hstack([Y_in, Y_out]), D, L)
        X_in, X_out = X[:, :N], X[:, N:]
        model.history.append(dfdl_objective(D, Y_in, X_in, Y_out, X_out, rho))

        E, F = dfdl_dict_terms(Y_in, X_in, Y_out, X_out, rho)
        F_hat = F - extreme_eigenvalue(F, "min") * np.eye(k)
        before = dict_objective(D, E, F_hat)
        D = odl_dict_update(E, F_hat, D, max_pass=max_pass, sphere=True)
        model.surrogate.append((before, dict_objective(D, E, F_hat)))

        h = model.history
        best = min(best, h[-1])
        if len(h) >= 2:
            prev, cur = h[-2], h[-1]
            rises = rises + 1 if cur > prev + 1e-9 * max(1.0, abs(prev)) else 0
            if patience is not None and rises >= patience:
                if cur - best > divergence_tol * max(abs(best), 1e-12):
                    raise DfdlDivergenceError(
                        f"objective increased {rises} consecutive times to {cur:.6g} "
                        f"(best {best:.6g}); rho={rho} is probably too large"
                    )
                break
            if abs(prev - cur) < tol * max(abs(prev), 1e-12):
                break
    model.D = D
    return model


@dataclass
class DfdlModel:
    """Per-class DFDL dictionaries plus the classification weight ``gamma``."""

    dictionaries: list[np.ndarray]
    levels: list[int]
    gamma: float
    rho: float
    classes: np.ndarray

    @property
    def D_total(self) -> np.ndarray:
        return np.hstack(self.dictionaries)


def dfdl_fit(Y, labels, k, rho, lam, gamma, **kwargs) -> DfdlModel:
    """Train one DFDL dictionary per class against the remaining classes."""
    Y = np.asarray(Y, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    ks = [int(v) for v in (k if np.ndim(k) else [k] * len(classes))]
    parts = [
        dfdl_train(Y[:, labels == c], Y[:, labels != c], kc, rho, lam, **kwargs)
        for c, kc in zip(classes, ks)
    ]
    return DfdlModel([p.D for p in parts], [p.L for p in parts], gamma, rho, classes)


def dfdl_scores(Y, model: DfdlModel, max_iter=300):
    """Class residuals ``||y - D_i delta_i(x)||`` with ``x`` coded on all dictionaries.

    Returns ``(residuals, zero_code)`` with residuals of shape ``(N, C)``.
    """
    Y2 = np.atleast_2d(np.asarray(Y, dtype=float).T).T
    X = lasso_code(Y2, model.D_total, 0.5 * model.gamma, max_iter=max_iter)
    out = np.empty((Y2.shape[1], len(model.dictionaries)))
    start = 0
    for i, Di in enumerate(model.dictionaries):
        stop = start + Di.shape[1]
        out[:, i] = np.linalg.norm(Y2 - Di @ X[start:stop], axis=0)
        start = stop
    return out, ~np.any(X, axis=0)


def dfdl_predict(Y, model: DfdlModel) -> np.ndarray:
    """Predicted labels; ties go to the first class."""
    res, _ = dfdl_scores(Y, model)
    return model.classes[np.argmin(res, axis=1)]


def dfdl_classify(y, model: DfdlModel) -> ClassificationResult:
    res, zero = dfdl_scores(np.asarray(y, dtype=float).reshape(-1, 1), model)
    return ClassificationResult(
        int(model.classes[int(np.argmin(res[0]))]), res[0], low_confidence=bool(zero[0])
    )


def learn_theta(train_fractions: Sequence[tuple[float, bool]]) -> float:
    """Threshold on the healthy-patch fraction that maximizes training accuracy.

    The rule is "healthy iff fraction >= theta". Candidates are 0, the
    midpoints between consecutive distinct fractions, and a point above
    the largest fraction. Ties go to the smaller threshold.

    Args:
        train_fractions: ``(healthy_fraction, is_healthy)`` pairs.
    """
    fr = np.array([f for f, _ in train_fractions], dtype=float)
    healthy = np.array([bool(h) for _, h in train_fractions])
    if healthy.all() or not healthy.any():
        raise ValueError("need at least one healthy and one diseased sample")
    u = np.unique(fr)
    cands = np.concatenate([[0.0], 0.5 * (u[:-1] + u[1:]), [u[-1] + 1e-9]])
    cands = np.unique(np.clip(cands, 0.0, None))
    acc = [np.mean((fr >= t) == healthy) for t in cands]
    return float(cands[int(np.argmax(acc))])


def healthy_fraction(patches, model: DfdlModel, healthy_label=None) -> float:
    """Fraction of patch columns classified as the healthy class."""
    healthy_label = model.classes[0] if healthy_label is None else healthy_label
    pred = dfdl_predict(patches, model)
    return float(np.mean(pred == healthy_label))


def image_classify(patches, model: DfdlModel, theta: float, healthy_label=None) -> str:
    """``"healthy"`` iff the healthy-patch fraction is at least ``theta``."""
    if np.asarray(patches).ndim == 2 and np.asarray(patches).shape[1] == 0:
        raise ValueError("at least one patch is required")
    return HEALTHY if healthy_fraction(patches, model, healthy_label) >= theta else DISEASED


def mvp_detect(patch_grid, m: int) -> bool:
    """True iff some 4-connected group of positive cells has at least ``m`` cells."""
    grid = np.asarray(patch_grid, dtype=bool)
    if grid.size == 0:
        raise ValueError("grid is empty")
    lab, n = ndimage.label(grid)
    if n == 0:
        return False
    return bool(np.bincount(lab.ravel())[1:].max() >= m)


def extract_patches(image, size, n, rng) -> np.ndarray:
    """``n`` patches at uniformly random positions, flattened into columns."""
    image = np.asarray(image, dtype=float)
    h, w = size
    H, W = image.shape[:2]
    rows = rng.integers(0, H - h + 1, n)
    cols = rng.integers(0, W - w + 1, n)
    return np.column_stack([image[r : r + h, c : c + w].ravel() for r, c in zip(rows, cols)])


def tile_patches(image, size) -> tuple[np.ndarray, tuple[int, int]]:
    """Non-overlapping patches in row-major order and the tile grid shape."""
    image = np.asarray(image, dtype=float)
    h, w = size
    gh, gw = image.shape[0] // h, image.shape[1] // w
    cols = [image[i * h : (i + 1) * h, j * w : (j + 1) * w].ravel() for i in range(gh) for j in range(gw)]
    return np.column_stack(cols), (gh, gw)
