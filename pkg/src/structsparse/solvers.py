"""Proximal-gradient engine and greedy pursuit.

``fista_solve`` minimizes ``f(Z) + lam * g(Z)`` for a smooth ``f`` given by
its gradient oracle and a structured penalty ``g`` chosen by :class:`ProxKind`.
Codes are 2-D ``(K, N)`` arrays or 3-D ``(K, N, T)`` tensors whose last axis
holds channels.
"""

from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import BlockPartition, extreme_eigenvalue, soft_threshold


class ProxKind(enum.Enum):
    """Penalty family used by the proximal step."""

    L1 = "l1"
    L1_NONNEG = "l1_nonneg"
    TUBE_L2 = "tube_l2"
    TUBE_L2_NONNEG = "tube_l2_nonneg"
    GROUP_L2 = "group_l2"
    GROUP_L2_NONNEG = "group_l2_nonneg"

    @property
    def nonneg(self) -> bool:
        return self.value.endswith("nonneg")

    @property
    def grouped(self) -> bool:
        return self.value.startswith("group")

    def with_nonneg(self, flag: bool) -> "ProxKind":
        base = self.value.removesuffix("_nonneg")
        return ProxKind(base + "_nonneg" if flag else base)


def _as3(u: np.ndarray) -> np.ndarray:
    return u[:, :, None] if u.ndim == 2 else u


def prox_apply(
    u: np.ndarray,
    eta: float,
    kind: ProxKind = ProxKind.L1,
    groups: BlockPartition | None = None,
) -> np.ndarray:
    """Proximal map of ``eta * penalty`` evaluated at ``u``.

    Args:
        u: Code of shape ``(K,)``, ``(K, N)`` or ``(K, N, T)``.
        eta: Non-negative threshold.
        kind: Penalty family. Tubes are the channel fibres ``u[k, n, :]``;
            groups are the row blocks of ``groups`` taken across channels,
            separately for every column ``n``.
        groups: Row partition, required for the grouped kinds.

    Returns:
        Array of the same shape as ``u``.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    u = np.asarray(u, dtype=float)
    if kind.nonneg:
        u = np.maximum(u, 0.0)
    if kind in (ProxKind.L1, ProxKind.L1_NONNEG):
        return soft_threshold(u, eta) if kind is ProxKind.L1 else np.maximum(u - eta, 0.0)

    squeeze = u.ndim == 1
    v = u[:, None] if squeeze else u
    v3 = _as3(v)
    if kind in (ProxKind.TUBE_L2, ProxKind.TUBE_L2_NONNEG):
        norms = np.linalg.norm(v3, axis=2, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > eta, 1.0 - eta / norms, 0.0)
        out = v3 * scale
    else:
        if groups is None:
            raise ValueError(f"{kind.name} needs a group partition")
        if groups.total != v3.shape[0]:
            raise ValueError("group partition does not cover the code rows")
        out = np.zeros_like(v3)
        for sl in groups.blocks():
            blk = v3[sl]
            norms = np.sqrt(np.sum(blk**2, axis=(0, 2), keepdims=True))
            with np.errstate(divide="ignore", invalid="ignore"):
                scale = np.where(norms > eta, 1.0 - eta / norms, 0.0)
            out[sl] = blk * scale
    out = out.reshape(v.shape)
    return out[:, 0] if squeeze else out


def penalty_value(
    u: np.ndarray, kind: ProxKind = ProxKind.L1, groups: BlockPartition | None = None
) -> float:
    """Value of the penalty whose prox is ``prox_apply(., ., kind)``.

    Non-negative kinds return ``inf`` outside the orthant.
    """
    u = np.asarray(u, dtype=float)
    if kind.nonneg and np.any(u < 0):
        return float("inf")
    if kind in (ProxKind.L1, ProxKind.L1_NONNEG):
        return float(np.abs(u).sum())
    v3 = _as3(u[:, None] if u.ndim == 1 else u)
    if kind in (ProxKind.TUBE_L2, ProxKind.TUBE_L2_NONNEG):
        return float(np.linalg.norm(v3, axis=2).sum())
    if groups is None:
        raise ValueError(f"{kind.name} needs a group partition")
    return float(sum(np.sqrt(np.sum(v3[sl] ** 2, axis=(0, 2))).sum() for sl in groups.blocks()))


@dataclass
class FitReport:
    """Diagnostics returned by :func:`fista_solve`."""

    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    initial_objective: float | None = None
    history: list[float] = field(default_factory=list)
    best_iteration: int = 0


@dataclass
class FistaProblem:
    """Composite problem ``f(Z) + lam * penalty(Z)``.

    ``grad`` must be a pure function returning the gradient of ``f``. When
    ``objective`` (the full composite objective) is supplied, it is evaluated
    at the initial point and every ``check_every`` iterations and the best
    checkpoint is returned, so the result never scores worse than ``init``.
    """

    grad: Callable[[np.ndarray], np.ndarray]
    L: float
    lam: float
    init: np.ndarray
    prox: ProxKind = ProxKind.L1
    groups: BlockPartition | None = None
    max_iter: int = 300
    tol: float = 1e-6
    objective: Callable[[np.ndarray], float] | None = None
    check_every: int = 10


def fista_step_size(t: float) -> float:
    """Momentum sequence ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``."""
    return 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))


def fista_solve(p: FistaProblem) -> tuple[np.ndarray, FitReport]:
    """Accelerated proximal gradient with relative-change stopping."""
    if not p.L > 0:
        raise ValueError(f"Lipschitz constant must be positive, got {p.L}")
    if p.max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    start = time.perf_counter()
    report = FitReport()
    step = 1.0 / p.L
    thresh = p.lam * step

    z_prev = np.array(p.init, dtype=float, copy=True)
    w = z_prev.copy()
    t = 1.0
    best, best_obj = z_prev, None
    if p.objective is not None:
        best_obj = float(p.objective(z_prev))
        report.initial_objective = best_obj

    z = z_prev
    for it in range(1, p.max_iter + 1):
        g = p.grad(w)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at FISTA iteration {it}")
        z = prox_apply(w - step * g, thresh, p.prox, p.groups)
        t_next = fista_step_size(t)
        w = z + ((t - 1.0) / t_next) * (z - z_prev)
        change = np.linalg.norm(z - z_prev) / max(1.0, np.linalg.norm(z))
        t, z_prev = t_next, z
        report.iterations = it
        done = change < p.tol
        if p.objective is not None and (done or it % p.check_every == 0 or it == p.max_iter):
            obj = float(p.objective(z))
            report.history.append(obj)
            if obj <= best_obj:
                best, best_obj, report.best_iteration = z, obj, it
        if done:
            report.converged = True
            break

    report.wall_time = time.perf_counter() - start
    if p.objective is None:
        return z, report
    return best, report


def lasso_code(
    Y: np.ndarray,
    D: np.ndarray,
    lam: float,
    max_iter: int = 300,
    tol: float = 1e-6,
    init: np.ndarray | None = None,
    nonneg: bool = False,
    return_report: bool = False,
):
    """Solve ``min_X 0.5 ||Y - D X||_F^2 + lam ||X||_1`` column-wise by FISTA.

    Parameters
    ----------
    Y : ndarray, shape (d,) or (d, N)
    D : ndarray, shape (d, K)
    lam : float
        Non-negative sparsity weight.
    init : ndarray, optional
        Warm start; defaults to the zero code.
    nonneg : bool
        Constrain the code to the non-negative orthant.

    Returns
    -------
    X : ndarray, shape (K,) or (K, N)
    report : FitReport
        Only when ``return_report`` is true.
    """
    D = np.asarray(D, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if D.ndim != 2 or D.shape[1] == 0:
        raise ValueError("dictionary must be a non-empty matrix")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    squeeze = Y.ndim == 1
    Y2 = Y[:, None] if squeeze else Y
    if Y2.shape[0] != D.shape[0]:
        raise ValueError("Y and D have different row counts")
    if np.any(np.linalg.norm(D, axis=0) > 1 + 1e-8):
        warnings.warn("dictionary has columns with norm above 1", RuntimeWarning, stacklevel=2)

    G = D.T @ D
    B = D.T @ Y2
    L = extreme_eigenvalue(G, "max")
    K, N = D.shape[1], Y2.shape[1]
    if init is None:
        X0 = np.zeros((K, N))
    else:
        X0 = np.asarray(init, dtype=float).reshape(K, N)
    if L <= 0:
        # all-zero dictionary: every code gives the same fit
        X = np.zeros((K, N))
        rep = FitReport(converged=True)
    else:
        kind = ProxKind.L1_NONNEG if nonneg else ProxKind.L1

        def objective(X):
            R = Y2 - D @ X
            return 0.5 * float(np.sum(R * R)) + lam * float(np.abs(X).sum())

        prob = FistaProblem(
            grad=lambda X: G @ X - B, L=L, lam=lam, init=X0, prox=kind,
            max_iter=max_iter, tol=tol, objective=objective,
        )
        X, rep = fista_solve(prob)
    if squeeze:
        X = X[:, 0]
    return (X, rep) if return_report else X


def omp_batch(Y: np.ndarray, D: np.ndarray, L: int, return_info: bool = False):
    """Orthogonal matching pursuit applied to every column of ``Y``.

    Each step selects the atom with the largest absolute correlation with
    the residual (first index on ties) and refits all selected coefficients
    by least squares. Selection stops early when the residual vanishes or
    the selected atoms become linearly dependent; such columns are flagged.

    Args:
        Y: Signals, shape ``(d,)`` or ``(d, N)``.
        D: Dictionary with unit-norm columns, shape ``(d, K)``.
        L: Maximum number of atoms per column, ``1 <= L <= K``.
        return_info: Also return a dict with the boolean array
            ``"rank_deficient"``.

    Returns:
        Codes of shape ``(K,)`` or ``(K, N)``.
    """
    D = np.asarray(D, dtype=float)
    Y = np.asarray(Y, dtype=float)
    K = D.shape[1]
    if not 1 <= L <= K:
        raise ValueError(f"sparsity level must lie in [1, {K}], got {L}")
    squeeze = Y.ndim == 1
    Y2 = Y[:, None] if squeeze else Y
    G = D.T @ D
    alpha0 = D.T @ Y2
    X = np.zeros((K, Y2.shape[1]))
    flagged = np.zeros(Y2.shape[1], dtype=bool)
    scale = max(1.0, float(np.max(np.abs(np.diag(G))))) if K else 1.0

    for n in range(Y2.shape[1]):
        a0 = alpha0[:, n]
        support: list[int] = []
        coef = np.zeros(0)
        corr = a0.copy()
        for _ in range(L):
            mag = np.abs(corr)
            mag[support] = -1.0
            j = int(np.argmax(mag))
            if mag[j] <= 1e-12 * scale:
                break
            trial = support + [j]
            Gs = G[np.ix_(trial, trial)]
            if np.linalg.eigvalsh(Gs)[0] <= 1e-10 * scale:
                flagged[n] = True
                break
            support = trial
            coef = np.linalg.solve(Gs, a0[support])
            corr = a0 - G[:, support] @ coef
        X[support, n] = coef
    if squeeze:
        X = X[:, 0]
    return (X, {"rank_deficient": flagged}) if return_info else X
