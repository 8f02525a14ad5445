"""Dictionary learning with structured incoherence between class dictionaries.

Cost::

    sum_c ||Y_c - D_c X^c||^2 + lam ||X^c||_1 + eta/2 sum_{j != c} ||D_j^T D_c||^2

With all other dictionaries fixed, ``D_c`` solves
``min ||Y_c - D_c X^c||^2 + eta ||A D_c||^2`` over unit-ball columns, where
``A`` stacks the transposed dictionaries of the other classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import brentq

from .odl import initial_dictionary, odl_dict_update
from .results import ClassificationResult
from .solvers import lasso_code


def other_classes_matrix(dicts: list[np.ndarray], c: int) -> np.ndarray:
    """``A = [D_j^T]_{j != c}`` stacked vertically (shape ``sum k_j x d``)."""
    d = dicts[c].shape[0]
    rows = [D.T for j, D in enumerate(dicts) if j != c]
    return np.vstack(rows) if rows else np.zeros((0, d))


def dlsi_cost(dicts, Y_list, X_list, lam: float, eta: float) -> float:
    """Full DLSI cost for per-class data ``Y_list`` and codes ``X_list``."""
    total = 0.0
    for c, (Dc, Yc, Xc) in enumerate(zip(dicts, Y_list, X_list)):
        R = Yc - Dc @ Xc
        total += float(np.sum(R * R)) + lam * float(np.abs(Xc).sum())
        for j, Dj in enumerate(dicts):
            if j != c:
                total += 0.5 * eta * float(np.sum((Dj.T @ Dc) ** 2))
    return total


def dc_objective(Yc, Xc, A, Dc, eta) -> float:
    """``||Y_c - D_c X^c||^2 + eta ||A D_c||^2``."""
    R = Yc - Dc @ Xc
    return float(np.sum(R * R)) + eta * float(np.sum((A @ Dc) ** 2))


def _ball_quadratic_min(q, V, b):
    """Minimize ``d^T Q d - 2 b^T d`` over ``||d|| <= 1`` with ``Q = V diag(q) V^T``."""
    beta = V.T @ b

    def norm_at(mu):
        return float(np.linalg.norm(beta / (q + mu)))

    if norm_at(0.0) <= 1.0:
        return V @ (beta / q)
    hi = max(float(np.linalg.norm(b)), 1e-300)
    mu = brentq(lambda m: norm_at(m) - 1.0, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return V @ (beta / (q + mu))


def odlsi_update_Dc(Yc, Xc, A, D_init, eta, max_pass=200, tol=1e-9, return_info=False):
    """Column-by-column update of one class dictionary.

    Column ``j`` minimizes ``||R_j - d x^j||^2 + eta ||A d||^2`` over the
    unit ball, with ``R_j = Y_c - sum_{i != j} d_i x^i``. The unconstrained
    minimizer ``u = (||x^j||^2 I + eta A^T A)^{-1} R_j x^j^T`` is used when it
    lies in the ball. Otherwise the constrained minimizer is found on the
    sphere by a scalar root search. With ``eta = 0`` this is ``u / ||u||``.
    Zero code rows leave their column unchanged and are reported in
    ``info["skipped"]``.
    """
    D = np.array(D_init, dtype=float, copy=True)
    a, V = np.linalg.eigh(eta * (A.T @ A)) if A.size else (np.zeros(D.shape[0]), np.eye(D.shape[0]))
    a = np.maximum(a, 0.0)
    row_sq = np.sum(Xc * Xc, axis=1)
    skipped = [j for j in range(D.shape[1]) if row_sq[j] == 0]
    ridged = False
    passes = 0
    for _ in range(max_pass):
        passes += 1
        biggest = 0.0
        for j in range(D.shape[1]):
            if row_sq[j] == 0:
                continue
            q = row_sq[j] + a
            if q.min() < 1e-10:
                q = q + 1e-10
                ridged = True
            R = Yc - D @ Xc + np.outer(D[:, j], Xc[j])
            new = _ball_quadratic_min(q, V, R @ Xc[j])
            biggest = max(biggest, float(np.linalg.norm(new - D[:, j])))
            D[:, j] = new
        if biggest < tol:
            break
    if return_info:
        return D, {"skipped": skipped, "ridged": ridged, "passes": passes}
    return D


def edlsi_update_Dc(
    Yc, Xc, A, D_init, eta, rho=1.0, max_iter=100, tol=1e-5, inner_pass=10, return_info=False
):
    """ADMM update of one class dictionary with a single factorization.

    Splits ``D_c = Z``: the ``D_c`` step is the column-wise surrogate update
    on ``(E + rho/2 (Z - U), F + rho/2 I)`` and the ``Z`` step solves
    ``(2 eta A^T A + rho I) Z = rho (D_c + U)`` with a Cholesky factor
    computed once. Iterates until both primal and dual residuals fall below
    ``tol``; the result is kept only if it does not raise the objective.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    D_init = np.asarray(D_init, dtype=float)
    d, k = D_init.shape
    E, F = Yc @ Xc.T, Xc @ Xc.T
    Fbar = F + 0.5 * rho * np.eye(k)
    factor = cho_factor(2 * eta * (A.T @ A) + rho * np.eye(d))
    info = {"factorizations": 1, "iterations": 0, "accepted": True}

    Dk, Z, U = D_init.copy(), D_init.copy(), np.zeros_like(D_init)
    for it in range(1, max_iter + 1):
        Dk = odl_dict_update(E + 0.5 * rho * (Z - U), Fbar, Dk, max_pass=inner_pass)
        Z_prev = Z
        Z = cho_solve(factor, rho * (Dk + U))
        U = U + Dk - Z
        scale = max(1.0, float(np.linalg.norm(Dk)))
        info["iterations"] = it
        if np.linalg.norm(Dk - Z) / scale < tol and np.linalg.norm(Z - Z_prev) / scale < tol:
            break
    if dc_objective(Yc, Xc, A, Dk, eta) > dc_objective(Yc, Xc, A, D_init, eta):
        info["accepted"] = False
        Dk = D_init.copy()
    return (Dk, info) if return_info else Dk


@dataclass
class DlsiModel:
    """Per-class dictionaries with their training weights."""

    dictionaries: list[np.ndarray]
    lam: float
    eta: float
    classes: np.ndarray
    history: list[float] = field(default_factory=list)


def cross_coherence(dicts) -> float:
    """``sum_{c != j} ||D_j^T D_c||^2``."""
    return float(
        sum(np.sum((Dj.T @ Dc) ** 2) for c, Dc in enumerate(dicts) for j, Dj in enumerate(dicts) if j != c)
    )


def dlsi_train(
    Y, labels, k, lam, eta, iters=30, tol=1e-4, rho=1.0, coding_iter=300, admm_iter=100, method="efficient"
) -> DlsiModel:
    """Alternate per-class lasso coding and per-class dictionary updates.

    Dictionaries start from the first ``k`` samples of each class. The
    dictionary step uses :func:`edlsi_update_Dc` (``method="efficient"``) or
    :func:`odlsi_update_Dc` (``method="original"``); with a single class it
    is the plain surrogate update.
    """
    Y = np.asarray(Y, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    Y_list = [Y[:, labels == c] for c in classes]
    ks = [int(v) for v in (k if np.ndim(k) else [k] * len(classes))]
    dicts = [initial_dictionary(Yc, kc) for Yc, kc in zip(Y_list, ks)]
    codes = [np.zeros((kc, Yc.shape[1])) for Yc, kc in zip(Y_list, ks)]
    history = [dlsi_cost(dicts, Y_list, codes, lam, eta)]
    for _ in range(iters):
        codes = [
            lasso_code(Yc, Dc, 0.5 * lam, max_iter=coding_iter, init=Xc)
            for Yc, Dc, Xc in zip(Y_list, dicts, codes)
        ]
        for c in range(len(classes)):
            Yc, Xc = Y_list[c], codes[c]
            if len(classes) == 1:
                dicts[c] = odl_dict_update(Yc @ Xc.T, Xc @ Xc.T, dicts[c])
                continue
            A = other_classes_matrix(dicts, c)
            if method == "efficient":
                dicts[c] = edlsi_update_Dc(Yc, Xc, A, dicts[c], eta, rho=rho, max_iter=admm_iter)
            else:
                new = odlsi_update_Dc(Yc, Xc, A, dicts[c], eta)
                if dc_objective(Yc, Xc, A, new, eta) <= dc_objective(Yc, Xc, A, dicts[c], eta):
                    dicts[c] = new
        history.append(dlsi_cost(dicts, Y_list, codes, lam, eta))
        if not np.isfinite(history[-1]):
            raise FloatingPointError("training cost became non-finite")
        if abs(history[-2] - history[-1]) < tol * max(abs(history[-2]), 1e-12):
            break
    return DlsiModel(dicts, lam, eta, classes, history)


def dlsi_scores(Y, model: DlsiModel) -> np.ndarray:
    """``min_x ||y - D_c x||^2 + lam ||x||_1`` for every class, shape ``(N, C)``."""
    Y2 = np.atleast_2d(np.asarray(Y, dtype=float).T).T
    out = np.empty((Y2.shape[1], len(model.dictionaries)))
    for c, Dc in enumerate(model.dictionaries):
        X = lasso_code(Y2, Dc, 0.5 * model.lam)
        out[:, c] = np.sum((Y2 - Dc @ X) ** 2, axis=0) + model.lam * np.abs(X).sum(axis=0)
    return out


def dlsi_predict(Y, model: DlsiModel) -> np.ndarray:
    return model.classes[np.argmin(dlsi_scores(Y, model), axis=1)]


def dlsi_classify(y, model: DlsiModel) -> ClassificationResult:
    scores = dlsi_scores(np.asarray(y, dtype=float).reshape(-1, 1), model)[0]
    return ClassificationResult(int(model.classes[int(np.argmin(scores))]), scores)
