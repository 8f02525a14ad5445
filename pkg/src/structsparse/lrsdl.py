"""Fisher-discriminative dictionary learning with an optional low-rank shared dictionary.

Notation: ``Y`` is ``d x N`` with samples grouped by class (``spart``);
``D`` is ``d x K`` with atoms grouped by class (``dpart``); ``X`` is the
``K x N`` code. The shared dictionary ``D0`` (``d x k0``) and its code ``X0``
may be empty, in which case every routine reduces to plain FDDL.

The training cost is::

    J = 0.5 f(Y - D0 X0; D, X) + lam1 (|X|_1 + |X0|_1)
        + lam2/2 (g(X) + ||X0 - M0||^2) + eta ||D0||_*

with the fidelity ``f`` and the Fisher term ``g`` defined in
:func:`fddl_fidelity` and :func:`fisher_term`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    BlockPartition,
    column_mean_matrix,
    doubled_diagonal,
    extreme_eigenvalue,
    svt,
)
from .odl import dict_objective, odl_dict_update, odl_learn
from .results import ClassificationResult
from .solvers import FistaProblem, fista_solve


def fisher_means(X: np.ndarray, spart: BlockPartition) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(M, M_hat)``.

    ``M`` repeats the global mean code over all columns and ``M_hat``
    repeats each class mean over that class's columns.
    """
    N = X.shape[1]
    M = column_mean_matrix(X, N)
    M_hat = np.empty_like(X)
    for sl in spart.blocks(include_shared=False):
        M_hat[:, sl] = X[:, sl].mean(axis=1, keepdims=True)
    return M, M_hat


def fddl_fidelity(Y, D, X, dpart: BlockPartition, spart: BlockPartition) -> float:
    """Sum over classes of ``||Y_c - D X_c||^2 + ||Y_c - D_c X_c^c||^2 + sum_{j != c} ||D_j X_c^j||^2``."""
    total = 0.0
    for c in range(spart.n_classes):
        s = spart.block(c)
        Yc, Xc = Y[:, s], X[:, s]
        R = Yc - D @ Xc
        total += np.sum(R * R)
        for j in range(dpart.n_classes):
            a = dpart.block(j)
            P = D[:, a] @ Xc[a]
            total += np.sum((Yc - P) ** 2) if j == c else np.sum(P * P)
    return float(total)


def fisher_term(X: np.ndarray, spart: BlockPartition) -> float:
    """``sum_c (||X_c - M_c||^2 - ||M_c - M||^2) + ||X||^2``."""
    m = X.mean(axis=1)
    g = float(np.sum(X * X))
    for sl in spart.blocks(include_shared=False):
        Xc = X[:, sl]
        mc = Xc.mean(axis=1)
        g += float(np.sum((Xc - mc[:, None]) ** 2)) - Xc.shape[1] * float(np.sum((mc - m) ** 2))
    return g


def fddl_cost(Y, D, X, lam1: float, lam2: float, dpart: BlockPartition, spart: BlockPartition) -> float:
    """``0.5 f + lam1 ||X||_1 + lam2/2 g``."""
    return (
        0.5 * fddl_fidelity(Y, D, X, dpart, spart)
        + lam1 * float(np.abs(X).sum())
        + 0.5 * lam2 * fisher_term(X, spart)
    )


def lrsdl_cost(Y, D, D0, X, X0, lam1, lam2, eta, dpart, spart, nuclear: float | None = None) -> float:
    """Full training cost. ``nuclear`` may pass a precomputed ``||D0||_*``."""
    Ybar = Y - D0 @ X0
    cost = fddl_cost(Ybar, D, X, lam1, lam2, dpart, spart)
    if X0.shape[0]:
        M0 = column_mean_matrix(X0, X0.shape[1])
        cost += lam1 * float(np.abs(X0).sum()) + 0.5 * lam2 * float(np.sum((X0 - M0) ** 2))
        if nuclear is None:
            nuclear = float(np.linalg.svd(D0, compute_uv=False).sum())
        cost += eta * nuclear
    return cost


def efddl_grad_X(Y, D, X, lam2, dpart: BlockPartition, spart: BlockPartition) -> np.ndarray:
    """Gradient of ``0.5 f + lam2/2 g`` with respect to ``X``.

    ``(M(D^T D) + 2 lam2 I) X - M(D^T Y) + lam2 (M - 2 M_hat)``.
    """
    MDtD = doubled_diagonal(D.T @ D, dpart, dpart)
    MDtY = doubled_diagonal(D.T @ Y, dpart, spart)
    return _fisher_grad(MDtD, MDtY, X, lam2, spart)


def _fisher_grad(MDtD, MDtY, X, lam2, spart):
    M, M_hat = fisher_means(X, spart)
    return MDtD @ X + 2 * lam2 * X - MDtY + lam2 * (M - 2 * M_hat)


def lrsdl_grad_X(Y, D, D0, X, X0, lam2, dpart, spart) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the smooth part of the training cost in ``(X, X0)``.

    The upper block is :func:`efddl_grad_X` on ``Y - D0 X0``. The lower block
    is ``(2 D0^T D0 + lam2 I) X0 - 2 D0^T V - lam2 M0`` with
    ``V = Y - 0.5 D M(X)``.
    """
    gX = efddl_grad_X(Y - D0 @ X0, D, X, lam2, dpart, spart)
    if X0.shape[0] == 0:
        return gX, np.zeros_like(X0)
    V = Y - 0.5 * D @ doubled_diagonal(X, dpart, spart)
    M0 = column_mean_matrix(X0, X0.shape[1])
    gX0 = 2 * D0.T @ (D0 @ X0) + lam2 * X0 - 2 * D0.T @ V - lam2 * M0
    return gX, gX0


def lrsdl_lipschitz(D, D0, lam2, dpart) -> float:
    """``lambda_max(M(D^T D)) + 2 lam2 + lambda_max(2 D0^T D0 + lam2 I) + 4 lam2 + 1``."""
    L = extreme_eigenvalue(doubled_diagonal(D.T @ D, dpart, dpart), "max") + 2 * lam2
    if D0.shape[1]:
        L += extreme_eigenvalue(2 * D0.T @ D0, "max") + lam2
    return L + 4 * lam2 + 1


def lrsdl_update_X(Y, D, D0, X, X0, lam1, lam2, dpart, spart, eta=0.0, max_iter=300, tol=1e-6):
    """Jointly update ``(X, X0)`` by FISTA on the training cost.

    The returned pair never has a higher cost than the input pair.
    """
    K, k0 = X.shape[0], X0.shape[0]
    MDtD = doubled_diagonal(D.T @ D, dpart, dpart)
    G0 = D0.T @ D0
    nuclear = float(np.linalg.svd(D0, compute_uv=False).sum()) if k0 else 0.0

    def grad(Z):
        Xz, X0z = Z[:K], Z[K:]
        MDtY = doubled_diagonal(D.T @ (Y - D0 @ X0z), dpart, spart)
        gX = _fisher_grad(MDtD, MDtY, Xz, lam2, spart)
        if k0 == 0:
            return gX
        V = Y - 0.5 * D @ doubled_diagonal(Xz, dpart, spart)
        M0 = column_mean_matrix(X0z, X0z.shape[1])
        gX0 = 2 * G0 @ X0z + lam2 * X0z - 2 * D0.T @ V - lam2 * M0
        return np.vstack([gX, gX0])

    def objective(Z):
        return lrsdl_cost(Y, D, D0, Z[:K], Z[K:], lam1, lam2, eta, dpart, spart, nuclear)

    prob = FistaProblem(
        grad=grad,
        L=lrsdl_lipschitz(D, D0, lam2, dpart),
        lam=lam1,
        init=np.vstack([X, X0]),
        max_iter=max_iter,
        tol=tol,
        objective=objective,
    )
    Z, _ = fista_solve(prob)
    return Z[:K], Z[K:]


def efddl_update_X(Y, D, X, lam1, lam2, dpart, spart, max_iter=300, tol=1e-6) -> np.ndarray:
    """FDDL code update; identical to :func:`lrsdl_update_X` without a shared dictionary."""
    D0 = np.zeros((D.shape[0], 0))
    X0 = np.zeros((0, X.shape[1]))
    return lrsdl_update_X(Y, D, D0, X, X0, lam1, lam2, dpart, spart, max_iter=max_iter, tol=tol)[0]


def fddl_dict_terms(Y, X, dpart, spart) -> tuple[np.ndarray, np.ndarray]:
    """``E = Y M(X^T)`` and ``F = M(X X^T)`` so that ``f(D) = -2tr(ED^T) + tr(DFD^T) + const``."""
    E = Y @ doubled_diagonal(X, dpart, spart).T
    F = doubled_diagonal(X @ X.T, dpart, dpart)
    return E, 0.5 * (F + F.T)


def efddl_update_D(Y, X, D_init, dpart, spart, max_pass=10, tol=1e-6) -> np.ndarray:
    """Class-dictionary update by the column-wise surrogate solver."""
    E, F = fddl_dict_terms(Y, X, dpart, spart)
    return odl_dict_update(E, F, D_init, max_pass=max_pass, tol=tol)


def shared_dict_objective(D0, E, F, eta) -> float:
    """``tr(D0 F D0^T) - 2 tr(E D0^T) + eta ||D0||_*``."""
    nuc = float(np.linalg.svd(D0, compute_uv=False).sum()) if D0.size else 0.0
    return dict_objective(D0, E, F) + eta * nuc


def lrsdl_update_D0(
    Y, D, X, D0, X0, eta, dpart, spart,
    rho=1.0, max_iter=100, tol=1e-5, inner_pass=10, return_info=False,
):
    """Shared-dictionary update by ADMM with singular value thresholding.

    Solves ``min ||V - D0 X0||^2 + eta ||D0||_*`` over unit-ball columns,
    ``V = Y - 0.5 D M(X)``. Stops when both the primal residual
    ``||D0 - Z||`` and the dual residual ``||Z - Z_prev||`` (relative to
    ``max(1, ||D0||)``) drop below ``tol``. The result is kept only if it
    lowers the objective; otherwise ``D0`` is returned unchanged.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    D0 = np.asarray(D0, dtype=float)
    info = {"iterations": 0, "degenerate": False, "accepted": True}
    V = Y - 0.5 * D @ doubled_diagonal(X, dpart, spart)
    E, F = V @ X0.T, X0 @ X0.T
    if not np.any(F):
        info["degenerate"] = True
        return (D0.copy(), info) if return_info else D0.copy()

    k0 = D0.shape[1]
    Fbar = F + 0.5 * rho * np.eye(k0)
    Dk, Z, U = D0.copy(), D0.copy(), np.zeros_like(D0)
    for it in range(1, max_iter + 1):
        Dk = odl_dict_update(E + 0.5 * rho * (Z - U), Fbar, Dk, max_pass=inner_pass)
        Z_prev = Z
        Z = svt(Dk + U, eta / rho)
        U = U + Dk - Z
        scale = max(1.0, float(np.linalg.norm(Dk)))
        info["iterations"] = it
        if np.linalg.norm(Dk - Z) / scale < tol and np.linalg.norm(Z - Z_prev) / scale < tol:
            break
    if shared_dict_objective(Dk, E, F, eta) > shared_dict_objective(D0, E, F, eta):
        info["accepted"] = False
        Dk = D0.copy()
    return (Dk, info) if return_info else Dk


@dataclass
class LrsdlModel:
    """Trained discriminative dictionary with an optional shared part.

    Attributes:
        D: Class dictionaries side by side, ``d x K``.
        partition: Atom partition of ``D`` (class blocks only).
        D0: Shared dictionary ``d x k0`` (``k0`` may be 0).
        class_means: ``K x C`` matrix; column ``c`` is the mean code of class ``c``.
        shared_mean: Mean shared code, length ``k0``.
        classes: Class labels in block order.
        history: Training cost after initialization and each outer iteration.
    """

    D: np.ndarray
    partition: BlockPartition
    D0: np.ndarray
    class_means: np.ndarray
    shared_mean: np.ndarray
    lam1: float
    lam2: float
    eta: float
    classes: np.ndarray
    w: float = 0.5
    history: list[float] = field(default_factory=list)

    @property
    def k0(self) -> int:
        return self.D0.shape[1]


def _sort_by_label(Y, labels):
    labels = np.asarray(labels)
    order = np.argsort(labels, kind="stable")
    classes = np.unique(labels)
    return Y[:, order], labels[order], classes


def _sizes(k, C):
    return tuple(int(v) for v in (k if np.ndim(k) else [k] * C))


def lrsdl_train(
    Y, labels, k, k0, lam1, lam2, eta,
    iters=50, tol=1e-4, rho=1.0, w=0.5, init_iters=10, fista_iter=300, admm_iter=100,
) -> LrsdlModel:
    """Train LRSDL (or FDDL when ``k0 == 0``).

    Args:
        Y: ``d x N`` training samples.
        labels: Length-``N`` class labels.
        k: Atoms per class (int or one value per class).
        k0: Number of shared atoms.
        lam1, lam2, eta: Sparsity, Fisher and nuclear-norm weights.
        iters: Maximum outer iterations.
        tol: Early stop when the relative cost change falls below it.
    """
    Y, labels, classes = _sort_by_label(np.asarray(Y, dtype=float), labels)
    spart = BlockPartition.from_labels(labels)
    dpart = BlockPartition(_sizes(k, len(classes)))
    d, N = Y.shape

    D = np.zeros((d, dpart.total))
    X = np.zeros((dpart.total, N))
    for c in range(len(classes)):
        a, s = dpart.block(c), spart.block(c)
        D[:, a], X[a, s] = odl_learn(Y[:, s], dpart.class_sizes[c], lam1, iters=init_iters)
    if k0 > 0:
        D0, X0 = odl_learn(Y, k0, lam1, iters=init_iters)
    else:
        D0, X0 = np.zeros((d, 0)), np.zeros((0, N))

    def cost():
        return lrsdl_cost(Y, D, D0, X, X0, lam1, lam2, eta, dpart, spart)

    history = [cost()]
    for _ in range(iters):
        X, X0 = lrsdl_update_X(Y, D, D0, X, X0, lam1, lam2, dpart, spart, eta=eta, max_iter=fista_iter)
        D = efddl_update_D(Y - D0 @ X0, X, D, dpart, spart)
        if k0 > 0:
            D0 = lrsdl_update_D0(Y, D, X, D0, X0, eta, dpart, spart, rho=rho, max_iter=admm_iter)
        history.append(cost())
        if not np.isfinite(history[-1]):
            raise FloatingPointError("training cost became non-finite")
        if abs(history[-2] - history[-1]) < tol * max(abs(history[-2]), 1e-12):
            break

    means = np.stack([X[:, spart.block(c)].mean(axis=1) for c in range(len(classes))], axis=1)
    m0 = X0.mean(axis=1) if k0 else np.zeros(0)
    return LrsdlModel(D, dpart, D0, means, m0, lam1, lam2, eta, classes, w, history)


def fddl_train(Y, labels, k, lam1, lam2, **kwargs) -> LrsdlModel:
    """FDDL training, i.e. :func:`lrsdl_train` without a shared dictionary."""
    return lrsdl_train(Y, labels, k, 0, lam1, lam2, 0.0, **kwargs)


def lrsdl_code(Y, model: LrsdlModel, max_iter=300, tol=1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Codes ``(X, X0)`` of test samples.

    Minimizes ``0.5 ||y - [D D0] xbar||^2 + lam2/2 ||x0 - m0||^2 + lam1 ||xbar||_1``.
    """
    Y2 = np.atleast_2d(np.asarray(Y, dtype=float).T).T
    K, k0 = model.D.shape[1], model.k0
    Dbar = np.hstack([model.D, model.D0])
    G, B = Dbar.T @ Dbar, Dbar.T @ Y2
    m0 = model.shared_mean[:, None]
    lam2 = model.lam2 if k0 else 0.0

    def grad(Z):
        g = G @ Z - B
        if k0:
            g[K:] += lam2 * (Z[K:] - m0)
        return g

    def objective(Z):
        R = Y2 - Dbar @ Z
        val = 0.5 * float(np.sum(R * R)) + model.lam1 * float(np.abs(Z).sum())
        return val + 0.5 * lam2 * float(np.sum((Z[K:] - m0) ** 2))

    L = extreme_eigenvalue(G, "max") + lam2
    prob = FistaProblem(
        grad=grad, L=L, lam=model.lam1, init=np.zeros((K + k0, Y2.shape[1])),
        max_iter=max_iter, tol=tol, objective=objective,
    )
    Z, _ = fista_solve(prob)
    return Z[:K], Z[K:]


def lrsdl_scores(Y, model: LrsdlModel, w: float | None = None):
    """Per-class scores ``w ||ybar - D_c x^c||^2 + (1 - w) ||x - m_c||^2``.

    Returns ``(scores, zero_code)`` with ``scores`` of shape ``(N, C)``.
    """
    w = model.w if w is None else w
    Y2 = np.atleast_2d(np.asarray(Y, dtype=float).T).T
    X, X0 = lrsdl_code(Y2, model)
    Ybar = Y2 - model.D0 @ X0
    C = model.partition.n_classes
    scores = np.empty((Y2.shape[1], C))
    for c in range(C):
        a = model.partition.block(c)
        res = np.sum((Ybar - model.D[:, a] @ X[a]) ** 2, axis=0)
        dist = np.sum((X - model.class_means[:, [c]]) ** 2, axis=0)
        scores[:, c] = w * res + (1 - w) * dist
    zero = ~np.any(np.vstack([X, X0]), axis=0)
    if np.any(zero):
        scores[zero] = np.sum(model.class_means**2, axis=0)[None, :]
    return scores, zero


def lrsdl_predict(Y, model: LrsdlModel, w: float | None = None) -> np.ndarray:
    """Predicted labels for the columns of ``Y``."""
    scores, _ = lrsdl_scores(Y, model, w)
    return model.classes[np.argmin(scores, axis=1)]


def lrsdl_classify(y, model: LrsdlModel, w: float | None = None) -> ClassificationResult:
    """Classify one sample; all-zero codes fall back to the nearest class mean."""
    scores, zero = lrsdl_scores(np.asarray(y, dtype=float).reshape(-1, 1), model, w)
    idx = int(np.argmin(scores[0]))
    return ClassificationResult(int(model.classes[idx]), scores[0], low_confidence=bool(zero[0]))
