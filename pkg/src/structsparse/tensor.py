"""Multi-channel sparse representation classification.

Tensors keep channels on the last axis: samples ``Y`` are ``d x N x T``,
dictionaries ``D`` are ``d x K x T`` and codes ``X`` are ``K x N x T``.
Products are taken channel by channel.

Sparsity structures:

* ``CR``: each channel coded independently (plain l1).
* ``CC``: channels stacked into one long signal sharing one code.
* ``SM``: tube sparsity, l2 norm over the channels of every coefficient.
* ``GT``: group sparsity over each class block across channels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import BlockPartition, doubled_diagonal, extreme_eigenvalue
from .lrsdl import _fisher_grad, efddl_update_D, fddl_cost, lrsdl_lipschitz
from .odl import odl_learn
from .results import ClassificationResult
from .solvers import FistaProblem, ProxKind, fista_solve, penalty_value


class SparsityMode(enum.Enum):
    CR = "cr"
    CC = "cc"
    SM = "sm"
    GT = "gt"


@dataclass
class TensorDictionary:
    """Per-channel dictionaries with a common block partition.

    The last block of ``partition`` (its shared part) holds the ground atoms.
    ``classes`` gives the label of every class block.
    """

    D: np.ndarray
    partition: BlockPartition
    classes: np.ndarray | None = None

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=float)
        if self.D.ndim == 2:
            self.D = self.D[:, :, None]
        if self.partition.total != self.D.shape[1]:
            raise ValueError("partition does not match the number of atoms")
        if self.classes is None:
            self.classes = np.arange(1, self.partition.n_classes + 1)
        self.classes = np.asarray(self.classes)

    @property
    def n_channels(self) -> int:
        return self.D.shape[2]


@dataclass
class ConfuserThresholds:
    """``eps``: floor on ground-removed energy; ``tau``: ceiling on the best class residual."""

    eps: float = 0.0
    tau: float = float("inf")


def as_tensor(Y) -> np.ndarray:
    """View a matrix as a one-channel tensor; tensors pass through."""
    Y = np.asarray(Y, dtype=float)
    return Y[:, :, None] if Y.ndim == 2 else Y


def channel_matmul(D: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Channel-wise product ``(d x K x T) * (K x N x T) -> d x N x T``."""
    return np.matmul(D.transpose(2, 0, 1), X.transpose(2, 0, 1)).transpose(1, 2, 0)


def channel_transpose_matmul(D: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Channel-wise ``D_t^T Y_t``."""
    return np.matmul(D.transpose(2, 1, 0), Y.transpose(2, 0, 1)).transpose(1, 2, 0)


def _prox_kind(mode: SparsityMode, nonneg: bool) -> ProxKind:
    base = {
        SparsityMode.CR: ProxKind.L1,
        SparsityMode.CC: ProxKind.L1,
        SparsityMode.SM: ProxKind.TUBE_L2,
        SparsityMode.GT: ProxKind.GROUP_L2,
    }[mode]
    return base.with_nonneg(nonneg)


def _fista_channels(Y, D, lam, kind, groups, max_iter, tol):
    Dt = D.transpose(2, 0, 1)
    G = np.matmul(Dt.transpose(0, 2, 1), Dt)
    B = channel_transpose_matmul(D, Y)
    L = max(extreme_eigenvalue(g, "max") for g in G)
    K, N, T = D.shape[1], Y.shape[1], Y.shape[2]
    if L <= 0:
        return np.zeros((K, N, T))

    def grad(X):
        return np.matmul(G, X.transpose(2, 0, 1)).transpose(1, 2, 0) - B

    def objective(X):
        R = Y - channel_matmul(D, X)
        return 0.5 * float(np.sum(R * R)) + lam * penalty_value(X, kind, groups)

    prob = FistaProblem(
        grad=grad, L=L, lam=lam, init=np.zeros((K, N, T)), prox=kind, groups=groups,
        max_iter=max_iter, tol=tol, objective=objective,
    )
    return fista_solve(prob)[0]


def tensor_code(
    Y, D, mode: SparsityMode, lam: float, partition: BlockPartition | None = None,
    nonneg: bool = False, max_iter: int = 300, tol: float = 1e-6,
) -> np.ndarray:
    """Sparse code of multi-channel samples.

    Args:
        Y: ``d x N x T`` samples.
        D: ``d x K x T`` dictionary.
        mode: Sparsity structure.
        lam: Penalty weight for ``0.5 sum_t ||Y_t - D_t X_t||^2 + lam g(X)``.
        partition: Atom blocks; required for ``GT``.
        nonneg: Restrict codes to be non-negative.

    Returns:
        ``K x N x T`` code tensor (``CC`` codes are replicated over channels).
    """
    Y, D = as_tensor(Y), as_tensor(D)
    if Y.shape[2] != D.shape[2] or Y.shape[0] != D.shape[0]:
        raise ValueError(f"incompatible shapes {Y.shape} and {D.shape}")
    kind = _prox_kind(mode, nonneg)
    if mode is SparsityMode.CR:
        parts = [
            _fista_channels(Y[:, :, t : t + 1], D[:, :, t : t + 1], lam, kind, None, max_iter, tol)
            for t in range(Y.shape[2])
        ]
        return np.concatenate(parts, axis=2)
    if mode is SparsityMode.CC:
        T = Y.shape[2]
        Ys = Y.transpose(2, 0, 1).reshape(-1, Y.shape[1])[:, :, None]
        Ds = D.transpose(2, 0, 1).reshape(-1, D.shape[1])[:, :, None]
        x = _fista_channels(Ys, Ds, lam, kind, None, max_iter, tol)
        return np.repeat(x, T, axis=2)
    if mode is SparsityMode.GT and partition is None:
        raise ValueError("GT coding needs the atom partition")
    return _fista_channels(Y, D, lam, kind, partition, max_iter, tol)


def src_residuals(Y, td: TensorDictionary, mode: SparsityMode, lam: float, nonneg=False, max_iter=300):
    """Class residuals after removing the ground reconstruction.

    Returns ``(residuals, ground_free_norm, X)`` where ``residuals`` is
    ``N x C`` with ``r_c = ||ybar - D_c x^c||_F`` and ``ybar = y - D_0 x^0``.
    """
    Y = as_tensor(Y)
    X = tensor_code(Y, td.D, mode, lam, td.partition, nonneg, max_iter=max_iter)
    p = td.partition
    Ybar = Y - channel_matmul(td.D[:, p.shared], X[p.shared])
    res = np.empty((Y.shape[1], p.n_classes))
    for c in range(p.n_classes):
        b = p.block(c)
        R = Ybar - channel_matmul(td.D[:, b], X[b])
        res[:, c] = np.sqrt(np.sum(R * R, axis=(0, 2)))
    return res, np.sqrt(np.sum(Ybar * Ybar, axis=(0, 2))), X


def _decide(res, energy, td, thresholds, confuser_classes):
    idx = np.argmin(res, axis=1)
    labels = td.classes[idx].astype(np.int64)
    reject = np.zeros(len(idx), dtype=bool)
    if thresholds is not None:
        reject = (res.min(axis=1) > thresholds.tau) | (energy < thresholds.eps)
    reject |= np.isin(labels, list(confuser_classes))
    labels[reject] = 0
    return labels, reject


def generalized_src_predict(
    Y, td: TensorDictionary, mode: SparsityMode, lam: float,
    thresholds: ConfuserThresholds | None = None, nonneg=False, confuser_classes=(),
) -> np.ndarray:
    """Labels for every sample column; 0 marks confusers.

    A sample is a confuser when its best residual exceeds ``tau``, when
    little energy is left after removing the ground (``< eps``), or when its
    best class is listed in ``confuser_classes``.
    """
    res, energy, _ = src_residuals(Y, td, mode, lam, nonneg)
    return _decide(res, energy, td, thresholds, confuser_classes)[0]


def generalized_src(
    y, td: TensorDictionary, mode: SparsityMode, lam: float,
    thresholds: ConfuserThresholds | None = None, nonneg=False, confuser_classes=(),
) -> ClassificationResult:
    """Classify one multi-channel sample given as ``d x T`` or ``d x 1 x T``."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 2 and td.n_channels == y.shape[1] and y.shape[1] != 1:
        y = y[:, None, :]
    y = as_tensor(y)
    res, energy, X = src_residuals(y, td, mode, lam, nonneg)
    labels, reject = _decide(res, energy, td, thresholds, confuser_classes)
    return ClassificationResult(int(labels[0]), res[0], confuser=bool(reject[0]), low_confidence=not X.any())


def calibrate_thresholds(
    td: TensorDictionary, mode: SparsityMode, lam: float, grounds, heldout, heldout_labels, nonneg=False
) -> ConfuserThresholds:
    """``eps`` = 5th percentile of ground-removed energy over ground samples;
    ``tau`` = 95th percentile of correct-class residuals on held-out samples."""
    _, energy, _ = src_residuals(grounds, td, mode, lam, nonneg)
    res, _, _ = src_residuals(heldout, td, mode, lam, nonneg)
    idx = np.searchsorted(td.classes, np.asarray(heldout_labels))
    correct = res[np.arange(res.shape[0]), idx]
    return ConfuserThresholds(float(np.percentile(energy, 5)), float(np.percentile(correct, 95)))


def denoise_decompose(Y, D_objects, D_ground, lam: float, nonneg=False):
    """Split samples into an object part and a ground part by tube-sparse coding."""
    Y, Do, Dg = as_tensor(Y), as_tensor(D_objects), as_tensor(D_ground)
    X = tensor_code(Y, np.concatenate([Do, Dg], axis=1), SparsityMode.SM, lam, nonneg=nonneg)
    Ko = Do.shape[1]
    return channel_matmul(Do, X[:Ko]), channel_matmul(Dg, X[Ko:])


def shift_dictionary(D: np.ndarray, partition: BlockPartition, t: int) -> np.ndarray:
    """Circularly shift the columns of every class block left by ``t - 1``.

    The shared (ground) block is left in place.
    """
    if t < 1:
        raise ValueError("look index starts at 1")
    D = np.asarray(D, dtype=float)
    out = D.copy()
    for sl in partition.blocks(include_shared=False):
        out[:, sl] = np.roll(D[:, sl], -(t - 1), axis=1)
    return out


def shift_tensor_dictionary(D, partition, n_looks: int, first_look: int = 1, classes=None) -> TensorDictionary:
    """Stack ``shift_dictionary(D, t)`` for consecutive looks as channels."""
    chans = [shift_dictionary(D, partition, first_look + i) for i in range(n_looks)]
    return TensorDictionary(np.stack(chans, axis=2), partition, classes)


def shiftsrc_predict(
    looks, D, partition, lam, thresholds=None, first_look=1, nonneg=False, confuser_classes=(), classes=None
) -> np.ndarray:
    """Multi-look classification; ``looks`` is ``d x N x n_looks``."""
    looks = as_tensor(looks)
    td = shift_tensor_dictionary(D, partition, looks.shape[2], first_look, classes)
    return generalized_src_predict(looks, td, SparsityMode.SM, lam, thresholds, nonneg, confuser_classes)


def shiftsrc_classify(
    looks, D, partition, lam, thresholds=None, first_look=1, nonneg=False, classes=None
) -> ClassificationResult:
    """Classify one object seen from consecutive view angles.

    Args:
        looks: Sequence of ``d``-vectors, one per look, at least two.
        D: ``d x K`` dictionary; each class block ordered by view angle.
        partition: Class blocks plus the ground block.
    """
    cols = [np.asarray(v, dtype=float).ravel() for v in looks]
    if len(cols) < 2:
        raise ValueError("ShiftSRC needs at least two looks")
    y = np.stack(cols, axis=1)[:, None, :]
    td = shift_tensor_dictionary(D, partition, len(cols), first_look, classes)
    return generalized_src(y, td, SparsityMode.SM, lam, thresholds, nonneg)


def src_dictionary(Y, labels, ground_label: int = 0) -> TensorDictionary:
    """Training samples as atoms, grouped by class, ground samples last.

    Columns are normalized to unit norm in every channel.
    """
    Y = as_tensor(Y)
    labels = np.asarray(labels)
    classes = np.array([c for c in np.unique(labels) if c != ground_label])
    blocks = [Y[:, labels == c] for c in classes]
    ground = Y[:, labels == ground_label]
    D = np.concatenate(blocks + [ground], axis=1)
    D = D / np.maximum(np.linalg.norm(D, axis=0, keepdims=True), 1e-300)
    part = BlockPartition(tuple(b.shape[1] for b in blocks), ground.shape[1])
    return TensorDictionary(D, part, classes)


@dataclass
class TensorDLResult:
    """Learned tensor dictionary and training cost trace."""

    dictionary: TensorDictionary
    history: list[float] = field(default_factory=list)


def tensordl_cost(Y, D, X, lam1, lam2, mode, dpart, spart, nonneg=False) -> float:
    """``sum_t (0.5 f_t + lam2/2 g(X_t)) + lam1 * penalty(X)``."""
    total = sum(fddl_cost(Y[:, :, t], D[:, :, t], X[:, :, t], 0.0, lam2, dpart, spart) for t in range(Y.shape[2]))
    return total + lam1 * penalty_value(X, _prox_kind(mode, nonneg), dpart)


def _tensordl_update_X(Y, D, X, lam1, lam2, mode, dpart, spart, nonneg, max_iter, tol):
    T = Y.shape[2]
    MDtD = [doubled_diagonal(D[:, :, t].T @ D[:, :, t], dpart, dpart) for t in range(T)]
    MDtY = [doubled_diagonal(D[:, :, t].T @ Y[:, :, t], dpart, spart) for t in range(T)]
    empty = np.zeros((D.shape[0], 0))
    L = max(lrsdl_lipschitz(D[:, :, t], empty, lam2, dpart) for t in range(T))

    def grad(Z):
        return np.stack([_fisher_grad(MDtD[t], MDtY[t], Z[:, :, t], lam2, spart) for t in range(T)], axis=2)

    prob = FistaProblem(
        grad=grad, L=L, lam=lam1, init=X, prox=_prox_kind(mode, nonneg), groups=dpart,
        max_iter=max_iter, tol=tol,
        objective=lambda Z: tensordl_cost(Y, D, Z, lam1, lam2, mode, dpart, spart, nonneg),
    )
    return fista_solve(prob)[0]


def tensordl_train(
    Y, labels, k, lam1, lam2, mode: SparsityMode = SparsityMode.SM,
    iters=50, tol=1e-4, init_iters=10, fista_iter=300, nonneg=False, ground_label=None,
) -> TensorDLResult:
    """Fisher-discriminative dictionary learning on multi-channel data.

    Channels share the sparsity structure of ``mode`` through the code
    penalty while each channel keeps its own dictionary. ``CC`` learns one
    dictionary on the channel-stacked signals. Class blocks start from a
    reconstructive dictionary learned on the channel-stacked class samples,
    so atom ``j`` describes the same structure in every channel.

    When ``ground_label`` is given, that class's block becomes the shared
    (ground) block of the returned dictionary.
    """
    Y = as_tensor(Y)
    labels = np.asarray(labels)
    order = np.argsort(labels, kind="stable")
    Y, labels = Y[:, order], labels[order]
    classes = np.unique(labels)
    T = Y.shape[2]
    if mode is SparsityMode.CC and T > 1:
        stacked = Y.transpose(2, 0, 1).reshape(-1, Y.shape[1])
        res = tensordl_train(stacked, labels, k, lam1, lam2, SparsityMode.CR, iters, tol, init_iters,
                             fista_iter, nonneg, ground_label)
        Ds = res.dictionary.D[:, :, 0]
        D = Ds.reshape(T, Y.shape[0], -1).transpose(1, 2, 0)
        return TensorDLResult(TensorDictionary(D, res.dictionary.partition, res.dictionary.classes), res.history)

    spart = BlockPartition.from_labels(labels)
    ks = [int(v) for v in (k if np.ndim(k) else [k] * len(classes))]
    dpart = BlockPartition(tuple(ks))
    d, N = Y.shape[:2]
    D = np.zeros((d, dpart.total, T))
    X = np.zeros((dpart.total, N, T))
    for c in range(len(classes)):
        a, s = dpart.block(c), spart.block(c)
        Yc = Y[:, s].transpose(2, 0, 1).reshape(-1, s.stop - s.start)
        Dc, Xc = odl_learn(Yc, ks[c], lam1, iters=init_iters)
        D[:, a] = Dc.reshape(T, d, -1).transpose(1, 2, 0)
        X[a, s] = Xc[:, :, None]
    if nonneg:
        X = np.maximum(X, 0.0)

    history = [tensordl_cost(Y, D, X, lam1, lam2, mode, dpart, spart, nonneg)]
    for _ in range(iters):
        X = _tensordl_update_X(Y, D, X, lam1, lam2, mode, dpart, spart, nonneg, fista_iter, 1e-6)
        for t in range(T):
            D[:, :, t] = efddl_update_D(Y[:, :, t], X[:, :, t], D[:, :, t], dpart, spart)
        history.append(tensordl_cost(Y, D, X, lam1, lam2, mode, dpart, spart, nonneg))
        if not np.isfinite(history[-1]):
            raise FloatingPointError("training cost became non-finite")
        if abs(history[-2] - history[-1]) < tol * max(abs(history[-2]), 1e-12):
            break

    if ground_label is not None and ground_label in classes:
        g = int(np.flatnonzero(classes == ground_label)[0])
        keep = [c for c in range(len(classes)) if c != g]
        D = np.concatenate([D[:, dpart.block(c)] for c in keep] + [D[:, dpart.block(g)]], axis=1)
        part = BlockPartition(tuple(ks[c] for c in keep), ks[g])
        td = TensorDictionary(D, part, classes[keep])
    else:
        td = TensorDictionary(D, dpart, classes)
    return TensorDLResult(td, history)


@dataclass
class TensorModel:
    """A tensor dictionary with the coding settings used to classify."""

    dictionary: TensorDictionary
    mode: SparsityMode = SparsityMode.SM
    lam: float = 0.02
    nonneg: bool = False
    thresholds: ConfuserThresholds | None = None


def tensor_predict(Y, model: TensorModel) -> np.ndarray:
    """Labels for every sample column of ``Y``; 0 marks confusers."""
    return generalized_src_predict(Y, model.dictionary, model.mode, model.lam, model.thresholds, model.nonneg)
