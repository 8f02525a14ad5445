"""Synthetic datasets.

Every generator is a pure function of its seed and parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BlockPartition, normalize_columns


@dataclass
class LabeledDataset:
    """Samples with integer class labels.

    Attributes:
        samples: ``d x N`` matrix or ``d x N x T`` tensor.
        labels: Length-``N`` integer array; classes are ``1..C`` and 0 tags
            ground-only samples.
        split: ``"train"`` or ``"test"``.
    """

    samples: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim not in (2, 3):
            raise ValueError("samples must be a matrix or a 3-way tensor")
        if self.labels.shape != (self.samples.shape[1],):
            raise ValueError("one label per sample column is required")
        if self.split not in ("train", "test"):
            raise ValueError("split must be 'train' or 'test'")

    @property
    def n_channels(self) -> int:
        return 1 if self.samples.ndim == 2 else self.samples.shape[2]

    def __len__(self) -> int:
        return self.samples.shape[1]


@dataclass
class SharedToy:
    """Output of :func:`gen_shared_toy`."""

    train: LabeledDataset
    test: LabeledDataset
    class_bases: list[np.ndarray]
    shared_basis: np.ndarray


def _rect_element(rng, side, lo, hi):
    img = np.zeros((side, side))
    h, w = rng.integers(lo, hi + 1, size=2)
    r, c = rng.integers(0, side - h + 1), rng.integers(0, side - w + 1)
    img[r : r + h, c : c + w] = 1.0
    return img.ravel()


def gen_shared_toy(
    seed: int = 0,
    n_per_class: int = 1000,
    noise_sd: float = 0.01,
    n_train: int = 200,
    n_classes: int = 4,
    n_class_elements: int = 4,
    n_shared: int = 2,
    side: int = 20,
    shared_gain: float = 2.0,
) -> SharedToy:
    """Four-class images built from class-specific and shared elements.

    Each sample is a non-negative random combination of its class's
    elements plus all shared elements (weighted by ``shared_gain``) plus
    Gaussian noise. Elements are unit-norm ``side x side`` images:
    small random rectangles for the classes and large centred patterns
    for the shared part.
    """
    rng = np.random.default_rng(seed)
    d = side * side
    bases = [
        normalize_columns(np.column_stack([_rect_element(rng, side, 3, 7) for _ in range(n_class_elements)]))
        for _ in range(n_classes)
    ]
    yy, xx = np.mgrid[:side, :side]
    r = np.hypot(yy - (side - 1) / 2, xx - (side - 1) / 2)
    shared = []
    for j in range(n_shared):
        ring = np.exp(-((r - (2.0 + 3.0 * j)) ** 2) / 2.0)
        shared.append(ring.ravel())
    shared_basis = normalize_columns(np.column_stack(shared)) if n_shared else np.zeros((d, 0))

    Xs, labels = [], []
    for c in range(n_classes):
        A = rng.uniform(0, 1, (n_class_elements, n_per_class))
        S = shared_gain * rng.uniform(0, 1, (n_shared, n_per_class))
        Yc = bases[c] @ A + shared_basis @ S + noise_sd * rng.standard_normal((d, n_per_class))
        Xs.append(Yc)
        labels.append(np.full(n_per_class, c + 1))
    tr = np.concatenate([np.arange(n_train) + c * n_per_class for c in range(n_classes)])
    te = np.concatenate([np.arange(n_train, n_per_class) + c * n_per_class for c in range(n_classes)])
    Y, lab = np.hstack(Xs), np.concatenate(labels)
    return SharedToy(
        LabeledDataset(Y[:, tr], lab[tr], "train"),
        LabeledDataset(Y[:, te], lab[te], "test"),
        bases,
        shared_basis,
    )


@dataclass
class PatchData:
    """Output of :func:`gen_two_class_patches`."""

    train: LabeledDataset
    test: LabeledDataset
    atoms: list[np.ndarray]
    shared_atoms: np.ndarray
    patch_size: tuple[int, int] = (8, 8)


def _patch_atoms(rng, patch_size, n, kind):
    h, w = patch_size
    yy, xx = np.mgrid[:h, :w]
    cols = []
    for _ in range(n):
        if kind == 0:
            # oriented gratings
            ang, freq, ph = rng.uniform(0, np.pi), rng.uniform(0.6, 1.6), rng.uniform(0, 2 * np.pi)
            img = np.cos(freq * (np.cos(ang) * xx + np.sin(ang) * yy) + ph)
        else:
            # localized blobs
            cy, cx, s = rng.uniform(0, h - 1), rng.uniform(0, w - 1), rng.uniform(0.8, 2.0)
            img = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
            img -= img.mean()
        cols.append(img.ravel())
    return normalize_columns(np.column_stack(cols))


def sample_patches(rng, atoms, shared, n, sparsity=3, n_shared_used=2, shared_gain=1.0, noise_sd=0.05):
    """Sparse non-negative combinations of class atoms and shared atoms plus noise."""
    d, k = atoms.shape
    Y = np.zeros((d, n))
    for i in range(n):
        idx = rng.choice(k, sparsity, replace=False)
        Y[:, i] = atoms[:, idx] @ rng.uniform(0.5, 1.5, sparsity)
        if shared.shape[1]:
            jdx = rng.choice(shared.shape[1], n_shared_used, replace=False)
            Y[:, i] += shared_gain * (shared[:, jdx] @ rng.uniform(0.5, 1.5, n_shared_used))
    return Y + noise_sd * rng.standard_normal((d, n))


def gen_two_class_patches(
    seed: int = 0,
    n_train: int = 200,
    n_test: int = 500,
    patch_size: tuple[int, int] = (8, 8),
    n_atoms: int = 20,
    n_shared: int = 10,
    noise_sd: float = 0.1,
    shared_gain: float = 1.0,
) -> PatchData:
    """Two texture classes (label 1 gratings, label 2 blobs) that share some atoms."""
    rng = np.random.default_rng(seed)
    atoms = [_patch_atoms(rng, patch_size, n_atoms, kind) for kind in (0, 1)]
    shared = normalize_columns(rng.standard_normal((patch_size[0] * patch_size[1], n_shared)))

    def make(n):
        Y = np.hstack([sample_patches(rng, a, shared, n, shared_gain=shared_gain, noise_sd=noise_sd) for a in atoms])
        return Y, np.repeat([1, 2], n)

    Ytr, ltr = make(n_train)
    Yte, lte = make(n_test)
    return PatchData(LabeledDataset(Ytr, ltr, "train"), LabeledDataset(Yte, lte, "test"), atoms, shared, patch_size)


def gen_patch_images(
    data: PatchData, seed: int, n_images: int, grid=(6, 6), healthy_range=(0.0, 0.25), diseased_range=(0.35, 0.9)
):
    """Tile images from freshly drawn patches.

    Healthy images (first half) and diseased images (second half) differ in
    the fraction of class-2 patches. Returns ``(images, is_healthy, masks)``
    where ``masks`` marks the class-2 tiles.
    """
    rng = np.random.default_rng(seed)
    h, w = data.patch_size
    gh, gw = grid
    images, healthy, masks = [], [], []
    for i in range(n_images):
        is_h = i < n_images // 2
        lo, hi = healthy_range if is_h else diseased_range
        frac = rng.uniform(lo, hi)
        mask = rng.uniform(size=grid) < frac
        img = np.zeros((gh * h, gw * w))
        for r in range(gh):
            for c in range(gw):
                p = sample_patches(rng, data.atoms[int(mask[r, c])], data.shared_atoms, 1)
                img[r * h : (r + 1) * h, c * w : (c + 1) * w] = p.reshape(h, w)
        images.append(img)
        healthy.append(is_h)
        masks.append(mask)
    return images, np.array(healthy), masks


@dataclass
class MultiChannelTargets:
    """Output of :func:`gen_multichannel_targets`.

    Labels: targets ``1..n_targets``, confusers ``n_targets + 1``, ground 0.
    ``train`` holds clean target and known-confuser samples plus ground-only
    samples; ``test`` holds samples corrupted by ground, including samples
    of a confuser set that never appears in training (``unseen_mask``).
    """

    train: LabeledDataset
    test: LabeledDataset
    confuser_label: int
    unseen_mask: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def _unit_energy(S: np.ndarray) -> np.ndarray:
    # total energy T per sample, i.e. unit energy per channel on average
    return S / np.maximum(np.linalg.norm(S, axis=(0, 2), keepdims=True), 1e-300) * np.sqrt(S.shape[2])


def gen_multichannel_targets(
    seed: int = 0,
    n_targets: int = 3,
    n_confuser_sets: int = 3,
    n_channels: int = 2,
    noise_level: float = 0.0,
    d: int = 64,
    n_atoms: int = 6,
    sparsity: int = 3,
    train_sparsity: int = 1,
    train_noise_level: float = 0.0,
    n_train_per_class: int = 30,
    n_test_per_class: int = 50,
    n_ground_atoms: int = 8,
    n_ground_train: int = 30,
    class_similarity: float = 0.8,
    white_frac: float = 0.15,
) -> MultiChannelTargets:
    """Multi-channel targets, confusers and ground.

    Every object class owns latent atoms in each channel. A sample picks
    ``sparsity`` of them (``train_sparsity`` for training samples), the same
    ones in every channel, and mixes them with non-negative weights drawn
    independently per channel. Target classes
    share a common component weighted by ``class_similarity``. Confuser
    sets all derive from one clutter family; the last set is held out from
    training. Ground is a non-negative mix of fixed ground atoms plus white
    noise. Training object samples add ground scaled by
    ``train_noise_level``; test samples add ground scaled by ``noise_level``.
    """
    rng = np.random.default_rng(seed)
    T = n_channels

    def atoms(base=None, w=0.0):
        A = rng.standard_normal((d, n_atoms, T))
        if base is not None:
            A = w * base + (1 - w) * A
        return A / np.linalg.norm(A, axis=0, keepdims=True)

    common = rng.standard_normal((d, n_atoms, T))
    targets = [atoms(common, class_similarity) for _ in range(n_targets)]
    clutter = rng.standard_normal((d, n_atoms, T))
    confusers = [atoms(clutter, 0.85) for _ in range(n_confuser_sets)]
    G = rng.standard_normal((d, n_ground_atoms, T))
    G /= np.linalg.norm(G, axis=0, keepdims=True)

    def mix(A, n, s):
        W = np.zeros((A.shape[1], n, T))
        for i in range(n):
            idx = rng.choice(A.shape[1], s, replace=False)
            W[idx, i, :] = rng.uniform(0.1, 1.0, (s, T))
        return _unit_energy(np.einsum("dkt,knt->dnt", A, W))

    def ground(n):
        W = np.abs(rng.standard_normal((n_ground_atoms, n, T)))
        S = _unit_energy(np.einsum("dkt,knt->dnt", G, W))
        return _unit_energy(S + white_frac * _unit_energy(rng.standard_normal((d, n, T))))

    conf_label = n_targets + 1
    known = confusers[:-1] if n_confuser_sets > 1 else confusers
    tr_Y, tr_l = [], []
    train_objs = [(A, i + 1) for i, A in enumerate(targets)] + [(A, conf_label) for A in known]
    for A, lab in train_objs:
        n = n_train_per_class
        tr_Y.append(mix(A, n, train_sparsity) + train_noise_level * ground(n))
        tr_l.append(np.full(n, lab))
    tr_Y.append(ground(n_ground_train))
    tr_l.append(np.zeros(n_ground_train, dtype=int))

    te_Y, te_l, unseen = [], [], []
    objs = [(A, i + 1, False) for i, A in enumerate(targets)]
    objs += [(A, conf_label, n_confuser_sets > 1 and j == n_confuser_sets - 1) for j, A in enumerate(confusers)]
    for A, lab, held in objs:
        te_Y.append(mix(A, n_test_per_class, sparsity) + noise_level * ground(n_test_per_class))
        te_l.append(np.full(n_test_per_class, lab))
        unseen.append(np.full(n_test_per_class, held))

    return MultiChannelTargets(
        LabeledDataset(np.concatenate(tr_Y, axis=1), np.concatenate(tr_l), "train"),
        LabeledDataset(np.concatenate(te_Y, axis=1), np.concatenate(te_l), "test"),
        conf_label,
        np.concatenate(unseen),
    )


@dataclass
class MultiLookData:
    """Output of :func:`gen_multilook_targets`.

    ``D`` holds every class's views ordered by angle followed by the ground
    atoms (the shared block of ``partition``). ``looks`` is
    ``d x N x n_looks``; look ``t`` of sample ``i`` shows view
    ``view_index[i] + t`` (mod ``n_views``) of class ``labels[i]``.
    """

    D: np.ndarray
    partition: BlockPartition
    looks: np.ndarray
    labels: np.ndarray
    view_index: np.ndarray
    n_views: int


def gen_multilook_targets(
    seed: int = 0,
    n_classes: int = 3,
    n_views: int = 12,
    n_looks: int = 2,
    noise_level: float = 0.0,
    d: int = 64,
    n_test_per_class: int = 50,
    n_ground_atoms: int = 8,
    n_harmonics: int = 3,
    view_jitter: float = 0.3,
    class_similarity: float = 0.9,
    white_frac: float = 0.5,
) -> MultiLookData:
    """Objects observed from consecutive view angles.

    An object's signature varies smoothly with the view angle (a low-order
    trigonometric series) plus a per-view random component. The dictionary
    stores each class's ``n_views`` reference views in angle order, so the
    codes of consecutive looks step one column per look (a stair).
    """
    rng = np.random.default_rng(seed)
    H = 2 * n_harmonics + 1
    theta = 2 * np.pi * np.arange(n_views) / n_views
    basis = [np.ones_like(theta)]
    for h in range(1, n_harmonics + 1):
        basis += [np.cos(h * theta), np.sin(h * theta)]
    basis = np.stack(basis)
    common = rng.standard_normal((d, H))
    views = []
    for _ in range(n_classes):
        B = class_similarity * common + (1 - class_similarity) * rng.standard_normal((d, H))
        V = B @ basis
        V = normalize_columns(V) + view_jitter * normalize_columns(rng.standard_normal((d, n_views)))
        views.append(normalize_columns(V))
    G = normalize_columns(rng.standard_normal((d, n_ground_atoms)))
    D = np.hstack(views + [G])
    part = BlockPartition((n_views,) * n_classes, n_ground_atoms)

    n = n_classes * n_test_per_class
    labels = np.repeat(np.arange(1, n_classes + 1), n_test_per_class)
    start = rng.integers(0, n_views, n)
    looks = np.empty((d, n, n_looks))
    for i in range(n):
        for t in range(n_looks):
            looks[:, i, t] = views[labels[i] - 1][:, (start[i] + t) % n_views] * rng.uniform(0.7, 1.3)
    if noise_level:
        W = np.abs(rng.standard_normal((n_ground_atoms, n * n_looks)))
        g = normalize_columns(G @ W) + white_frac * normalize_columns(rng.standard_normal((d, n * n_looks)))
        looks += noise_level * normalize_columns(g).reshape(d, n, n_looks, order="F")
    return MultiLookData(D, part, looks, labels, start, n_views)
