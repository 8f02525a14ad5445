import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from structsparse.core import (
    BlockPartition,
    column_mean_matrix,
    doubled_diagonal,
    extreme_eigenvalue,
    project_unit_columns,
    soft_threshold,
    svt,
)


class TestBlockPartition:
    def test_slices(self):
        p = BlockPartition((2, 3), 1)
        assert p.total == 6
        assert p.block(1) == slice(2, 5)
        assert p.shared == slice(5, 6)
        assert len(p.blocks()) == 3
        assert len(p.blocks(include_shared=False)) == 2

    def test_from_labels(self):
        p = BlockPartition.from_labels([1, 1, 2, 3, 3, 3])
        assert p.class_sizes == (2, 1, 3)

    def test_unsorted_labels_rejected(self):
        with pytest.raises(ValueError):
            BlockPartition.from_labels([2, 1])


class TestDoubledDiagonal:
    def test_unit_blocks(self):
        p = BlockPartition((1, 1))
        out = doubled_diagonal(np.array([[1.0, 2], [3, 4]]), p, p)
        np.testing.assert_array_equal(out, [[2, 2], [3, 8]])

    def test_zero(self):
        p = BlockPartition((2, 2))
        assert not doubled_diagonal(np.zeros((4, 4)), p, p).any()

    def test_matches_slicing(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((6, 6))
        p = BlockPartition((2, 2, 2))
        expected = A.copy()
        for c in range(3):
            expected[2 * c : 2 * c + 2, 2 * c : 2 * c + 2] *= 2
        np.testing.assert_allclose(doubled_diagonal(A, p, p), expected)

    def test_rectangular_partitions(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((5, 7))
        rp, cp = BlockPartition((2, 3)), BlockPartition((4, 3))
        out = doubled_diagonal(A, rp, cp)
        np.testing.assert_allclose(out[:2, :4], 2 * A[:2, :4])
        np.testing.assert_allclose(out[2:, 4:], 2 * A[2:, 4:])
        np.testing.assert_allclose(out[:2, 4:], A[:2, 4:])

    def test_shared_block_only_when_both_sides_have_it(self):
        A = np.ones((3, 3))
        both = doubled_diagonal(A, BlockPartition((1, 1), 1), BlockPartition((1, 1), 1))
        assert both[2, 2] == 2
        one = doubled_diagonal(A[:, :2], BlockPartition((1, 1), 1), BlockPartition((1, 1)))
        assert one[2, 0] == 1 and one[2, 1] == 1

    def test_linearity(self):
        rng = np.random.default_rng(2)
        A, B = rng.standard_normal((2, 5, 5))
        p = BlockPartition((3, 2))
        np.testing.assert_allclose(
            doubled_diagonal(A + B, p, p), doubled_diagonal(A, p, p) + doubled_diagonal(B, p, p)
        )

    def test_mismatch(self):
        with pytest.raises(ValueError):
            doubled_diagonal(np.zeros((3, 3)), BlockPartition((1, 1)), BlockPartition((1, 2)))
        with pytest.raises(ValueError):
            doubled_diagonal(np.zeros((3, 3)), BlockPartition((3,)), BlockPartition((1, 2)))


class TestColumnMean:
    def test_small(self):
        np.testing.assert_array_equal(column_mean_matrix(np.array([[1.0, 3], [2, 4]]), 2), [[2, 2], [3, 3]])

    def test_identity(self):
        A = np.array([[1.0], [5.0]])
        np.testing.assert_array_equal(column_mean_matrix(A, 1), A)

    def test_loop(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((4, 7))
        M = column_mean_matrix(A, 3)
        for i in range(4):
            assert M[i, 0] == pytest.approx(sum(A[i]) / 7, abs=1e-14)
        assert M.shape == (4, 3)

    def test_n_zero(self):
        with pytest.raises(ValueError):
            column_mean_matrix(np.ones((2, 2)), 0)


class TestShrinkage:
    def test_soft_threshold(self):
        assert soft_threshold(np.array(1.2), 0.5) == pytest.approx(0.7)
        assert soft_threshold(np.array(-0.3), 0.5) == 0
        x = np.array([-1.0, 0.2, 3.0])
        np.testing.assert_array_equal(soft_threshold(x, 0.0), x)

    def test_svt_diag(self):
        np.testing.assert_allclose(svt(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]), atol=1e-12)

    def test_svt_zero_tau(self):
        A = np.random.default_rng(4).standard_normal((5, 3))
        np.testing.assert_allclose(svt(A, 0.0), A, atol=1e-10)

    def test_svt_nuclear_norm(self):
        A = np.random.default_rng(5).standard_normal((5, 3))
        s = np.linalg.svd(A, compute_uv=False)
        out = svt(A, 0.8)
        assert np.linalg.norm(out, "nuc") == pytest.approx(np.maximum(s - 0.8, 0).sum(), abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_svt_optimality(self, seed):
        # Z = svt(A, tau) iff (A - Z)/tau is a subgradient of ||.||_* at Z
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((4, 4))
        tau = 0.7
        Z = svt(A, tau)
        U, s, Vt = np.linalg.svd(A)
        r = int(np.sum(s > tau))
        W = (A - Z) / tau - U[:, :r] @ Vt[:r]
        assert np.allclose(U[:, :r].T @ W, 0, atol=1e-8)
        assert np.allclose(W @ Vt[:r].T, 0, atol=1e-8)
        assert np.linalg.norm(W, 2) <= 1 + 1e-8

    def test_project_unit_columns(self):
        D = np.array([[3.0, 0.3, 0.0], [4.0, 0.4, 0.0]])
        np.testing.assert_allclose(project_unit_columns(D), [[0.6, 0.3, 0], [0.8, 0.4, 0]])

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (4, 3), elements=st.floats(-10, 10)))
    def test_project_idempotent(self, D):
        P = project_unit_columns(D)
        np.testing.assert_allclose(project_unit_columns(P), P, atol=1e-15)
        assert np.all(np.linalg.norm(P, axis=0) <= 1 + 1e-12)


class TestEigen:
    def test_trivial(self):
        assert extreme_eigenvalue(np.eye(3), "max") == pytest.approx(1.0)
        assert extreme_eigenvalue(np.diag([2.0, -1.0]), "min") == pytest.approx(-1.0)

    def test_vs_eig(self):
        rng = np.random.default_rng(6)
        B = rng.standard_normal((8, 8))
        S = B + B.T
        w = np.linalg.eigvals(S).real
        assert extreme_eigenvalue(S, "max") == pytest.approx(w.max(), rel=1e-8)
        assert extreme_eigenvalue(S, "min") == pytest.approx(w.min(), rel=1e-8)

    def test_rayleigh(self):
        rng = np.random.default_rng(7)
        B = rng.standard_normal((6, 6))
        S = B @ B.T
        top = extreme_eigenvalue(S, "max")
        for x in rng.standard_normal((100, 6)):
            assert top >= x @ S @ x / (x @ x) - 1e-12

    def test_non_square(self):
        with pytest.raises(ValueError):
            extreme_eigenvalue(np.ones((2, 3)))

    def test_empty(self):
        assert extreme_eigenvalue(np.zeros((0, 0))) == 0.0
