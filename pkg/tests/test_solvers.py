import numpy as np
import pytest

from oracles import best_subset_ls, cd_lasso, cvx_prox, group_prox_oracle
from structsparse.core import BlockPartition, normalize_columns
from structsparse.solvers import (
    FistaProblem,
    ProxKind,
    fista_solve,
    fista_step_size,
    lasso_code,
    omp_batch,
    penalty_value,
    prox_apply,
)

def lasso_obj(Y, D, X, lam):
    return 0.5 * np.sum((Y - D @ X) ** 2) + lam * np.abs(X).sum()


class TestFista:
    def test_quadratic(self):
        p = FistaProblem(grad=lambda x: x - 2.0, L=1.0, lam=0.0, init=np.zeros(1), max_iter=50)
        x, rep = fista_solve(p)
        assert x[0] == pytest.approx(2.0, abs=1e-8)
        assert rep.converged

    def test_l1(self):
        p = FistaProblem(grad=lambda x: x - 2.0, L=1.0, lam=1.0, init=np.zeros(1))
        x, _ = fista_solve(p)
        assert x[0] == pytest.approx(1.0, abs=1e-8)

    def test_momentum_sequence(self):
        assert fista_step_size(1.0) == pytest.approx((1 + np.sqrt(5)) / 2)

    def test_bad_lipschitz(self):
        with pytest.raises(ValueError):
            fista_solve(FistaProblem(grad=lambda x: x, L=0.0, lam=0.0, init=np.zeros(1)))

    def test_nonfinite_gradient(self):
        p = FistaProblem(grad=lambda x: x * np.nan, L=1.0, lam=0.0, init=np.ones(2))
        with pytest.raises(FloatingPointError):
            fista_solve(p)

    def test_never_worse_than_init(self):
        rng = np.random.default_rng(0)
        D = normalize_columns(rng.standard_normal((10, 20)))
        Y = rng.standard_normal((10, 4))
        X_opt = cd_lasso(Y, D, 0.1)
        G, B = D.T @ D, D.T @ Y
        p = FistaProblem(
            grad=lambda X: G @ X - B, L=np.linalg.eigvalsh(G)[-1], lam=0.1, init=X_opt,
            max_iter=3, objective=lambda X: lasso_obj(Y, D, X, 0.1),
        )
        X, rep = fista_solve(p)
        assert lasso_obj(Y, D, X, 0.1) <= rep.initial_objective
        assert len(rep.history) <= 3


class TestProx:
    def test_tube_closed_form(self):
        out = prox_apply(np.array([[[3.0, 4.0]]]), 1.0, ProxKind.TUBE_L2)
        np.testing.assert_allclose(out.ravel(), [2.4, 3.2])

    def test_tube_dead_zone(self):
        out = prox_apply(np.array([[[3.0, 4.0]]]), 5.0, ProxKind.TUBE_L2)
        assert not out.any()

    def test_l1_nonneg(self):
        np.testing.assert_allclose(prox_apply(np.array([1.5, -2.0, 0.2]), 0.5, ProxKind.L1_NONNEG), [1.0, 0, 0])

    def test_group_needs_partition(self):
        with pytest.raises(ValueError):
            prox_apply(np.ones((3, 2)), 0.1, ProxKind.GROUP_L2)

    def test_group_vs_golden_section(self):
        rng = np.random.default_rng(1)
        part = BlockPartition((2, 3, 1))
        u = rng.standard_normal((6, 4, 3))
        out = prox_apply(u, 0.9, ProxKind.GROUP_L2, part)
        for n in range(4):
            for sl in part.blocks():
                ref = group_prox_oracle(u[sl, n, :], 0.9)
                np.testing.assert_allclose(out[sl, n, :], ref, atol=1e-8)

    @pytest.mark.parametrize("kind", list(ProxKind))
    def test_vs_numeric_minimizer(self, kind):
        rng = np.random.default_rng(list(ProxKind).index(kind))
        part = BlockPartition((2, 2), 1)
        u = rng.standard_normal((5, 3, 2)) * 2
        out = prox_apply(u, 0.6, kind, part)
        ref = cvx_prox(u, 0.6, kind, part)
        np.testing.assert_allclose(out, ref, atol=1e-6)

    @pytest.mark.parametrize("kind", list(ProxKind))
    def test_identity_cases(self, kind):
        rng = np.random.default_rng(2)
        part = BlockPartition((2, 1))
        u = rng.standard_normal((3, 2, 2))
        expected = np.maximum(u, 0) if kind.nonneg else u
        np.testing.assert_allclose(prox_apply(u, 0.0, kind, part), expected)
        assert not prox_apply(np.zeros_like(u), 0.4, kind, part).any()

    def test_two_dim_tube_is_l1(self):
        u = np.random.default_rng(3).standard_normal((4, 5))
        np.testing.assert_allclose(prox_apply(u, 0.3, ProxKind.TUBE_L2), prox_apply(u, 0.3, ProxKind.L1), atol=1e-15)

    def test_penalty_values(self):
        u = np.array([[[3.0, 4.0]], [[0.0, 1.0]]])
        assert penalty_value(u, ProxKind.TUBE_L2) == pytest.approx(6.0)
        assert penalty_value(u, ProxKind.GROUP_L2, BlockPartition((2,))) == pytest.approx(np.sqrt(26))
        assert penalty_value(-u, ProxKind.L1_NONNEG) == np.inf


class TestLasso:
    def test_identity_dictionary(self):
        Y = np.random.default_rng(4).standard_normal((5, 3))
        X = lasso_code(Y, np.eye(5), 0.3)
        np.testing.assert_allclose(X, np.sign(Y) * np.maximum(np.abs(Y) - 0.3, 0), atol=1e-8)

    def test_least_squares(self):
        rng = np.random.default_rng(5)
        Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        D = normalize_columns(Q + 0.2 * rng.standard_normal((6, 6)))
        Y = rng.standard_normal((6, 2))
        X = lasso_code(Y, D, 0.0, max_iter=5000, tol=1e-12)
        np.testing.assert_allclose(X, np.linalg.solve(D, Y), atol=1e-6)

    @pytest.mark.parametrize("seed", range(3))
    def test_vs_coordinate_descent(self, seed):
        rng = np.random.default_rng(seed)
        D = normalize_columns(rng.standard_normal((8, 12)))
        Y = rng.standard_normal((8, 3))
        X = lasso_code(Y, D, 0.2, max_iter=3000, tol=1e-12)
        X_ref = cd_lasso(Y, D, 0.2)
        assert lasso_obj(Y, D, X, 0.2) - lasso_obj(Y, D, X_ref, 0.2) <= 1e-7

    def test_optimality_conditions(self):
        rng = np.random.default_rng(6)
        D = normalize_columns(rng.standard_normal((10, 15)))
        Y = rng.standard_normal((10, 4))
        lam = 0.3
        X = lasso_code(Y, D, lam, max_iter=5000, tol=1e-12)
        G = D.T @ (Y - D @ X)
        assert np.all(np.abs(G) <= lam + 1e-6)
        on = np.abs(X) > 1e-8
        np.testing.assert_allclose(G[on], lam * np.sign(X[on]), atol=1e-6)

    def test_nonneg(self):
        rng = np.random.default_rng(7)
        D = normalize_columns(rng.standard_normal((8, 10)))
        Y = rng.standard_normal((8, 2))
        X = lasso_code(Y, D, 0.1, nonneg=True, max_iter=3000, tol=1e-12)
        assert X.min() >= 0
        ref = cd_lasso(Y, D, 0.1, nonneg=True)
        assert lasso_obj(Y, D, X, 0.1) - lasso_obj(Y, D, ref, 0.1) <= 1e-7

    def test_vector_input(self):
        D = np.eye(3)
        assert lasso_code(np.array([1.0, 0.0, -2.0]), D, 0.5).shape == (3,)

    def test_empty_dictionary(self):
        with pytest.raises(ValueError):
            lasso_code(np.ones(3), np.zeros((3, 0)), 0.1)

    def test_warns_on_long_atoms(self):
        with pytest.warns(RuntimeWarning):
            lasso_code(np.ones(2), 2 * np.eye(2), 0.1)


class TestOmp:
    def test_identity(self):
        x = omp_batch(np.array([0.9, 0.1]), np.eye(2), 1)
        np.testing.assert_allclose(x, [0.9, 0.0])

    def test_full_support(self):
        rng = np.random.default_rng(8)
        Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        y = rng.standard_normal(5)
        x = omp_batch(y, Q, 5)
        assert np.linalg.norm(y - Q @ x) < 1e-12

    @pytest.mark.parametrize("seed", range(20))
    def test_vs_exhaustive(self, seed):
        rng = np.random.default_rng(100 + seed)
        D = normalize_columns(rng.standard_normal((30, 12)))
        support = rng.choice(12, 2, replace=False)
        x_true = np.zeros(12)
        x_true[support] = rng.uniform(1, 2, 2) * rng.choice([-1, 1], 2)
        y = D @ x_true
        x = omp_batch(y, D, 2)
        S_ref, coef = best_subset_ls(y, D, 2)
        assert sorted(np.flatnonzero(x)) == sorted(S_ref)
        np.testing.assert_allclose(x[S_ref], coef, atol=1e-10)

    def test_residual_monotone_in_L(self):
        rng = np.random.default_rng(9)
        D = normalize_columns(rng.standard_normal((10, 20)))
        Y = rng.standard_normal((10, 5))
        prev = np.inf
        for L in range(1, 8):
            r = np.linalg.norm(Y - D @ omp_batch(Y, D, L), axis=0)
            assert np.all(r <= prev + 1e-12)
            prev = r

    def test_sparsity_bound(self):
        rng = np.random.default_rng(10)
        D = normalize_columns(rng.standard_normal((10, 20)))
        X = omp_batch(rng.standard_normal((10, 6)), D, 3)
        assert np.all(np.count_nonzero(X, axis=0) <= 3)

    def test_rank_deficient_flag(self):
        d = np.array([1.0, 0.0])
        D = np.column_stack([d, d, [0.0, 1.0]])
        y = np.array([1.0, 0.0])
        x, info = omp_batch(y, D, 3, return_info=True)
        assert np.count_nonzero(x) == 1
        a = 1e-6
        D2 = np.column_stack([[1.0, 0.0], [np.cos(a), np.sin(a)]])
        x2, info2 = omp_batch(np.array([1.0, 1.0]), D2, 2, return_info=True)
        assert info2["rank_deficient"][0]
        assert np.count_nonzero(x2) == 1

    def test_bad_level(self):
        with pytest.raises(ValueError):
            omp_batch(np.ones(2), np.eye(2), 3)
