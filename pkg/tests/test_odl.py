import numpy as np
import pytest

from oracles import projected_gradient_dict
from structsparse.odl import dict_objective, lasso_objective, odl_dict_update, odl_learn


def random_problem(seed, d=6, k=4, n=10):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((k, n))
    Y = rng.standard_normal((d, n))
    D0 = rng.standard_normal((d, k))
    return Y @ X.T, X @ X.T, D0 / np.maximum(np.linalg.norm(D0, axis=0), 1)


class TestDictUpdate:
    def test_single_atom(self):
        e = np.array([[0.3], [0.4]])
        D = odl_dict_update(e, np.array([[1.0]]), np.array([[1.0], [0.0]]))
        np.testing.assert_allclose(D, e)

    def test_zero_data(self):
        E, F, D0 = random_problem(0)
        D = odl_dict_update(np.zeros_like(E), F, D0)
        assert dict_objective(D, 0 * E, F) <= dict_objective(D0, 0 * E, F)

    @pytest.mark.parametrize("seed", range(3))
    def test_vs_projected_gradient(self, seed):
        E, F, D0 = random_problem(seed)
        D = odl_dict_update(E, F, D0, max_pass=5000, tol=1e-13)
        ref = projected_gradient_dict(E, F, D0)
        assert dict_objective(D, E, F) - dict_objective(ref, E, F) <= 1e-6

    def test_never_increases_between_passes(self):
        E, F, D = random_problem(5)
        prev = dict_objective(D, E, F)
        for _ in range(10):
            D = odl_dict_update(E, F, D, max_pass=1)
            cur = dict_objective(D, E, F)
            assert cur <= prev + 1e-12
            prev = cur
        assert np.all(np.linalg.norm(D, axis=0) <= 1 + 1e-12)

    def test_sphere(self):
        E, F, D0 = random_problem(6)
        D = odl_dict_update(E, F, D0 / np.linalg.norm(D0, axis=0), sphere=True)
        np.testing.assert_allclose(np.linalg.norm(D, axis=0), 1.0, atol=1e-12)

    def test_unused_atom_flag(self):
        E, F, D0 = random_problem(7)
        F[1, :] = 0
        F[:, 1] = 0
        D, info = odl_dict_update(E, F, D0, return_info=True)
        assert info["skipped"] == [1]
        np.testing.assert_array_equal(D[:, 1], D0[:, 1])

    def test_asymmetric_rejected(self):
        E, F, D0 = random_problem(8)
        F[0, 1] += 1.0
        with pytest.raises(ValueError):
            odl_dict_update(E, F, D0)

    def test_deterministic(self):
        E, F, D0 = random_problem(9)
        assert np.array_equal(odl_dict_update(E, F, D0), odl_dict_update(E, F, D0))


class TestLearn:
    def test_rank_one(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(8)
        Y = np.tile(y[:, None], (1, 5))
        D, X = odl_learn(Y, 1, 0.01, iters=5)
        assert abs(D[:, 0] @ y) / np.linalg.norm(y) >= 0.999

    def test_large_lambda_gives_zero_code(self):
        rng = np.random.default_rng(1)
        Y = 2 * rng.standard_normal((6, 8))
        lam = np.abs(Y.T @ Y).max()
        D, X = odl_learn(Y, 3, lam, iters=1)
        assert not X.any()

    def test_history_non_increasing(self):
        rng = np.random.default_rng(2)
        Y = rng.standard_normal((10, 30))
        D, X, info = odl_learn(Y, 6, 0.1, iters=8, return_info=True)
        h = np.array(info["objective"])
        assert np.all(np.diff(h) <= 1e-9)
        assert h[-1] == pytest.approx(lasso_objective(Y, D, X, 0.1))
        assert np.all(np.linalg.norm(D, axis=0) <= 1 + 1e-12)

    def test_more_atoms_than_samples(self):
        Y = np.random.default_rng(3).standard_normal((5, 2))
        D, X = odl_learn(Y, 4, 0.1, iters=2)
        assert D.shape == (5, 4) and X.shape == (4, 2)

    def test_seeded_init_reproducible(self):
        Y = np.random.default_rng(4).standard_normal((5, 9))
        a = odl_learn(Y, 3, 0.1, iters=2, seed=11)
        b = odl_learn(Y, 3, 0.1, iters=2, seed=11)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
