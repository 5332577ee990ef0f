import numpy as np
import pytest
from scipy.optimize import minimize

from mmtomo import bicram, stack
from conftest import random_tomo_instance


class TestProxL12:
    def test_matches_numeric_row_minimizer(self):
        # oracle: per-row 4-real-variable minimization of
        # t ||row||_2 + 0.5 ||v - row||^2
        rng = np.random.default_rng(201)
        for _ in range(40):
            v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            t = float(rng.uniform(0.05, 3.0))
            out = bicram.prox_l12(v[None, :], t)[0]

            def cost(w):
                row = np.array([w[0] + 1j * w[1], w[2] + 1j * w[3]])
                return t * np.linalg.norm(row) + 0.5 * np.linalg.norm(v - row) ** 2

            res = minimize(
                cost,
                [v[0].real, v[0].imag, v[1].real, v[1].imag],
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000},
            )
            assert cost([out[0].real, out[0].imag, out[1].real, out[1].imag]) <= res.fun + 1e-6
            assert np.linalg.norm(out - (res.x[0::2] + 1j * res.x[1::2])) <= 2e-4

    def test_kills_small_rows_jointly(self):
        X = np.array([[3.0 + 0j, 4.0 + 0j], [0.1 + 0j, 0.1 + 0j]])
        out = bicram.prox_l12(X, 1.0)
        assert np.allclose(out[0], X[0] * (1 - 1.0 / 5.0))
        assert np.allclose(out[1], 0.0)

    def test_per_row_thresholds(self):
        X = np.array([[3.0 + 0j, 4.0 + 0j], [3.0 + 0j, 4.0 + 0j]])
        out = bicram.prox_l12(X, np.array([0.0, 10.0]))
        assert np.allclose(out[0], X[0])
        assert np.allclose(out[1], 0.0)

    def test_rejects_negative_threshold(self):
        with pytest.raises(ValueError):
            bicram.prox_l12(np.ones((2, 2), dtype=complex), -0.5)


def rand_inner_instance(rng, m=10, n=6):
    A = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2)
    b = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return A, b, u


class TestSolveInner:
    def test_ridge_limit(self):
        # lambda2 = 0 reduces to a closed-form tied ridge problem
        rng = np.random.default_rng(211)
        A, b, u = rand_inner_instance(rng)
        params = bicram.BicramParams(lambda2=0.0, lambda1=0.7, inner_tol=1e-10)
        x, rep = bicram.solve_inner(A, b, u, params)
        direct = np.linalg.solve(
            A.conj().T @ A + 0.7 * np.eye(6), A.conj().T @ b + 0.7 * u
        )
        assert rep.converged
        assert np.linalg.norm(x - direct) <= 1e-8 * max(1.0, np.linalg.norm(direct))

    def test_stationarity_of_smooth_objective(self):
        # with u nonzero everywhere the tied group objective is smooth,
        # so the solution must zero its gradient
        rng = np.random.default_rng(212)
        for _ in range(5):
            A, b, u = rand_inner_instance(rng)
            params = bicram.BicramParams(lambda2=0.4, lambda1=1.0, inner_tol=1e-10)
            x, rep = bicram.solve_inner(A, b, u, params)
            assert rep.converged
            rows = np.sqrt(np.abs(x) ** 2 + np.abs(u) ** 2)
            grad = A.conj().T @ (A @ x - b) + 1.0 * (x - u) + 0.4 * x / rows
            assert np.linalg.norm(grad) <= 1e-5 * max(1.0, np.linalg.norm(b))

    def test_objective_not_above_perturbations(self):
        rng = np.random.default_rng(213)
        A, b, u = rand_inner_instance(rng, m=8, n=5)
        params = bicram.BicramParams(lambda2=0.9, lambda1=0.5, inner_tol=1e-10)
        x, _ = bicram.solve_inner(A, b, u, params)
        f_star = bicram.inner_objective(A, b, u, x, 0.5, 0.9)
        for scale in (1e-4, 1e-2, 0.3):
            for _ in range(20):
                d = scale * (rng.standard_normal(5) + 1j * rng.standard_normal(5))
                assert f_star <= bicram.inner_objective(A, b, u, x + d, 0.5, 0.9) + 1e-8


class TestBicramSolve:
    def test_noiseless_two_scatterers_support_and_monotonicity(self):
        rng = np.random.default_rng(221)
        pair, g, gamma, support, _, _ = random_tomo_instance(
            rng, n_acq=16, n_grid=24, separation=1.5
        )
        lam_max = max(
            float(np.abs(pair.R.conj().T @ g).max()),
            float(np.abs(pair.S.conj().T @ g).max()),
        )
        params = bicram.BicramParams(lambda2=0.08 * lam_max)
        est, rep = bicram.bicram_solve(pair, g, params)
        assert set(support) <= set(est.support)
        # group shrinkage leaks into neighbouring bins at this separation,
        # but the support must stay a small fraction of the grid
        assert est.order <= 8
        h = np.array(rep.objective_history)
        slack = 1e-8 * np.maximum(1.0, np.abs(h[:-1]))
        assert np.all(np.diff(h) <= slack)

    def test_zero_start_rejected(self):
        rng = np.random.default_rng(222)
        pair, g, *_ = random_tomo_instance(rng, n_acq=12, n_grid=16)
        with pytest.raises(ValueError, match="nonzero"):
            bicram.bicram_solve(
                pair, g, bicram.BicramParams(lambda2=1.0), gamma0=np.zeros(16)
            )

    def test_zero_observations_flagged(self):
        rng = np.random.default_rng(223)
        pair, _, *_ = random_tomo_instance(rng, n_acq=12, n_grid=10)
        g = np.zeros(pair.n_obs, dtype=complex)
        params = bicram.BicramParams(lambda2=5.0)
        est, rep = bicram.bicram_solve(
            pair, g, params, gamma0=np.ones(10, dtype=complex)
        )
        assert est.order == 0
        assert rep.note == "zero iterate"
        assert est.residual == 0.0


class TestSolutionPath:
    def test_noiseless_single_scatterer_path(self):
        rng = np.random.default_rng(231)
        pair, g, gamma, support, _, _ = random_tomo_instance(
            rng, n_acq=16, n_grid=20, scatterers=1
        )
        samples, best = bicram.solution_path(pair, g, n_samples=5)
        assert len(samples) >= 1
        lams = [s.lambda2 for s in samples]
        ratios = np.diff(np.log(lams))
        assert np.allclose(ratios, ratios[0])  # geometric spacing
        for s in samples:
            assert s.order == 1
            assert s.estimate.support == support
        assert samples[best].estimate.support == support

    def test_zero_observations_rejected(self):
        rng = np.random.default_rng(232)
        pair, _, *_ = random_tomo_instance(rng, n_acq=12, n_grid=10)
        with pytest.raises(ValueError, match="zero"):
            bicram.solution_path(pair, np.zeros(pair.n_obs, dtype=complex))
