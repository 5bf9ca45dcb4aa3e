import numpy as np
import pytest

from scoreclimb.errors import ConfigurationError
from scoreclimb.oracle import (LinearGaussianProblem, analytic_score,
                               dense_smoother, finite_diff_grad,
                               grid_search_gain, kalman_smoother,
                               log_marginal, sample_smoother)

from conftest import scalar_lgp, two_dim_lgp

_LOG_2PI = float(np.log(2.0 * np.pi))


class TestKalmanSmoother:
    @pytest.mark.parametrize("make", [scalar_lgp, two_dim_lgp])
    def test_matches_dense_conditioning(self, make):
        lgp = make(horizon=6)
        res = kalman_smoother(lgp)
        means, covs = dense_smoother(lgp)
        assert np.allclose(res.smoothed_means, means, atol=1e-8)
        assert np.allclose(res.smoothed_covs, covs, atol=1e-8)

    def test_tiny_eta_recovers_prior_means(self):
        # with a vanishing observation weight the posterior is the prior, so
        # the smoothed means must follow the unconditioned mean recursion
        lgp = scalar_lgp(horizon=10, eta=1e-12)
        res = kalman_smoother(lgp)
        F, W, z0, P0, _ = lgp._chain()
        mean = z0
        for t in range(lgp.horizon + 1):
            assert np.allclose(res.smoothed_means[t], mean, atol=1e-8)
            mean = F @ mean

    @pytest.mark.parametrize("make", [scalar_lgp, two_dim_lgp])
    def test_covariances_are_symmetric_psd(self, make):
        lgp = make(horizon=8)
        res = kalman_smoother(lgp)
        for covs in (res.filtered_covs, res.smoothed_covs):
            assert np.allclose(covs, np.swapaxes(covs, 1, 2))
            for c in covs:
                assert np.linalg.eigvalsh(c).min() >= -1e-12

    def test_smoothing_never_widens_filtering(self):
        # marginal smoothing variances are bounded by filtering variances
        lgp = scalar_lgp(horizon=12)
        res = kalman_smoother(lgp)
        f_var = np.diagonal(res.filtered_covs, axis1=1, axis2=2)
        s_var = np.diagonal(res.smoothed_covs, axis1=1, axis2=2)
        assert np.all(s_var <= f_var + 1e-12)

    def test_deterministic_start_has_zero_state_variance(self):
        lgp = scalar_lgp(horizon=5)
        res = kalman_smoother(lgp)
        assert res.filtered_covs[0, 0, 0] == pytest.approx(0.0, abs=1e-15)

    def test_log_marginal_matches_dense_gaussian_integral(self):
        # independent closed form: stack the trajectory prior N(mu, Sigma)
        # and integrate it against the diagonal pseudo-likelihood kernel
        lgp = two_dim_lgp(horizon=4)
        d, m = lgp.state_dim, lgp.action_dim
        T, p = lgp.horizon, lgp.state_dim + lgp.action_dim
        # rebuild the dense prior exactly as dense_smoother does
        n_eps = (T + 1) * m + T * d
        Lx = np.zeros((d, n_eps))
        mx = lgp.x0.copy()
        L = np.zeros(((T + 1) * p, n_eps))
        mu = np.zeros((T + 1) * p)
        col = 0
        for t in range(T + 1):
            Lu = lgp.K @ Lx
            mu_u = lgp.K @ mx
            Lu[:, col:col + m] += np.diag(lgp.policy_std)
            col += m
            L[t * p:t * p + d] = Lx
            L[t * p + d:(t + 1) * p] = Lu
            mu[t * p:t * p + d] = mx
            mu[t * p + d:(t + 1) * p] = mu_u
            if t < T:
                Lx = lgp.A @ Lx + lgp.B @ Lu
                mx = lgp.A @ mx + lgp.B @ mu_u
                Lx[:, col:col + d] += np.diag(lgp.trans_std)
                col += d
        sigma = L @ L.T
        prec = 2.0 * lgp.eta * np.tile(np.concatenate([lgp.Q, lgp.R]), T + 1)
        n = mu.size
        S = sigma + np.diag(1.0 / prec)
        sign, logdet = np.linalg.slogdet(S)
        assert sign > 0
        expected = (-0.5 * (n * _LOG_2PI + logdet + mu @ np.linalg.solve(S, mu))
                    + 0.5 * n * _LOG_2PI - 0.5 * np.sum(np.log(prec)))
        assert log_marginal(lgp) == pytest.approx(expected, rel=1e-10)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            scalar_lgp(eta=-1.0)
        with pytest.raises(ConfigurationError):
            LinearGaussianProblem(A=[[1.0]], B=[[1.0]], trans_std=[0.1],
                                  K=[[0.0]], policy_std=[0.1], Q=[0.0],
                                  R=[0.1], eta=0.5, horizon=3, x0=[0.0])


class TestSampleSmoother:
    def test_sample_moments_match_marginals(self):
        lgp = scalar_lgp(horizon=6)
        res = kalman_smoother(lgp)
        rng = np.random.default_rng(42)
        draws = sample_smoother(lgp, rng, size=40_000, result=res)
        mean = draws.mean(axis=0)
        var = draws.var(axis=0)
        sd = np.sqrt(np.diagonal(res.smoothed_covs, axis1=1, axis2=2))
        se = sd / np.sqrt(draws.shape[0])
        assert np.all(np.abs(mean - res.smoothed_means) <= 5 * np.maximum(se, 1e-12))
        assert np.allclose(var, sd**2, rtol=0.05, atol=1e-12)

    def test_sample_lag_one_covariance(self):
        # joint draws must also get the cross-time structure right, not just
        # the marginals; compare E[z_t z_{t+1}] against the gain identity
        lgp = scalar_lgp(horizon=4)
        res = kalman_smoother(lgp)
        rng = np.random.default_rng(7)
        draws = sample_smoother(lgp, rng, size=60_000, result=res)
        for t in range(lgp.horizon):
            a = draws[:, t] - res.smoothed_means[t]
            b = draws[:, t + 1] - res.smoothed_means[t + 1]
            emp = a.T @ b / draws.shape[0]
            expected = res.gains[t] @ res.smoothed_covs[t + 1]
            assert np.allclose(emp, expected, atol=0.02)


class TestAnalyticScore:
    @pytest.mark.parametrize("make", [scalar_lgp, two_dim_lgp])
    def test_matches_finite_differences_of_log_marginal(self, make):
        # Fisher's identity: the posterior-averaged complete-data score
        # equals the gradient of the log marginal likelihood
        lgp = make(horizon=7)
        score = analytic_score(lgp)

        def objective(flat):
            return log_marginal(lgp.with_gain(flat.reshape(lgp.K.shape)))

        fd = finite_diff_grad(objective, lgp.K.ravel())
        assert np.allclose(score, fd, rtol=1e-5, atol=1e-7)

    def test_zero_at_grid_optimum(self):
        base = scalar_lgp(horizon=8)
        k_star = grid_search_gain(
            lambda g: log_marginal(base.with_gain([[g]])), -2.0, 1.0)
        residual = analytic_score(base.with_gain([[k_star]]))[0]
        # scale by the local curvature so the bound is step-size-limited
        assert abs(residual) < 1e-3


class TestNumericalHelpers:
    def test_finite_diff_on_polynomial(self):
        # gradient of a cubic is exact to O(h^2) under central differences
        A = np.array([[2.0, -1.0], [-1.0, 3.0]])

        def f(v):
            return float(v @ A @ v + v[0] ** 3 - 2.0 * v[1])

        v0 = np.array([0.7, -1.2])
        expected = 2.0 * A @ v0 + np.array([3.0 * v0[0] ** 2, -2.0])
        assert np.allclose(finite_diff_grad(f, v0), expected, rtol=1e-7)

    def test_grid_search_on_parabola(self):
        best = grid_search_gain(lambda g: -(g - 0.321) ** 2, -2.0, 2.0)
        assert best == pytest.approx(0.321, abs=1e-4)
