"""Closed-form ground truth for linear-Gaussian instances of the model.

When dynamics are linear, the policy is linear-Gaussian, and the cost is a
positive diagonal quadratic, the state-action chain z_t = (x_t, u_t) with
the exponentiated-cost pseudo-observations is jointly Gaussian.  Everything
of interest is then exactly computable: smoothing marginals via a Kalman
filter and Rauch-Tung-Striebel recursion, the log marginal likelihood, exact
joint smoothing draws, and the expected complete-data score in the policy
gain.  These serve as independent oracles for the particle machinery.

Also hosts the finite-difference gradient checker used throughout the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, NumericalError
from .policies import LinearGaussianPolicy
from .ssm import ControlProblem, LinearDynamics

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class LinearGaussianProblem:
    """Fixture: x' = A x + B u + noise, u = K x + noise, cost = x'Qx + u'Ru."""

    A: np.ndarray
    B: np.ndarray
    trans_std: np.ndarray
    K: np.ndarray
    policy_std: np.ndarray
    Q: np.ndarray  # diagonal entries, strictly positive
    R: np.ndarray  # diagonal entries, strictly positive
    eta: float
    horizon: int
    x0: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        d, m = self.B.shape
        self.trans_std = np.broadcast_to(
            np.asarray(self.trans_std, dtype=float), (d,)).copy()
        self.policy_std = np.broadcast_to(
            np.asarray(self.policy_std, dtype=float), (m,)).copy()
        self.Q = np.broadcast_to(np.asarray(self.Q, dtype=float), (d,)).copy()
        self.R = np.broadcast_to(np.asarray(self.R, dtype=float), (m,)).copy()
        self.x0 = np.asarray(self.x0, dtype=float)
        if np.any(self.Q <= 0) or np.any(self.R <= 0):
            raise ConfigurationError(
                "Q and R must be strictly positive for a proper Gaussian "
                "pseudo-observation")
        if self.eta <= 0:
            raise ConfigurationError("eta must be positive")

    @property
    def state_dim(self) -> int:
        return self.B.shape[0]

    @property
    def action_dim(self) -> int:
        return self.B.shape[1]

    def with_gain(self, K) -> "LinearGaussianProblem":
        return LinearGaussianProblem(
            self.A, self.B, self.trans_std, K, self.policy_std,
            self.Q, self.R, self.eta, self.horizon, self.x0)

    def to_control_problem(self) -> tuple[ControlProblem, LinearGaussianPolicy]:
        """Equivalent generic problem + policy, runnable by the particle code."""
        Q, R = self.Q, self.R

        def cost(x, u):
            return (Q * x * x).sum(axis=-1) + (R * u * u).sum(axis=-1)

        problem = ControlProblem(
            dynamics=LinearDynamics(self.A, self.B, self.trans_std),
            cost=cost, eta=self.eta, horizon=self.horizon, x0=self.x0,
            action_scale=np.ones(self.action_dim),
            action_shift=np.zeros(self.action_dim),
        )
        return problem, LinearGaussianPolicy(self.K, self.policy_std)

    # joint z = (x, u) chain matrices ------------------------------------

    def _chain(self):
        d, m = self.state_dim, self.action_dim
        Sx = np.diag(self.trans_std**2)
        Su = np.diag(self.policy_std**2)
        F = np.zeros((d + m, d + m))
        F[:d, :d] = self.A
        F[:d, d:] = self.B
        F[d:, :d] = self.K @ self.A
        F[d:, d:] = self.K @ self.B
        W = np.zeros((d + m, d + m))
        W[:d, :d] = Sx
        W[:d, d:] = Sx @ self.K.T
        W[d:, :d] = self.K @ Sx
        W[d:, d:] = self.K @ Sx @ self.K.T + Su
        z0 = np.concatenate([self.x0, self.K @ self.x0])
        P0 = np.zeros((d + m, d + m))
        P0[d:, d:] = Su
        obs_prec = 2.0 * self.eta * np.concatenate([self.Q, self.R])
        return F, W, z0, P0, obs_prec


@dataclass
class KalmanResult:
    """Per-step Gaussian posteriors over z_t = (x_t, u_t)."""

    predicted_means: np.ndarray   # (T+1, p)
    predicted_covs: np.ndarray    # (T+1, p, p)
    filtered_means: np.ndarray
    filtered_covs: np.ndarray
    smoothed_means: np.ndarray
    smoothed_covs: np.ndarray
    gains: np.ndarray             # (T, p, p) backward smoother gains
    log_marginal: float = field(default=np.nan)


def kalman_smoother(lgp: LinearGaussianProblem) -> KalmanResult:
    """Exact filtering and smoothing marginals plus the log marginal likelihood.

    The pseudo-observation at each step is treated as a unit-map Gaussian
    measurement of z_t with mean zero and covariance (2 eta diag(Q, R))^-1;
    the likelihood accumulator corrects for the pseudo-likelihood being an
    unnormalized Gaussian kernel rather than a density.
    """
    F, W, z0, P0, obs_prec = lgp._chain()
    T = lgp.horizon
    p = F.shape[0]
    R_obs = np.diag(1.0 / obs_prec)
    # log of the constant relating N(0; z, R_obs) to exp(-eta * cost)
    log_norm = -0.5 * (p * _LOG_2PI - np.sum(np.log(obs_prec)))

    pm = np.empty((T + 1, p))
    pc = np.empty((T + 1, p, p))
    fm = np.empty((T + 1, p))
    fc = np.empty((T + 1, p, p))
    eye = np.eye(p)

    mean, cov = z0, P0
    loglik = 0.0
    for t in range(T + 1):
        pm[t], pc[t] = mean, cov
        S = cov + R_obs
        try:
            Sinv = np.linalg.inv(S)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular innovation covariance at t={t}") from exc
        gain = cov @ Sinv
        fm[t] = mean - gain @ mean
        J = eye - gain
        fc[t] = J @ cov @ J.T + gain @ R_obs @ gain.T   # Joseph form
        fc[t] = 0.5 * (fc[t] + fc[t].T)
        sign, logdet = np.linalg.slogdet(S)
        if sign <= 0:
            raise NumericalError(f"non-positive innovation covariance at t={t}")
        loglik += -0.5 * (p * _LOG_2PI + logdet + mean @ Sinv @ mean) - log_norm
        mean = F @ fm[t]
        cov = F @ fc[t] @ F.T + W
        cov = 0.5 * (cov + cov.T)

    sm = np.empty_like(fm)
    sc = np.empty_like(fc)
    gains = np.empty((T, p, p))
    sm[T], sc[T] = fm[T], fc[T]
    for t in range(T - 1, -1, -1):
        # pc[t+1] is positive definite because the process noise has full rank
        G = fc[t] @ F.T @ np.linalg.inv(pc[t + 1])
        gains[t] = G
        sm[t] = fm[t] + G @ (sm[t + 1] - pm[t + 1])
        sc[t] = fc[t] + G @ (sc[t + 1] - pc[t + 1]) @ G.T
        sc[t] = 0.5 * (sc[t] + sc[t].T)

    return KalmanResult(pm, pc, fm, fc, sm, sc, gains, loglik)


def log_marginal(lgp: LinearGaussianProblem) -> float:
    """Exact log p(y_{0:T} = 1) for the fixture."""
    return kalman_smoother(lgp).log_marginal


def _sample_mvn(mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator,
                size: int) -> np.ndarray:
    """Draws from N(mean, cov); tolerates singular covariance."""
    vals, vecs = np.linalg.eigh(cov)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return mean + rng.standard_normal((size, mean.shape[0])) @ root.T


def sample_smoother(lgp: LinearGaussianProblem, rng: np.random.Generator,
                    size: int = 1,
                    result: KalmanResult | None = None) -> np.ndarray:
    """Exact joint draws z_{0:T} from the trajectory posterior; (size, T+1, p)."""
    res = kalman_smoother(lgp) if result is None else result
    T = lgp.horizon
    p = res.filtered_means.shape[1]
    out = np.empty((size, T + 1, p))
    out[:, T] = _sample_mvn(res.filtered_means[T], res.filtered_covs[T], rng, size)
    for t in range(T - 1, -1, -1):
        G = res.gains[t]
        cond_cov = res.filtered_covs[t] - G @ res.predicted_covs[t + 1] @ G.T
        cond_cov = 0.5 * (cond_cov + cond_cov.T)
        base = res.filtered_means[t] + (out[:, t + 1] - res.predicted_means[t + 1]) @ G.T
        out[:, t] = base + _sample_mvn(np.zeros(p), cond_cov, rng, size)
    return out


def analytic_score(lgp: LinearGaussianProblem,
                   result: KalmanResult | None = None) -> np.ndarray:
    """Exact score in vec(K): the posterior expectation of the complete-data
    gradient, integrable in closed form from the smoothing marginals."""
    res = kalman_smoother(lgp) if result is None else result
    d, m = lgp.state_dim, lgp.action_dim
    Su_inv = 1.0 / lgp.policy_std**2
    total = np.zeros((m, d))
    for t in range(lgp.horizon + 1):
        mean, cov = res.smoothed_means[t], res.smoothed_covs[t]
        mx, mu = mean[:d], mean[d:]
        Exx = cov[:d, :d] + np.outer(mx, mx)
        Eux = cov[d:, :d] + np.outer(mu, mx)
        total += Su_inv[:, None] * (Eux - lgp.K @ Exx)
    return total.ravel()


def dense_smoother(lgp: LinearGaussianProblem) -> tuple[np.ndarray, np.ndarray]:
    """Smoothing marginals by one dense joint-Gaussian conditioning step.

    Builds the full prior over the stacked trajectory (z_0, ..., z_T) as an
    affine map of the driving noise, conditions on the pseudo-observations in
    one linear solve, and returns per-step means (T+1, p) and covariance
    blocks (T+1, p, p).  Cubic in T; intended only as an independent check
    of the recursive smoother on tiny problems.
    """
    d, m = lgp.state_dim, lgp.action_dim
    T = lgp.horizon
    p = d + m
    n_eps = (T + 1) * m + T * d
    # rows of the affine map: z = L @ eps + mu
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
    obs_prec = 2.0 * lgp.eta * np.tile(np.concatenate([lgp.Q, lgp.R]), T + 1)
    S = sigma + np.diag(1.0 / obs_prec)
    gain = sigma @ np.linalg.inv(S)
    post_mean = mu - gain @ mu
    post_cov = sigma - gain @ sigma
    means = post_mean.reshape(T + 1, p)
    covs = np.stack([post_cov[t * p:(t + 1) * p, t * p:(t + 1) * p]
                     for t in range(T + 1)])
    return means, covs


def finite_diff_grad(func: Callable[[np.ndarray], float], theta: np.ndarray,
                     rel_step: float = 1e-6) -> np.ndarray:
    """Central finite differences with per-coordinate relative step scaling."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        h = rel_step * max(1.0, abs(theta[i]))
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        fu, fd = func(up), func(dn)
        if not (np.isfinite(fu) and np.isfinite(fd)):
            raise NumericalError(f"non-finite evaluation near coordinate {i}")
        grad[i] = (fu - fd) / (2.0 * h)
    return grad


def grid_search_gain(objective: Callable[[float], float], lo: float, hi: float,
                     coarse: int = 400, refinements: int = 3) -> float:
    """Maximize a smooth scalar objective by iteratively refined grid search."""
    for _ in range(refinements):
        grid = np.linspace(lo, hi, coarse)
        vals = np.array([objective(g) for g in grid])
        best = int(np.argmax(vals))
        span = grid[1] - grid[0]
        lo = grid[max(best - 1, 0)] - span
        hi = grid[min(best + 1, coarse - 1)] + span
    return float(0.5 * (lo + hi))
