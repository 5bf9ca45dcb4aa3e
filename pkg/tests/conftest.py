import numpy as np
import pytest

from scoreclimb import LinearGaussianProblem, TanhGaussianPolicy, make_env


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def scalar_lgp(gain: float = -0.4, horizon: int = 10,
               eta: float = 0.5) -> LinearGaussianProblem:
    """Scalar linear-Gaussian fixture shared across oracle-backed tests."""
    return LinearGaussianProblem(
        A=[[0.9]], B=[[0.2]], trans_std=[0.15], K=[[gain]], policy_std=[0.3],
        Q=[1.0], R=[0.2], eta=eta, horizon=horizon, x0=[1.0])


def two_dim_lgp(horizon: int = 8) -> LinearGaussianProblem:
    """d=2, m=1 fixture for the multivariate checks."""
    return LinearGaussianProblem(
        A=[[0.9, 0.1], [0.0, 0.8]], B=[[0.0], [0.25]], trans_std=[0.1, 0.15],
        K=[[-0.5, -0.3]], policy_std=[0.25], Q=[1.0, 0.5], R=[0.3],
        eta=0.4, horizon=horizon, x0=[1.0, -0.5])


def random_policy(rng, state_dim=2, action_dim=1, hidden=(6,),
                  scale=2.0, shift=0.0) -> TanhGaussianPolicy:
    policy = TanhGaussianPolicy.initialize(
        state_dim, action_dim, hidden,
        np.full(action_dim, scale), np.full(action_dim, shift), rng)
    policy.log_std = rng.uniform(-0.8, 0.4, size=action_dim)
    return policy


def pendulum_problem(eta=5e-2, horizon=20):
    from scoreclimb import build_problem
    env = make_env("pendulum")
    return env, build_problem(env, eta, horizon)
