"""Self-contained correctness checks runnable from the CLI.

Each check pits an implementation path against an independent oracle
(finite differences, quadrature, closed-form Gaussian smoothing) on a small
problem, sized to finish in seconds.  The heavyweight statistical versions
of these properties live in the test suite; this module is the quick
field diagnostic behind ``scoreclimb verify``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .environments import build_problem, make_env
from .oracle import (LinearGaussianProblem, analytic_score, dense_smoother,
                     finite_diff_grad, kalman_smoother, sample_smoother)
from .policies import TanhGaussianPolicy
from .rngtools import substream
from .smc import csmc_kernel, rb_csmc_score
from .ssm import Trajectory, grad_log_joint, log_joint
from .training import init_reference


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _scalar_fixture(horizon: int = 10, gain: float = -0.4) -> LinearGaussianProblem:
    return LinearGaussianProblem(
        A=[[0.9]], B=[[0.2]], trans_std=[0.15], K=[[gain]], policy_std=[0.3],
        Q=[1.0], R=[0.2], eta=0.5, horizon=horizon, x0=[1.0])


def check_policy_gradients(seed: int = 0) -> CheckResult:
    """Complete-data score versus central finite differences."""
    rng = substream(seed, 10)
    env = make_env("pendulum")
    problem = build_problem(env, eta=5e-2, horizon=6)
    worst = 0.0
    for _ in range(5):
        policy = TanhGaussianPolicy.initialize(
            2, 1, (6,), env.action_scale, env.action_shift, rng)
        traj = init_reference(problem, policy, rng)
        grad = grad_log_joint(problem, policy, traj)

        def objective(theta):
            policy.theta = theta
            return log_joint(problem, policy, traj)

        fd = finite_diff_grad(objective, policy.theta)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, rel)
    return CheckResult("policy-gradients-vs-finite-differences",
                       worst <= 1e-5, f"max relative error {worst:.2e}")


def check_flow_normalization(seed: int = 0) -> CheckResult:
    """1-D squashed action density integrates to one over its support."""
    rng = substream(seed, 11)
    worst = 0.0
    for _ in range(3):
        policy = TanhGaussianPolicy.initialize(
            2, 1, (4,), [1.7], [0.3], rng)
        policy.log_std = rng.uniform(-1.0, 0.5, size=1)
        x = rng.standard_normal(2)
        lo = policy.action_shift[0] - policy.action_scale[0]
        hi = policy.action_shift[0] + policy.action_scale[0]
        integral, _ = quad(
            lambda u: float(np.exp(policy.logpdf(x, np.array([u])))),
            lo, hi, limit=200)
        worst = max(worst, abs(integral - 1.0))
    return CheckResult("action-density-normalization",
                       worst <= 1e-6, f"max |integral - 1| = {worst:.2e}")


def check_smoother_consistency() -> CheckResult:
    """Recursive smoother versus dense joint-Gaussian conditioning."""
    lgp = _scalar_fixture(horizon=4)
    res = kalman_smoother(lgp)
    means, covs = dense_smoother(lgp)
    err = max(np.max(np.abs(res.smoothed_means - means)),
              np.max(np.abs(res.smoothed_covs - covs)))
    return CheckResult("smoother-vs-dense-conditioning",
                       err <= 1e-8, f"max abs deviation {err:.2e}")


def check_kernel_invariance(seed: int = 0, reps: int = 4000) -> CheckResult:
    """One conditional-filter kernel step preserves exact posterior means."""
    lgp = _scalar_fixture(horizon=10)
    problem, policy = lgp.to_control_problem()
    res = kalman_smoother(lgp)
    rng = substream(seed, 12)
    d = lgp.state_dim
    starts = sample_smoother(lgp, rng, reps, result=res)
    outs = np.empty((reps, lgp.horizon + 1))
    for i in range(reps):
        ref = Trajectory(starts[i, :, :d], starts[i, :, d:])
        out = csmc_kernel(problem, policy, ref, N=8, rng=rng)
        outs[i] = out.states[:, 0]
    est = outs.mean(axis=0)
    se = outs.std(axis=0) / np.sqrt(reps)
    # t=0 is deterministic (zero standard error); compare the rest
    z = np.abs(est[1:] - res.smoothed_means[1:, 0]) / se[1:]
    frac = float(np.mean(z <= 4.0))
    return CheckResult("csmc-kernel-invariance",
                       frac >= 0.9, f"{frac:.0%} of steps within 4 SE")


def check_score_estimator(seed: int = 0, iters: int = 3000) -> CheckResult:
    """Averaged conditional-filter score tracks the closed-form score."""
    lgp = _scalar_fixture(horizon=10, gain=-0.3)
    problem, policy = lgp.to_control_problem()
    truth = analytic_score(lgp)
    rng = substream(seed, 13)
    ref = init_reference(problem, policy, rng)
    total = np.zeros_like(truth)
    for _ in range(iters):
        score, ref = rb_csmc_score(problem, policy, ref, N=8, K=4, rng=rng)
        total += score
    est = total / iters
    rel = float(np.max(np.abs(est - truth) / np.maximum(np.abs(truth), 1e-8)))
    return CheckResult("score-estimator-vs-analytic",
                       rel <= 0.15, f"max relative error {rel:.2%}")


ALL_CHECKS = (
    check_policy_gradients,
    check_flow_normalization,
    check_smoother_consistency,
    check_kernel_invariance,
    check_score_estimator,
)


def run_all(seed: int = 0) -> list[CheckResult]:
    results = []
    for check in ALL_CHECKS:
        try:
            results.append(check())
        except Exception as exc:  # a crash is a failure, not an abort
            results.append(CheckResult(check.__name__, False, f"raised {exc!r}"))
    return results
