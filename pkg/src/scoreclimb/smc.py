"""Particle machinery: conditional and unconditional filtering, backward
sampling, and the score estimators built on them.

The conditional filter pins a reference trajectory into particle slot 0 at
every time step so that it survives resampling; one forward pass followed by
one backward draw is a Markov kernel whose invariant law is the trajectory
posterior of the state-space model.  Averaging the complete-data score over
several backward draws from the same forward pass reduces estimator variance
at no extra simulation cost.

All weights are kept in log space throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateWeightsError
from .ssm import ControlProblem, Trajectory, grad_log_joint, obs_loglik


@dataclass
class ParticleSystem:
    """Output of one forward filtering pass.

    states:      (T+1, N, d)
    actions:     (T+1, N, m)
    pre_squash:  (T+1, N, m) Gaussian draws behind the actions
    log_weights: (T+1, N)
    ancestors:   (T, N) int; ancestors[t-1, n] is the index at time t-1 of
                 the particle that particle n at time t was propagated from.
    """

    states: np.ndarray
    actions: np.ndarray
    pre_squash: np.ndarray
    log_weights: np.ndarray
    ancestors: np.ndarray

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def num_particles(self) -> int:
        return self.states.shape[1]


@dataclass
class BackwardDraw:
    """One ancestral path drawn backward through a particle system."""

    trajectory: Trajectory
    indices: np.ndarray  # (T+1,) int


def multinomial_resample(log_weights: np.ndarray, count: int,
                         rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. indices with probability proportional to the weights.

    Normalization happens implicitly by scaling the uniforms to the total
    max-shifted weight, saving a pass over the array in the hot path.
    """
    log_weights = np.asarray(log_weights, dtype=float)
    shift = log_weights.max()
    if not np.isfinite(shift):
        raise DegenerateWeightsError(
            "all particle weights are zero; the trajectory has no support")
    cdf = np.exp(log_weights - shift).cumsum()
    idx = cdf.searchsorted(rng.random(count) * cdf[-1], side="right")
    return np.minimum(idx, log_weights.size - 1)


def _forward_filter(problem: ControlProblem, policy, N: int,
                    rng: np.random.Generator,
                    reference: Trajectory | None) -> ParticleSystem:
    """Bootstrap filter; with a reference, slot 0 is pinned to it throughout."""
    T = problem.horizon
    d, m = problem.state_dim, problem.action_dim
    pinned = reference is not None
    fresh = N - 1 if pinned else N

    states = np.empty((T + 1, N, d))
    actions = np.empty((T + 1, N, m))
    pre_sq = np.empty((T + 1, N, m))
    log_w = np.empty((T + 1, N))
    ancestors = np.empty((T, N), dtype=np.intp)

    if pinned:
        ref_pre = reference.pre_squash
        if ref_pre is None:
            ref_pre = policy.recover_pre_squash(reference.actions)

    # All particles share the known initial state; only actions differ.
    states[0] = problem.x0
    x0_batch = np.broadcast_to(problem.x0, (fresh, d))
    draw0 = policy.sample(x0_batch, rng)
    if pinned:
        states[0, 0] = reference.states[0]
        actions[0, 0] = reference.actions[0]
        pre_sq[0, 0] = ref_pre[0]
        actions[0, 1:] = draw0.action
        pre_sq[0, 1:] = draw0.pre_squash
    else:
        actions[0] = draw0.action
        pre_sq[0] = draw0.pre_squash
    log_w[0] = obs_loglik(problem, states[0], actions[0])

    for t in range(1, T + 1):
        anc = multinomial_resample(log_w[t - 1], fresh, rng)
        x_new = problem.dynamics.sample(states[t - 1, anc], actions[t - 1, anc], rng)
        draw = policy.sample(x_new, rng)
        if pinned:
            states[t, 0] = reference.states[t]
            actions[t, 0] = reference.actions[t]
            pre_sq[t, 0] = ref_pre[t]
            states[t, 1:] = x_new
            actions[t, 1:] = draw.action
            pre_sq[t, 1:] = draw.pre_squash
            ancestors[t - 1, 0] = 0
            ancestors[t - 1, 1:] = anc
        else:
            states[t] = x_new
            actions[t] = draw.action
            pre_sq[t] = draw.pre_squash
            ancestors[t - 1] = anc
        log_w[t] = obs_loglik(problem, states[t], actions[t])

    return ParticleSystem(states, actions, pre_sq, log_w, ancestors)


def csmc_forward(problem: ControlProblem, policy, reference: Trajectory,
                 N: int, rng: np.random.Generator) -> ParticleSystem:
    """Conditional forward pass: the reference occupies slot 0 at every step."""
    if N < 2:
        raise ConfigurationError(f"conditional filtering needs N >= 2, got {N}")
    problem.check_trajectory(reference)
    return _forward_filter(problem, policy, N, rng, reference)


def smc_forward(problem: ControlProblem, policy, N: int,
                rng: np.random.Generator) -> ParticleSystem:
    """Plain (unconditional) bootstrap filter."""
    if N < 2:
        raise ConfigurationError(f"filtering needs N >= 2, got {N}")
    return _forward_filter(problem, policy, N, rng, None)


def backward_sample(system: ParticleSystem, problem: ControlProblem, policy,
                    rng: np.random.Generator) -> BackwardDraw:
    """Draw one ancestral path through the filtered clouds.

    The backward weight at time t is w_t^k * f(x*_{t+1} | x_t^k, u_t^k); the
    joint transition also carries a policy factor pi(u*_{t+1} | x*_{t+1}),
    but it is identical for every k and cancels under normalization, so it is
    not evaluated.
    """
    T = system.horizon
    indices = np.empty(T + 1, dtype=np.intp)
    indices[T] = multinomial_resample(system.log_weights[T], 1, rng)[0]
    for t in range(T - 1, -1, -1):
        log_bw = system.log_weights[t] + problem.dynamics.logpdf(
            system.states[t + 1, indices[t + 1]],
            system.states[t], system.actions[t])
        indices[t] = multinomial_resample(log_bw, 1, rng)[0]
    rows = np.arange(T + 1)
    traj = Trajectory(system.states[rows, indices],
                      system.actions[rows, indices],
                      system.pre_squash[rows, indices])
    return BackwardDraw(traj, indices)


def csmc_kernel(problem: ControlProblem, policy, reference: Trajectory,
                N: int, rng: np.random.Generator) -> Trajectory:
    """One step of the trajectory-posterior-invariant Markov chain."""
    system = csmc_forward(problem, policy, reference, N, rng)
    return backward_sample(system, problem, policy, rng).trajectory


def rb_csmc_score(problem: ControlProblem, policy, reference: Trajectory,
                  N: int, K: int,
                  rng: np.random.Generator) -> tuple[np.ndarray, Trajectory]:
    """Score estimate from one conditional pass and K backward draws.

    Returns the averaged complete-data score and a new reference trajectory
    picked uniformly among the K draws (each draw is marginally a kernel
    output, so the chain stays correct).
    """
    if K < 1:
        raise ConfigurationError(f"need at least one backward draw, got {K}")
    system = csmc_forward(problem, policy, reference, N, rng)
    score = np.zeros(policy.num_params)
    draws = []
    for _ in range(K):
        draw = backward_sample(system, problem, policy, rng)
        draws.append(draw.trajectory)
        score += grad_log_joint(problem, policy, draw.trajectory)
    score /= K
    new_reference = draws[rng.integers(K)]
    return score, new_reference


def smc_score(problem: ControlProblem, policy, N: int, K: int,
              rng: np.random.Generator) -> np.ndarray:
    """Biased baseline: unconditional filter plus K backward draws.

    Consistent as N grows, but biased for finite N since the filter is not
    pinned to a posterior-distributed reference.
    """
    if K < 1:
        raise ConfigurationError(f"need at least one backward draw, got {K}")
    system = smc_forward(problem, policy, N, rng)
    score = np.zeros(policy.num_params)
    for _ in range(K):
        draw = backward_sample(system, problem, policy, rng)
        score += grad_log_joint(problem, policy, draw.trajectory)
    return score / K
