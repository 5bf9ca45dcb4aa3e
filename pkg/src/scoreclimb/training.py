"""Score-climbing trainer: stochastic gradient ascent on the log marginal
likelihood driven by one conditional-filter score estimate per iteration,
plus closed-loop policy evaluation by rollout.

The reference trajectory threading through the iterations is a Markov chain
whose invariant law tracks the current trajectory posterior; each step
refreshes it and nudges the parameters along the averaged complete-data
score.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .environments import EnvSpec, build_problem, make_env
from .errors import ConfigurationError, DegenerateWeightsError, NumericalError
from .policies import TanhGaussianPolicy
from .rngtools import substream
from .smc import rb_csmc_score, smc_forward, backward_sample
from .ssm import ControlProblem, Trajectory, grad_log_joint

CURVE_COLUMNS = ("iteration", "interactions", "mean_cost", "std_cost", "wall_ms")


def step_size(k: int, base: float, schedule: str = "constant",
              decay_exponent: float = 0.7) -> float:
    """Step size for iteration k (1-based).

    "constant" matches the reference hyperparameters; "decaying" uses
    base * k**(-alpha) with alpha in (0.5, 1], which makes the step sums
    satisfy the divergence/square-summability conditions required for
    stochastic-approximation convergence.
    """
    if schedule == "constant":
        return base
    if schedule == "decaying":
        if not 0.5 < decay_exponent <= 1.0:
            raise ConfigurationError(
                f"decay exponent must lie in (0.5, 1], got {decay_exponent}")
        return base * k ** (-decay_exponent)
    raise ConfigurationError(f"unknown schedule {schedule!r}")


@dataclass
class TrainConfig:
    env: str = "pendulum"
    iterations: int = 100
    step_base: float = 1e-2
    schedule: str = "constant"
    decay_exponent: float = 0.7
    particles: int = 256
    backward_samples: int = 30
    eta: float = 5e-2
    horizon: int = 100
    seed: int = 0
    hidden_layers: tuple[int, ...] = (256, 256)
    eval_rollouts: int = 30
    eval_every: int = 1
    workers: int = 1
    estimator: str = "rb-csmc"
    count_interactions: bool = True
    score_clip: float | None = 100.0
    log_std_bounds: tuple[float, float] | None = (-2.5, 0.0)
    env_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if min(self.particles, self.backward_samples) < 1:
            raise ConfigurationError("particles and backward_samples must be >= 1")
        if self.eta <= 0:
            raise ConfigurationError("eta must be positive")
        if self.estimator not in ("rb-csmc", "smc"):
            raise ConfigurationError(
                f"estimator must be 'rb-csmc' or 'smc', got {self.estimator!r}")
        if self.schedule == "decaying":
            step_size(1, self.step_base, self.schedule, self.decay_exponent)
        if self.score_clip is not None and self.score_clip <= 0:
            raise ConfigurationError("score_clip must be positive or None")
        if self.log_std_bounds is not None:
            lo, hi = self.log_std_bounds
            if lo > hi:
                raise ConfigurationError("log_std_bounds must satisfy lo <= hi")


@dataclass
class CurvePoint:
    iteration: int
    interactions: int
    mean_cost: float
    std_cost: float
    wall_ms: float


@dataclass
class LearningCurve:
    points: list[CurvePoint] = field(default_factory=list)

    def append(self, point: CurvePoint) -> None:
        if self.points and point.iteration <= self.points[-1].iteration:
            raise ConfigurationError("curve iterations must be strictly increasing")
        self.points.append(point)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CURVE_COLUMNS)
            for p in self.points:
                writer.writerow([p.iteration, p.interactions,
                                 repr(p.mean_cost), repr(p.std_cost),
                                 repr(p.wall_ms)])


def init_reference(problem: ControlProblem, policy,
                   rng: np.random.Generator) -> Trajectory:
    """One open-loop rollout under the current policy; a prior trajectory draw."""
    T = problem.horizon
    states = np.empty((T + 1, problem.state_dim))
    actions = np.empty((T + 1, problem.action_dim))
    pre_squash = np.empty((T + 1, problem.action_dim))
    states[0] = problem.x0
    for t in range(T + 1):
        draw = policy.sample(states[t], rng)
        actions[t] = draw.action
        pre_squash[t] = draw.pre_squash
        if t < T:
            states[t + 1] = problem.dynamics.sample(states[t], actions[t], rng)
    if not np.all(np.isfinite(states)):
        raise NumericalError("rollout produced non-finite states")
    return Trajectory(states, actions, pre_squash)


@dataclass
class TrainerState:
    theta: np.ndarray
    reference: Trajectory
    iteration: int = 0
    score_calls: int = 0


def msc_step(problem: ControlProblem, policy, state: TrainerState,
             gamma: float, N: int, K: int, rng: np.random.Generator,
             estimator: str = "rb-csmc", max_retries: int = 3,
             score_clip: float | None = None,
             log_std_bounds: tuple[float, float] | None = None) -> TrainerState:
    """One ascent iteration: draw a score estimate, move theta, refresh the
    reference.  Degenerate-weight failures retry on a fresh substream a
    bounded number of times before giving up.

    ``score_clip`` rescales the score to that Euclidean norm when it is
    larger (plain ascent with a fixed step diverges on long horizons
    otherwise); ``log_std_bounds`` projects the learned log standard
    deviations back into an interval after the update."""
    policy.theta = state.theta
    for attempt in range(max_retries + 1):
        try:
            if estimator == "rb-csmc":
                score, new_ref = rb_csmc_score(
                    problem, policy, state.reference, N, K, rng)
            else:
                system = smc_forward(problem, policy, N, rng)
                score = np.zeros(policy.num_params)
                draws = []
                for _ in range(K):
                    draw = backward_sample(system, problem, policy, rng)
                    draws.append(draw.trajectory)
                    score += grad_log_joint(problem, policy, draw.trajectory)
                score /= K
                new_ref = draws[rng.integers(K)]
            break
        except DegenerateWeightsError:
            if attempt == max_retries:
                raise NumericalError(
                    f"degenerate weights persisted through {max_retries} retries")
    if score_clip is not None:
        norm = float(np.linalg.norm(score))
        if norm > score_clip:
            score = score * (score_clip / norm)
    theta = state.theta + gamma * score
    if log_std_bounds is not None and hasattr(policy, "log_std"):
        k = policy.log_std.size
        theta[-k:] = np.clip(theta[-k:], *log_std_bounds)
    return TrainerState(theta, new_ref, state.iteration + 1,
                        state.score_calls + 1)


def _rollout_cost(problem: ControlProblem, policy,
                  rng: np.random.Generator) -> float:
    total = 0.0
    x = problem.x0
    for t in range(problem.horizon + 1):
        u = policy.sample(x, rng).action
        total += float(problem.cost(x, u))
        if t < problem.horizon:
            x = problem.dynamics.sample(x, u, rng)
    if not np.isfinite(total):
        raise NumericalError("rollout accumulated non-finite cost")
    return total


def evaluate_policy(problem: ControlProblem, policy, n_rollouts: int,
                    rng: np.random.Generator,
                    workers: int = 1) -> tuple[float, float]:
    """Mean and standard deviation of total cost over closed-loop rollouts.

    Each rollout gets its own pre-assigned substream, so results do not
    depend on the worker count.
    """
    if n_rollouts < 1:
        raise ConfigurationError("need at least one evaluation rollout")
    seeds = rng.integers(0, 2**63 - 1, size=n_rollouts)
    gens = [np.random.Generator(np.random.Philox(int(s))) for s in seeds]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            costs = list(pool.map(
                lambda g: _rollout_cost(problem, policy, g), gens))
    else:
        costs = [_rollout_cost(problem, policy, g) for g in gens]
    costs = np.asarray(costs)
    return float(costs.mean()), float(costs.std())


def train(config: TrainConfig, env: EnvSpec | None = None,
          curve_path=None, checkpoint_path=None):
    """Run the full training loop.

    Returns (policy, curve, problem).  The policy is evaluated before the
    first update (iteration 0) and then every ``eval_every`` iterations;
    cumulative environment interactions count every sampled transition in
    filtering, initialization, and evaluation.  On failure the curve
    collected so far is flushed to ``curve_path`` before the error
    propagates.
    """
    if env is None:
        env = make_env(config.env, **config.env_overrides)
    problem = build_problem(env, config.eta, config.horizon)
    rng_init = substream(config.seed, 0)
    # Feed the network wrapped angles (centered on the goal) and velocities
    # shrunk by 4, so its inputs stay O(1) regardless of spin count or speed.
    angular = np.zeros(env.state_dim, dtype=bool)
    angular[list(env.angular_coords)] = True
    center = np.where(angular, env.x_goal, 0.0)
    scale = np.where(angular, 1.0, 4.0)
    policy = TanhGaussianPolicy.initialize(
        env.state_dim, env.action_dim, config.hidden_layers,
        env.action_scale, env.action_shift, rng_init,
        angular_inputs=env.angular_coords,
        input_center=center, input_scale=scale)
    state = TrainerState(policy.theta, init_reference(problem, policy, rng_init))
    curve = LearningCurve()
    start = time.perf_counter()

    def record(iteration: int) -> None:
        mean, std = evaluate_policy(
            problem, policy, config.eval_rollouts,
            substream(config.seed, 2, iteration), config.workers)
        wall_ms = (time.perf_counter() - start) * 1e3
        curve.append(CurvePoint(iteration, problem.dynamics.interactions,
                                mean, std, wall_ms))

    try:
        if config.iterations > 0:
            record(0)
        for k in range(1, config.iterations + 1):
            gamma = step_size(k, config.step_base, config.schedule,
                              config.decay_exponent)
            state = msc_step(problem, policy, state, gamma,
                             config.particles, config.backward_samples,
                             substream(config.seed, 1, k),
                             config.estimator,
                             score_clip=config.score_clip,
                             log_std_bounds=config.log_std_bounds)
            policy.theta = state.theta
            if k % config.eval_every == 0 or k == config.iterations:
                record(k)
    finally:
        if curve_path is not None:
            curve.write_csv(curve_path)
    if checkpoint_path is not None:
        policy.save(checkpoint_path)
    return policy, curve, problem
