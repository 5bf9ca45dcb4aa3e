"""State-space formulation of a risk-sensitive control problem.

A control problem (dynamics f, policy pi_theta, nonnegative cost c, inverse
temperature eta) induces a state-space model over state-action pairs
z_t = (x_t, u_t) with binary pseudo-observations whose log-likelihood is
-eta * c(x_t, u_t).  Maximizing the marginal likelihood of this model in
theta minimizes a risk-sensitive transformation of the expected total cost.

This module holds the trajectory containers, the Gaussian transition models,
and the joint log-density / score of the model.  Everything here is a pure
function of its arguments and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigurationError, NumericalError

_LOG_2PI = float(np.log(2.0 * np.pi))


class StateAction(NamedTuple):
    """One latent state of the model: a (state, action) pair."""

    state: np.ndarray
    action: np.ndarray


@dataclass
class Trajectory:
    """A full state-action path.

    states:  (T+1, d) array
    actions: (T+1, m) array
    pre_squash: optional (T+1, m) array of the Gaussian draws the actions
        were squashed from.  Carrying them avoids reconstructing them through
        atanh in gradient computations, which is lossy once the squash
        saturates in float arithmetic.
    """

    states: np.ndarray
    actions: np.ndarray
    pre_squash: np.ndarray | None = None

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.actions = np.atleast_2d(np.asarray(self.actions, dtype=float))
        if self.states.shape[0] != self.actions.shape[0]:
            raise ConfigurationError(
                f"states ({self.states.shape[0]}) and actions "
                f"({self.actions.shape[0]}) disagree on trajectory length"
            )
        if self.pre_squash is not None:
            self.pre_squash = np.atleast_2d(
                np.asarray(self.pre_squash, dtype=float))
            if self.pre_squash.shape != self.actions.shape:
                raise ConfigurationError(
                    "pre_squash must have the same shape as actions")

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    def step(self, t: int) -> StateAction:
        return StateAction(self.states[t], self.actions[t])


class GaussianDynamics:
    """Transition model with a diagonal Gaussian density around a mean map.

    Subclasses provide ``mean``; sampling and density evaluation are shared.
    The ``interactions`` counter tracks how many single transitions have been
    sampled (one per row of a batched call), for budget accounting.
    """

    state_dim: int
    action_dim: int
    std: np.ndarray

    def __init__(self, state_dim: int, action_dim: int, std) -> None:
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.std = np.broadcast_to(np.asarray(std, dtype=float), (state_dim,)).copy()
        if np.any(self.std <= 0):
            raise ConfigurationError("transition noise std must be strictly positive")
        self.interactions = 0
        self._log_norm = float(-np.sum(np.log(self.std))
                               - 0.5 * state_dim * _LOG_2PI)

    def mean(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Deterministic next-state mean; batched over leading axes."""
        raise NotImplementedError

    def sample(self, x: np.ndarray, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        m = self.mean(x, u)
        if not np.isfinite(m).all():
            raise NumericalError(
                f"non-finite transition mean for state {x!r}, action {u!r}"
            )
        self.interactions += m.size // self.state_dim
        return m + self.std * rng.standard_normal(m.shape)

    def logpdf(self, x_next: np.ndarray, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        z = (x_next - self.mean(x, u)) / self.std
        return -0.5 * (z * z).sum(axis=-1) + self._log_norm


class LinearDynamics(GaussianDynamics):
    """x' = A x + B u + noise.  Used by oracle fixtures and tests."""

    def __init__(self, A, B, std) -> None:
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        if self.A.shape[0] != self.A.shape[1] or self.A.shape[0] != self.B.shape[0]:
            raise ConfigurationError("A must be square and conformable with B")
        self._AT = np.ascontiguousarray(self.A.T)
        self._BT = np.ascontiguousarray(self.B.T)
        super().__init__(self.A.shape[0], self.B.shape[1], std)

    def mean(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return x @ self._AT + u @ self._BT


@dataclass
class ControlProblem:
    """Everything that defines the equivalent state-space model.

    cost must be vectorized over leading axes and nonnegative; nonnegativity
    is spot-checked on random inputs at construction time.
    """

    dynamics: GaussianDynamics
    cost: Callable[[np.ndarray, np.ndarray], np.ndarray]
    eta: float
    horizon: int
    x0: np.ndarray
    action_scale: np.ndarray
    action_shift: np.ndarray
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.action_scale = np.asarray(self.action_scale, dtype=float)
        self.action_shift = np.asarray(self.action_shift, dtype=float)
        if self.eta <= 0:
            raise ConfigurationError(f"temperature must be positive, got {self.eta}")
        if self.horizon < 0:
            raise ConfigurationError(f"horizon must be >= 0, got {self.horizon}")
        if self.x0.shape != (self.dynamics.state_dim,):
            raise ConfigurationError("initial state dimension does not match dynamics")
        if np.any(self.action_scale <= 0):
            raise ConfigurationError("action_scale must be strictly positive")
        if not self._checked:
            self._spot_check_cost()
            self._checked = True

    def _spot_check_cost(self, n: int = 64) -> None:
        rng = np.random.Generator(np.random.Philox(0))
        xs = self.x0 + rng.standard_normal((n, self.dynamics.state_dim))
        us = self.action_shift + self.action_scale * np.tanh(
            rng.standard_normal((n, self.dynamics.action_dim))
        )
        c = np.asarray(self.cost(xs, us))
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ConfigurationError("cost must be finite and nonnegative")

    @property
    def state_dim(self) -> int:
        return self.dynamics.state_dim

    @property
    def action_dim(self) -> int:
        return self.dynamics.action_dim

    def check_trajectory(self, traj: Trajectory) -> None:
        if traj.horizon != self.horizon:
            raise ConfigurationError(
                f"trajectory length {traj.horizon + 1} does not match "
                f"horizon {self.horizon} + 1"
            )
        if not np.array_equal(traj.states[0], self.x0):
            raise ConfigurationError(
                "trajectory does not start at the problem's fixed initial state"
            )


def obs_loglik(problem: ControlProblem, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Log-likelihood of the optimality pseudo-observation: -eta * c(x, u).

    Batched over leading axes; always <= 0 because costs are nonnegative.
    """
    if x.shape[-1] != problem.state_dim or u.shape[-1] != problem.action_dim:
        raise ConfigurationError(
            f"state/action dims ({x.shape[-1]}, {u.shape[-1]}) do not match "
            f"problem ({problem.state_dim}, {problem.action_dim})"
        )
    return -problem.eta * np.asarray(problem.cost(x, u))


def log_joint(problem: ControlProblem, policy, traj: Trajectory) -> float:
    """Joint log-density of (z_{0:T}, y_{0:T}) under the model.

    The point mass on the known initial state carries no parameter dependence
    and no finite log-density, so it is enforced as an invariant on ``traj``
    rather than evaluated.
    """
    problem.check_trajectory(traj)
    xs, us = traj.states, traj.actions
    lp = float(np.sum(policy.logpdf(xs, us)))
    lp += float(np.sum(problem.dynamics.logpdf(xs[1:], xs[:-1], us[:-1])))
    lp += float(np.sum(obs_loglik(problem, xs, us)))
    return lp


def grad_log_joint(problem: ControlProblem, policy, traj: Trajectory) -> np.ndarray:
    """Gradient of ``log_joint`` in the policy parameters.

    The dynamics and the pseudo-likelihood do not depend on the policy
    parameters, so only the per-step policy log-density terms contribute.
    """
    problem.check_trajectory(traj)
    return policy.score(traj.states, traj.actions,
                        pre_squash=traj.pre_squash)
