"""Stochastic under-actuated benchmark systems.

Three swing-up tasks: pendulum, cart-pole, and double pendulum.  Dynamics are
explicit-Euler discretizations of the standard rigid-body ODEs with additive
diagonal Gaussian noise on every state coordinate.  Cost functions and
torque/force limits are documented package choices (quadratic shaping with
angle wrapping); see README for the exact weights.

All drift and cost functions are vectorized over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .ssm import ControlProblem, GaussianDynamics

GRAVITY = 9.81


@dataclass
class EnvSpec:
    """Full description of one benchmark system."""

    name: str
    state_dim: int
    action_dim: int
    drift: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dt: float
    noise_std: float
    x0: np.ndarray
    x_goal: np.ndarray
    action_scale: np.ndarray
    action_shift: np.ndarray
    angular_coords: tuple[int, ...]
    state_weights: np.ndarray
    action_weights: np.ndarray
    hidden_layers: tuple[int, ...] = (256, 256)
    defaults: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt <= 0 or self.noise_std <= 0:
            raise ConfigurationError("dt and noise_std must be positive")
        for name in ("x0", "x_goal", "state_weights"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.state_dim,):
                raise ConfigurationError(f"{name} must have length {self.state_dim}")
            setattr(self, name, arr)
        for name in ("action_scale", "action_shift", "action_weights"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.action_dim,):
                raise ConfigurationError(f"{name} must have length {self.action_dim}")
            setattr(self, name, arr)


class EulerDynamics(GaussianDynamics):
    """x' = x + dt * drift(x, u) + noise."""

    def __init__(self, env: EnvSpec) -> None:
        super().__init__(env.state_dim, env.action_dim, env.noise_std)
        self.env = env

    def mean(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return x + self.env.dt * self.env.drift(x, u)


def euler_mean(env: EnvSpec, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return x + env.dt * env.drift(x, u)


def make_cost(env: EnvSpec) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Quadratic shaping cost, periodic in the angular coordinates.

    Angular errors enter as 2*(1 - cos(delta)), which matches delta^2 for
    small deviations and is invariant to full turns; other coordinates and
    the action enter as plain weighted squares.  Zero exactly at the goal
    (mod 2*pi on angles) with zero action.
    """
    angular = np.zeros(env.state_dim, dtype=bool)
    angular[list(env.angular_coords)] = True
    qs, qa = env.state_weights, env.action_weights
    goal = env.x_goal

    def cost(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        delta = x - goal
        err = np.where(angular, 2.0 * (1.0 - np.cos(delta)), delta * delta)
        return (qs * err).sum(axis=-1) + (qa * u * u).sum(axis=-1)

    return cost


# -- drift functions ------------------------------------------------------

def _pendulum_drift(mass: float, length: float, damping: float):
    def drift(x, u):
        theta, omega = x[..., 0], x[..., 1]
        torque = u[..., 0]
        alpha = (torque - damping * omega) / (mass * length**2) \
            - (GRAVITY / length) * np.sin(theta)
        return np.stack([omega, alpha], axis=-1)

    return drift


def _cartpole_drift(cart_mass: float, pole_mass: float, length: float):
    # State (cart position, pole angle from hanging, cart velocity, angular
    # velocity); frictionless track and joint.
    def drift(x, u):
        theta = x[..., 1]
        xdot = x[..., 2]
        omega = x[..., 3]
        force = u[..., 0]
        sin, cos = np.sin(theta), np.cos(theta)
        denom = cart_mass + pole_mass * sin**2
        xacc = (force + pole_mass * sin * (length * omega**2 + GRAVITY * cos)) / denom
        thacc = -(cos * xacc + GRAVITY * sin) / length
        return np.stack([xdot, omega, xacc, thacc], axis=-1)

    return drift


def _double_pendulum_drift(m1: float, m2: float, l1: float, l2: float):
    # Point masses at the link ends.  q1 is the first link's angle from
    # hanging, q2 the second link's angle relative to the first; both joints
    # are actuated but torque-limited.
    def drift(x, u):
        q1, q2 = x[..., 0], x[..., 1]
        dq1, dq2 = x[..., 2], x[..., 3]
        t1, t2 = u[..., 0], u[..., 1]
        c2, s2 = np.cos(q2), np.sin(q2)
        m11 = m1 * l1**2 + m2 * (l1**2 + l2**2 + 2.0 * l1 * l2 * c2)
        m12 = m2 * (l2**2 + l1 * l2 * c2)
        m22 = np.broadcast_to(m2 * l2**2, np.shape(q1))
        h = m2 * l1 * l2 * s2
        c1 = -h * dq2**2 - 2.0 * h * dq1 * dq2
        g1 = (m1 + m2) * l1 * GRAVITY * np.sin(q1) \
            + m2 * l2 * GRAVITY * np.sin(q1 + q2)
        g2 = m2 * l2 * GRAVITY * np.sin(q1 + q2)
        rhs1 = t1 - c1 - g1
        rhs2 = t2 - h * dq1**2 - g2
        det = m11 * m22 - m12**2
        ddq1 = (m22 * rhs1 - m12 * rhs2) / det
        ddq2 = (m11 * rhs2 - m12 * rhs1) / det
        return np.stack([dq1, dq2, ddq1, ddq2], axis=-1)

    return drift


# -- registry -------------------------------------------------------------

def make_env(name: str, **overrides) -> EnvSpec:
    """Build one of the named benchmark systems.

    Recognized overrides: dt, noise_std, action_limit, state_weights,
    action_weights, and the physical constants listed per system below.
    """
    builders = {
        "pendulum": _make_pendulum,
        "cartpole": _make_cartpole,
        "double_pendulum": _make_double_pendulum,
    }
    if name not in builders:
        raise ConfigurationError(
            f"unknown environment {name!r}; choose from {sorted(builders)}")
    return builders[name](**overrides)


def _pop(overrides: dict, key: str, default):
    return overrides.pop(key, default)


def _finish(name, overrides, *, drift, state_dim, action_dim, x0, x_goal,
            angular, state_weights, action_limit, physics,
            action_weight=1e-3):
    dt = float(_pop(overrides, "dt", 0.05))
    noise_std = float(_pop(overrides, "noise_std", 0.01))
    limit = float(_pop(overrides, "action_limit", action_limit))
    sw = np.asarray(_pop(overrides, "state_weights", state_weights), dtype=float)
    aw = np.asarray(
        _pop(overrides, "action_weights", [action_weight] * action_dim),
        dtype=float)
    if overrides:
        raise ConfigurationError(
            f"unknown overrides for {name}: {sorted(overrides)}")
    return EnvSpec(
        name=name, state_dim=state_dim, action_dim=action_dim, drift=drift,
        dt=dt, noise_std=noise_std, x0=np.asarray(x0, dtype=float),
        x_goal=np.asarray(x_goal, dtype=float),
        action_scale=np.full(action_dim, limit),
        action_shift=np.zeros(action_dim),
        angular_coords=angular, state_weights=sw, action_weights=aw,
        defaults=physics,
    )


def _make_pendulum(**overrides) -> EnvSpec:
    mass = float(_pop(overrides, "mass", 1.0))
    length = float(_pop(overrides, "length", 1.0))
    damping = float(_pop(overrides, "damping", 0.0))
    return _finish(
        "pendulum", overrides,
        drift=_pendulum_drift(mass, length, damping),
        state_dim=2, action_dim=1,
        x0=[0.0, 0.0], x_goal=[np.pi, 0.0],
        angular=(0,), state_weights=[1.0, 0.1],
        action_limit=6.0,
        physics={"mass": mass, "length": length, "damping": damping},
    )


def _make_cartpole(**overrides) -> EnvSpec:
    cart_mass = float(_pop(overrides, "cart_mass", 1.0))
    pole_mass = float(_pop(overrides, "pole_mass", 1.0))
    length = float(_pop(overrides, "length", 1.0))
    # cost scale is kept small because this system runs at a higher
    # temperature than the others; heavier weights collapse the particle
    # weights onto a handful of lucky noise paths
    return _finish(
        "cartpole", overrides,
        drift=_cartpole_drift(cart_mass, pole_mass, length),
        state_dim=4, action_dim=1,
        x0=[0.0, 0.0, 0.0, 0.0], x_goal=[0.0, np.pi, 0.0, 0.0],
        angular=(1,), state_weights=[0.025, 0.25, 0.025, 0.025],
        action_limit=5.0, action_weight=2.5e-4,
        physics={"cart_mass": cart_mass, "pole_mass": pole_mass, "length": length},
    )


def _make_double_pendulum(**overrides) -> EnvSpec:
    m1 = float(_pop(overrides, "mass1", 1.0))
    m2 = float(_pop(overrides, "mass2", 1.0))
    l1 = float(_pop(overrides, "length1", 1.0))
    l2 = float(_pop(overrides, "length2", 1.0))
    return _finish(
        "double_pendulum", overrides,
        drift=_double_pendulum_drift(m1, m2, l1, l2),
        state_dim=4, action_dim=2,
        x0=[0.0, 0.0, 0.0, 0.0], x_goal=[np.pi, 0.0, 0.0, 0.0],
        angular=(0, 1), state_weights=[1.0, 1.0, 0.1, 0.1],
        action_limit=5.0,
        physics={"mass1": m1, "mass2": m2, "length1": l1, "length2": l2},
    )


def build_problem(env: EnvSpec, eta: float, horizon: int) -> ControlProblem:
    """Wrap an environment into the state-space model it induces."""
    return ControlProblem(
        dynamics=EulerDynamics(env),
        cost=make_cost(env),
        eta=eta,
        horizon=horizon,
        x0=env.x0,
        action_scale=env.action_scale,
        action_shift=env.action_shift,
    )
