"""Stochastic feedback policies with exact log-densities and parameter scores.

The main policy is a small fully connected network with tanh hidden layers
producing the mean of a diagonal Gaussian, whose draw is pushed through the
invertible map u = a * tanh(s) + b so that actions live in the open box
(b - a, b + a).  Log-densities carry the exact change-of-variables
correction, and parameter gradients are computed by hand-written
reverse-mode accumulation through the network (no autodiff dependency).

A linear-Gaussian policy (u = K x + noise, no squashing) is provided for
problems that must stay jointly Gaussian, e.g. the oracle fixtures.
"""

from __future__ import annotations

import json
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError

_LOG_2PI = float(np.log(2.0 * np.pi))
_ATANH_CLIP = 1.0 - 1e-12


class ActionSample(NamedTuple):
    action: np.ndarray
    pre_squash: np.ndarray


def stable_atanh(r: np.ndarray) -> np.ndarray:
    """atanh via 0.5 * log((1+r)/(1-r)) with |r| clamped below 1.

    The clamp keeps boundary values produced by float rounding from turning
    into NaN/inf.
    """
    rc = np.clip(r, -_ATANH_CLIP, _ATANH_CLIP)
    return 0.5 * np.log((1.0 + rc) / (1.0 - rc))


def log1m_tanh2(s: np.ndarray) -> np.ndarray:
    """log(1 - tanh(s)^2) = 2*(log 2 - s - softplus(-2s)); no underflow for large |s|."""
    return 2.0 * (np.log(2.0) - s - np.logaddexp(0.0, -2.0 * s))


class TanhGaussianPolicy:
    """Gaussian MLP policy squashed, scaled, and shifted into an action box.

    Parameters are the layer weights/biases plus a state-independent vector
    of log standard deviations; all of them are learned.  The flat parameter
    layout is, in order: (W, b) per layer with W row-major, then log_std.
    """

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray],
                 log_std: np.ndarray, action_scale, action_shift,
                 angular_inputs: Sequence[int] = (),
                 input_center=None, input_scale=None) -> None:
        if len(weights) != len(biases) or not weights:
            raise ConfigurationError("need matching, nonempty weight/bias lists")
        self.weights = [np.array(W, dtype=float) for W in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != b.shape[0]:
                raise ConfigurationError("bias length must match weight rows")
        for Wa, Wb in zip(self.weights[:-1], self.weights[1:]):
            if Wb.shape[1] != Wa.shape[0]:
                raise ConfigurationError("layer shapes do not chain")
        self.log_std = np.array(log_std, dtype=float)
        if self.log_std.shape != (self.weights[-1].shape[0],):
            raise ConfigurationError("log_std length must match the output dimension")
        m = self.log_std.shape[0]
        self.action_scale = np.broadcast_to(
            np.asarray(action_scale, dtype=float), (m,)).copy()
        self.action_shift = np.broadcast_to(
            np.asarray(action_shift, dtype=float), (m,)).copy()
        if np.any(self.action_scale <= 0):
            raise ConfigurationError("action_scale must be strictly positive")
        d = self.state_dim
        self.angular_inputs = tuple(int(i) for i in angular_inputs)
        if any(i < 0 or i >= d for i in self.angular_inputs):
            raise ConfigurationError("angular input index out of range")
        self.input_center = np.zeros(d) if input_center is None \
            else np.broadcast_to(np.asarray(input_center, dtype=float), (d,)).copy()
        self.input_scale = np.ones(d) if input_scale is None \
            else np.broadcast_to(np.asarray(input_scale, dtype=float), (d,)).copy()
        if np.any(self.input_scale <= 0):
            raise ConfigurationError("input_scale must be strictly positive")

    @classmethod
    def initialize(cls, state_dim: int, action_dim: int, hidden: Sequence[int],
                   action_scale, action_shift, rng: np.random.Generator,
                   angular_inputs: Sequence[int] = (),
                   input_center=None, input_scale=None) -> "TanhGaussianPolicy":
        """Fresh policy: weights ~ N(0, 1/fan_in), zero biases, log_std = 0."""
        sizes = [state_dim, *hidden, action_dim]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, np.zeros(action_dim), action_scale,
                   action_shift, angular_inputs, input_center, input_scale)

    # -- dimensions -------------------------------------------------------

    @property
    def state_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def action_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def num_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases)) \
            + self.log_std.size

    @property
    def theta(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        parts.append(self.log_std)
        return np.concatenate(parts)

    @theta.setter
    def theta(self, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=float)
        if value.shape != (self.num_params,):
            raise ConfigurationError(
                f"expected {self.num_params} parameters, got {value.shape}")
        off = 0
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = value[off:off + W.size].reshape(W.shape)
            off += W.size
            self.biases[i] = value[off:off + b.size].copy()
            off += b.size
        self.log_std = value[off:].copy()

    # -- forward pass -----------------------------------------------------

    def _transform(self, x: np.ndarray) -> np.ndarray:
        """Feature map applied before the network.

        Angular coordinates are wrapped to within pi of their center so the
        network never sees the spin count, and every coordinate is divided by
        its scale.  The map is the identity by default.
        """
        if self.angular_inputs:
            x = np.array(x, dtype=float)
            for i in self.angular_inputs:
                c = self.input_center[i]
                x[..., i] = c + np.angle(np.exp(1j * (x[..., i] - c)))
        if np.any(self.input_scale != 1.0):
            x = x / self.input_scale
        return x

    def net_mean(self, x: np.ndarray) -> np.ndarray:
        """Mean of the pre-squash Gaussian; tanh hidden layers, linear output."""
        if x.shape[-1] != self.state_dim:
            raise ConfigurationError(
                f"input dim {x.shape[-1]} does not match policy ({self.state_dim})")
        h = self._transform(x)
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ W.T + b)
        return h @ self.weights[-1].T + self.biases[-1]

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> ActionSample:
        mean = self.net_mean(x)
        s = mean + np.exp(self.log_std) * rng.standard_normal(mean.shape)
        u = self.action_scale * np.tanh(s) + self.action_shift
        return ActionSample(u, s)

    def sample_action(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.sample(x, rng).action

    def recover_pre_squash(self, u: np.ndarray) -> np.ndarray:
        """Best-effort inverse of the squash for externally built actions."""
        return stable_atanh((u - self.action_shift) / self.action_scale)

    def logpdf(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Exact action log-density; -inf for actions on or outside the box."""
        r = (u - self.action_shift) / self.action_scale
        inside = np.all(np.abs(r) < 1.0, axis=-1)
        s = stable_atanh(r)
        mean = self.net_mean(x)
        var = np.exp(2.0 * self.log_std)
        gauss = -0.5 * np.sum((s - mean) ** 2 / var, axis=-1) \
            - np.sum(self.log_std) - 0.5 * self.action_dim * _LOG_2PI
        correction = np.sum(np.log(self.action_scale)) + np.sum(log1m_tanh2(s), axis=-1)
        return np.where(inside, gauss - correction, -np.inf)

    # -- reverse-mode gradients ------------------------------------------

    def score(self, x: np.ndarray, u: np.ndarray,
              pre_squash: np.ndarray | None = None) -> np.ndarray:
        """Gradient of sum_rows logpdf(x, u) in the flat parameter vector.

        The squashing correction does not depend on the parameters given u,
        so only the Gaussian factor contributes: its mean through the network
        weights, its spread through log_std.  When the original pre-squash
        draws are available, pass them: inverting saturated actions through
        atanh clamps at ~14.1 and the resulting bogus residuals destabilize
        training.
        """
        x = np.atleast_2d(x)
        u = np.atleast_2d(u)
        if pre_squash is None:
            s = stable_atanh((u - self.action_shift) / self.action_scale)
        else:
            s = np.atleast_2d(pre_squash)

        # forward with cached activations
        hs = [self._transform(x)]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            hs.append(np.tanh(hs[-1] @ W.T + b))
        mean = hs[-1] @ self.weights[-1].T + self.biases[-1]

        var = np.exp(2.0 * self.log_std)
        diff = s - mean
        d_mean = diff / var                              # (B, m)
        g_log_std = np.sum(diff * diff / var - 1.0, axis=0)

        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = d_mean
        for k in range(len(self.weights) - 1, -1, -1):
            grads_w[k] = delta.T @ hs[k]
            grads_b[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k]) * (1.0 - hs[k] ** 2)

        parts = []
        for gW, gb in zip(grads_w, grads_b):
            parts.append(gW.ravel())
            parts.append(gb)
        parts.append(g_log_std)
        return np.concatenate(parts)

    def grad_logpdf(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Parameter gradient of a single-point log-density."""
        return self.score(np.atleast_2d(x), np.atleast_2d(u))

    # -- serialization ----------------------------------------------------

    _MAGIC = b"SCPOLICY1\n"

    def save(self, path) -> None:
        """Write the policy: magic line, JSON header line, then the flat
        parameter vector as little-endian float64."""
        header = {
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "layer_shapes": [list(W.shape) for W in self.weights],
            "action_scale": self.action_scale.tolist(),
            "action_shift": self.action_shift.tolist(),
            "angular_inputs": list(self.angular_inputs),
            "input_center": self.input_center.tolist(),
            "input_scale": self.input_scale.tolist(),
            "dtype": "<f8",
        }
        with open(path, "wb") as fh:
            fh.write(self._MAGIC)
            fh.write(json.dumps(header).encode("utf-8") + b"\n")
            fh.write(self.theta.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "TanhGaussianPolicy":
        with open(path, "rb") as fh:
            if fh.read(len(cls._MAGIC)) != cls._MAGIC:
                raise ConfigurationError(f"{path}: not a policy checkpoint")
            header = json.loads(fh.readline().decode("utf-8"))
            flat = np.frombuffer(fh.read(), dtype="<f8").astype(float)
        weights = [np.zeros(tuple(shape)) for shape in header["layer_shapes"]]
        biases = [np.zeros(W.shape[0]) for W in weights]
        policy = cls(weights, biases, np.zeros(header["action_dim"]),
                     header["action_scale"], header["action_shift"],
                     header.get("angular_inputs", ()),
                     header.get("input_center"), header.get("input_scale"))
        policy.theta = flat
        return policy


class LinearGaussianPolicy:
    """u = K x + bias + noise with fixed diagonal noise; parameters are vec(K).

    Unbounded support keeps problems using it jointly Gaussian, which the
    oracle machinery relies on.
    """

    def __init__(self, K, std, bias=None) -> None:
        self.K = np.atleast_2d(np.asarray(K, dtype=float))
        m, d = self.K.shape
        self.std = np.broadcast_to(np.asarray(std, dtype=float), (m,)).copy()
        if np.any(self.std <= 0):
            raise ConfigurationError("policy noise std must be strictly positive")
        self.bias = np.zeros(m) if bias is None else np.asarray(bias, dtype=float)
        self._log_norm = float(-np.sum(np.log(self.std)) - 0.5 * m * _LOG_2PI)

    @property
    def state_dim(self) -> int:
        return self.K.shape[1]

    @property
    def action_dim(self) -> int:
        return self.K.shape[0]

    @property
    def num_params(self) -> int:
        return self.K.size

    @property
    def theta(self) -> np.ndarray:
        return self.K.ravel().copy()

    @theta.setter
    def theta(self, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=float)
        if value.shape != (self.K.size,):
            raise ConfigurationError(f"expected {self.K.size} parameters")
        self.K = value.reshape(self.K.shape)

    def net_mean(self, x: np.ndarray) -> np.ndarray:
        return x @ self.K.T + self.bias

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> ActionSample:
        mean = self.net_mean(x)
        u = mean + self.std * rng.standard_normal(mean.shape)
        return ActionSample(u, u)

    def sample_action(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.sample(x, rng).action

    def recover_pre_squash(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float)

    def logpdf(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        z = (u - self.net_mean(x)) / self.std
        return -0.5 * (z * z).sum(axis=-1) + self._log_norm

    def score(self, x: np.ndarray, u: np.ndarray,
              pre_squash: np.ndarray | None = None) -> np.ndarray:
        # no squashing, so pre_squash (if given) equals u and is ignored
        x = np.atleast_2d(x)
        u = np.atleast_2d(u)
        resid = (u - self.net_mean(x)) / self.std**2      # (B, m)
        return (resid.T @ x).ravel()

    def grad_logpdf(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.score(np.atleast_2d(x), np.atleast_2d(u))
