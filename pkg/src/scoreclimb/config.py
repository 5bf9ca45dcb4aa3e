"""Run configuration: flat key = value files with sections, strict parsing.

Grammar: UTF-8 text, ``#`` starts a comment, ``[section]`` headers, and
``key = value`` lines.  Unknown sections or keys are fatal, with the
offending line reported, because silent hyperparameter typos corrupt
experiments.  Flag overrides win over file values.

Environment presets carry the reference hyperparameters for the three
benchmark systems (temperature, learning rate, particle counts, layer
sizes); anything can be overridden per key.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .training import TrainConfig

log = logging.getLogger(__name__)

_ENV_PHYSICS_KEYS = (
    "mass", "length", "damping", "cart_mass", "pole_mass",
    "mass1", "mass2", "length1", "length2",
)


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() == "none" else float(text)


def _optional_float_pair(text: str) -> tuple[float, float] | None:
    if text.strip().lower() == "none":
        return None
    parts = _float_list(text)
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated floats, got {text!r}")
    return (parts[0], parts[1])


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA: dict[str, dict[str, type | object]] = {
    "run": {
        "output_dir": str,
        "seed": int,
        "workers": int,
    },
    "environment": {
        "name": str,
        "dt": float,
        "noise_std": float,
        "action_limit": float,
        "state_weights": _float_list,
        "action_weights": _float_list,
        **{key: float for key in _ENV_PHYSICS_KEYS},
    },
    "training": {
        "iterations": int,
        "step_size": float,
        "schedule": str,
        "decay_exponent": float,
        "particles": int,
        "backward_samples": int,
        "eta": float,
        "horizon": int,
        "eval_rollouts": int,
        "eval_every": int,
        "estimator": str,
        "score_clip": _optional_float,
        "log_std_bounds": _optional_float_pair,
    },
    "policy": {
        "hidden_layers": _int_list,
    },
}

# Reference per-system hyperparameters plus shared simulation settings.
PRESETS: dict[str, dict[str, float | int]] = {
    "pendulum": {"eta": 5e-2, "step_size": 1e-2, "particles": 256,
                 "backward_samples": 30},
    "cartpole": {"eta": 1e-1, "step_size": 1e-3, "particles": 256,
                 "backward_samples": 30},
    "double_pendulum": {"eta": 5e-3, "step_size": 5e-4, "particles": 512,
                        "backward_samples": 30},
}


def read_config_file(path) -> dict[str, dict[str, str]]:
    """Parse a config file into {section: {key: value}}; strict."""
    values: dict[str, dict[str, str]] = {}
    section = None
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigurationError(
                    f"{path}:{lineno}: unknown section [{section}]")
            values.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigurationError(
                f"{path}:{lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in SCHEMA[section]:
            raise ConfigurationError(
                f"{path}:{lineno}: unknown key {key!r} in section [{section}]")
        if key in values[section]:
            raise ConfigurationError(
                f"{path}:{lineno}: duplicate key {key!r} in section [{section}]")
        values[section][key] = value.strip()
    return values


def _coerce(section: str, key: str, value: str):
    conv = SCHEMA[section][key]
    try:
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(
            f"bad value for {section}.{key}: {value!r} ({exc})") from exc


@dataclass
class RunConfig:
    """Resolved configuration for one CLI invocation."""

    train: TrainConfig
    output_dir: Path = Path(".")
    seed: int | None = None
    workers: int = 1
    extras: dict = field(default_factory=dict)


def resolve_config(file_path=None,
                   flag_overrides: dict[str, str] | None = None) -> RunConfig:
    """Merge preset defaults, file values, and flag overrides (flags win).

    ``flag_overrides`` maps dotted keys like ``training.eta`` to raw string
    values; they pass through the same schema as file entries.
    """
    values: dict[str, dict[str, str]] = {s: {} for s in SCHEMA}
    if file_path is not None:
        for section, entries in read_config_file(file_path).items():
            values[section].update(entries)
    for dotted, raw in (flag_overrides or {}).items():
        if "." not in dotted:
            raise ConfigurationError(
                f"override {dotted!r} must look like section.key")
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown override key {dotted!r}")
        if key in values[section] and values[section][key] != raw:
            log.info("flag override %s=%s supersedes file value %s",
                     dotted, raw, values[section][key])
        values[section][key] = raw

    parsed = {
        section: {key: _coerce(section, key, val)
                  for key, val in entries.items()}
        for section, entries in values.items()
    }

    env_name = parsed["environment"].pop("name", "pendulum")
    preset = PRESETS.get(env_name, {})
    training = dict(preset)
    training.update(parsed["training"])

    cfg = TrainConfig(
        env=env_name,
        iterations=int(training.get("iterations", 100)),
        step_base=float(training.get("step_size", 1e-2)),
        schedule=str(training.get("schedule", "constant")),
        decay_exponent=float(training.get("decay_exponent", 0.7)),
        particles=int(training.get("particles", 256)),
        backward_samples=int(training.get("backward_samples", 30)),
        eta=float(training.get("eta", 5e-2)),
        horizon=int(training.get("horizon", 100)),
        seed=int(parsed["run"].get("seed", 0)),
        hidden_layers=tuple(parsed["policy"].get("hidden_layers", (256, 256))),
        eval_rollouts=int(training.get("eval_rollouts", 30)),
        eval_every=int(training.get("eval_every", 1)),
        workers=int(parsed["run"].get("workers", 1)),
        estimator=str(training.get("estimator", "rb-csmc")),
        score_clip=training.get("score_clip", 100.0),
        log_std_bounds=training.get("log_std_bounds", (-2.5, 0.0)),
        env_overrides=parsed["environment"],
    )
    return RunConfig(
        train=cfg,
        output_dir=Path(parsed["run"].get("output_dir", ".")),
        seed=parsed["run"].get("seed"),
        workers=cfg.workers,
    )
