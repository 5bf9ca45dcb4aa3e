"""Learning-curve figures rendered from the CSV artifacts."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigurationError
from .training import CURVE_COLUMNS


def read_curve_csv(path) -> dict[str, np.ndarray]:
    """Load one learning-curve CSV, validating the column schema."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CURVE_COLUMNS):
            raise ConfigurationError(
                f"{path}: expected columns {','.join(CURVE_COLUMNS)}, "
                f"got {header}")
        rows = [[float(cell) for cell in row] for row in reader]
    data = np.asarray(rows, dtype=float).reshape(-1, len(CURVE_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(CURVE_COLUMNS)}


def render_curves(csv_paths, output_path, x_axis: str = "iteration",
                  title: str | None = None) -> Path:
    """Plot mean total cost with a one-standard-deviation band per curve."""
    if x_axis not in ("iteration", "interactions"):
        raise ConfigurationError(
            f"x_axis must be 'iteration' or 'interactions', got {x_axis!r}")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path in csv_paths:
        curve = read_curve_csv(path)
        x = curve[x_axis]
        mean, std = curve["mean_cost"], curve["std_cost"]
        label = Path(path).stem
        ax.plot(x, mean, label=label)
        ax.fill_between(x, mean - std, mean + std, alpha=0.25)
    ax.set_xlabel(x_axis)
    ax.set_ylabel("total cost")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    output_path = Path(output_path)
    fig.savefig(output_path, dpi=150)
    plt.close(fig)
    return output_path
