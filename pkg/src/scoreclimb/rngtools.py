"""Deterministic random-stream management.

All stochastic routines in this package take an explicit
``numpy.random.Generator``.  Substreams are derived from a master seed with
``SeedSequence`` spawn keys on top of the counter-based Philox bit generator,
so a (seed, path) pair always yields the same stream no matter how many other
streams were created before it.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream identified by ``path`` under ``seed``.

    Streams with distinct paths are statistically independent, and the mapping
    (seed, path) -> stream is stable across processes and worker counts.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def child_generators(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Split ``count`` independent generators off ``rng``.

    The children depend only on the state of ``rng`` at call time, so work
    distributed over them is reproducible regardless of execution order.
    """
    seeds = rng.integers(0, 2**63 - 1, size=count)
    return [np.random.Generator(np.random.Philox(int(s))) for s in seeds]
