"""Deterministic seed splitting.

All randomness in the library flows from a single 64-bit root seed.  Substreams
are derived with ``numpy.random.SeedSequence`` spawn keys, so a Monte-Carlo loop
split across any number of workers produces the same per-sample draws as a
serial run: the stream for sample ``i`` depends only on ``(root_seed, path, i)``,
never on which worker happens to execute it.
"""

from __future__ import annotations

import numpy as np


def spawn_rng(root_seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream addressed by ``path`` under ``root_seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=root_seed, spawn_key=path))


def spawn_seed(root_seed: int, *path: int) -> int:
    """A 64-bit integer seed for the substream addressed by ``path``."""
    ss = np.random.SeedSequence(entropy=root_seed, spawn_key=path)
    return int(ss.generate_state(1, dtype=np.uint64)[0])
