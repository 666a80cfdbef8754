"""Shared fixtures.

The training sweeps and the Haar-block scan grid are expensive, and several
test modules assert different properties of the same runs, so they are
computed once per session here.
"""

from __future__ import annotations

import numpy as np
import pytest

from plateaulab import autoencoder as ae
from plateaulab import plateau as pl

SCAN_SAMPLES = 5_000
SCAN_SEED = 20_240_817
SEPARATION_SEEDS = list(range(9))
SEPARATION_BUDGET = 9_000


def scan_grid():
    """The bound-check grid: m=2, n in {4,6,8}, L in {1,2,3}, every l, both families."""
    for n in (4, 6, 8):
        for layers in (1, 2, 3):
            for l in range(1, layers + 1):
                for family in ("global", "local"):
                    yield pl.ScanConfig(
                        n=n,
                        m=2,
                        layers=layers,
                        cost_family=family,
                        samples=SCAN_SAMPLES,
                        seed=SCAN_SEED + n * 100 + layers * 10 + l,
                        target_layer=l,
                    )


@pytest.fixture(scope="session")
def sandwich_reports():
    return [pl.estimate_grad_stats(cfg) for cfg in scan_grid()]


@pytest.fixture(scope="session")
def separation_traces():
    """9-seed local/global training pairs at n_b=14 under one evaluation budget."""
    instance = ae.build_instance(1, 14, 2)
    traces = {"local": [], "global": []}
    for kind in ("local", "global"):
        for seed in SEPARATION_SEEDS:
            cfg = ae.TrainConfig(
                cost_kind=kind,
                seed=seed,
                max_iterations=10_000,
                max_cost_evals=SEPARATION_BUDGET,
                inner_evals=60,
            )
            traces[kind].append(ae.train(instance, cfg))
    return instance, traces


@pytest.fixture(scope="session")
def sweep10_traces():
    """9-seed local training at the n_b=10 reference size."""
    instance = ae.build_instance(1, 10, 2)
    traces = []
    for seed in SEPARATION_SEEDS:
        cfg = ae.TrainConfig(
            cost_kind="local", seed=seed, max_iterations=300, inner_evals=60, target_cost=0.02
        )
        traces.append(ae.train(instance, cfg))
    return instance, traces


@pytest.fixture(scope="session")
def train100_trace():
    """One light-cone local training run at n_b=100."""
    instance = ae.build_instance(1, 100, 2)
    cfg = ae.TrainConfig(
        cost_kind="local", seed=0, max_iterations=400, inner_evals=60, target_cost=0.08
    )
    return instance, ae.train(instance, cfg)


def median_final(traces) -> float:
    return float(np.median([t.final_exact() for t in traces]))
