from pathlib import Path

import numpy as np
import pytest

from pairrank.estimators.btmle import unbounded_players
from pairrank.models.comparisons import ComparisonDataset

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def round_robin(theta, n_per_pair, rng) -> ComparisonDataset:
    """Every pair meets n_per_pair times; outcomes drawn from the logistic model."""
    theta = np.asarray(theta, dtype=float)
    a, b = np.triu_indices(theta.shape[0], k=1)
    n_ij = np.broadcast_to(np.asarray(n_per_pair), a.shape).astype(np.int64)
    w_ij = rng.binomial(n_ij, 1.0 / (1.0 + np.exp(theta[b] - theta[a])))
    return ComparisonDataset(theta.shape[0], a, b, n_ij, w_ij)


def identifiable_round_robin(theta, n_per_pair, rng, attempts: int = 50) -> ComparisonDataset:
    for _ in range(attempts):
        d = round_robin(theta, n_per_pair, rng)
        if len(unbounded_players(d)) == 0:
            return d
    raise RuntimeError("could not draw an identifiable dataset")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def three_players() -> ComparisonDataset:
    # 0 vs 1: 6-4, 0 vs 2: 7-3, 1 vs 2: 5-5
    return ComparisonDataset(3, [0, 0, 1], [1, 2, 2], [10, 10, 10], [6, 7, 5], ("a", "b", "c"))


@pytest.fixture
def dominant_dataset(rng) -> ComparisonDataset:
    theta = np.concatenate([[3.0], np.linspace(1.0, -1.0, 7)])
    return identifiable_round_robin(theta, 30, rng)
