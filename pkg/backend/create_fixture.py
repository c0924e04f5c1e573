"""
Script to write a synthetic journal citation matrix.
Run: python create_fixture.py <output.csv> [n_journals] [seed]

Journal 0 is dominant: it wins most of its citation exchanges, so it stays
on top along the whole grouped lasso path.
"""
import sys

import numpy as np
import pandas as pd

from pairrank.models.comparisons import CitationMatrix


def make_citation_matrix(n_journals: int = 86, seed: int = 7, density: float = 0.6, mean_exchange: float = 40.0) -> CitationMatrix:
    """Citation counts drawn from a Bradley-Terry model over random journal influences."""
    rng = np.random.default_rng(seed)
    theta = np.sort(rng.normal(0.0, 0.8, n_journals))[::-1].copy()
    theta[0] = theta[1] + 2.5
    counts = np.zeros((n_journals, n_journals), dtype=np.int64)
    for i in range(n_journals):
        for j in range(i + 1, n_journals):
            # keep a chain so the citation graph is connected
            if j != i + 1 and rng.random() > density:
                continue
            total = 1 + rng.poisson(mean_exchange)
            wins = rng.binomial(total, 1.0 / (1.0 + np.exp(theta[j] - theta[i])))
            counts[i, j] = wins
            counts[j, i] = total - wins
        counts[i, i] = rng.poisson(mean_exchange)
    labels = tuple(f"J{k:02d}" for k in range(n_journals))
    return CitationMatrix(labels=labels, counts=counts)


def write_citation_csv(matrix: CitationMatrix, path: str) -> None:
    frame = pd.DataFrame(matrix.counts, index=list(matrix.labels), columns=list(matrix.labels))
    frame.index.name = "journal"
    frame.to_csv(path)


if __name__ == "__main__":
    if len(sys.argv) not in (2, 3, 4):
        print("Usage: python create_fixture.py <output.csv> [n_journals] [seed]")
        sys.exit(1)

    size = int(sys.argv[2]) if len(sys.argv) > 2 else 86
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 7
    write_citation_csv(make_citation_matrix(size, seed), sys.argv[1])
    print(f"Citation matrix for {size} journals written to {sys.argv[1]}")
