"""
Count-based scores, rank construction and rank agreement.

Weighted Borda is read as the sum over opponents of the fraction of meetings
won; under a complete balanced design it is Borda divided by the common n_ij.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from pairrank.errors import InputError
from pairrank.models.comparisons import ComparisonDataset, win_totals


class Method(str, Enum):
    MLE = "MLE"
    KWPM = "KWPM"
    KWPMS = "KWPMs"
    KWPR = "KWPR"
    RMLE = "RMLE"
    B = "B"
    WB = "WB"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class RankingTable:
    method: Method
    labels: Tuple[str, ...]
    scores: np.ndarray
    ranks: np.ndarray

    @classmethod
    def from_scores(cls, method: Method, labels: Sequence[str], scores: np.ndarray) -> "RankingTable":
        scores = np.asarray(scores, dtype=float)
        if len(labels) != scores.shape[0]:
            raise InputError(f"{len(labels)} labels for {scores.shape[0]} scores")
        return cls(Method(method), tuple(labels), scores, ranks_from_scores(scores))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "method": str(self.method),
                "label": list(self.labels),
                "score": self.scores,
                "rank": self.ranks,
            }
        )


def borda(d: ComparisonDataset) -> np.ndarray:
    return win_totals(d).astype(float)


def weighted_borda(d: ComparisonDataset) -> np.ndarray:
    frac = d.w_ij / np.maximum(d.n_ij, 1)
    score = np.bincount(d.i, weights=frac, minlength=d.p_plus_1)
    score += np.bincount(d.j, weights=1.0 - frac, minlength=d.p_plus_1)
    return score


def ranks_from_scores(scores: Sequence[float], higher_is_better: bool = True) -> np.ndarray:
    """1-based ranks, 1 = best; tied scores share the average of their ranks."""
    scores = np.asarray(scores, dtype=float)
    return rankdata(-scores if higher_is_better else scores, method="average")


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> float:
    """Tie-corrected Kendall tau-b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"kendall_tau needs equal-length vectors, got {a.shape} and {b.shape}")
    if a.shape[0] < 2:
        raise InputError("kendall_tau needs at least two entries")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise InputError("kendall_tau is undefined for a constant vector")
    upper = np.triu_indices(a.shape[0], k=1)
    sa = np.sign(a[:, None] - a[None, :])[upper].astype(np.int64)
    sb = np.sign(b[:, None] - b[None, :])[upper].astype(np.int64)
    # integer counts keep identical orderings at exactly 1
    concordant_minus_discordant = int(np.dot(sa, sb))
    untied_a = int(np.count_nonzero(sa))
    untied_b = int(np.count_nonzero(sb))
    return float(concordant_minus_discordant / np.sqrt(untied_a * untied_b))


def rank_all(labels: Sequence[str], scores: Dict[Method, np.ndarray]) -> List[RankingTable]:
    return [RankingTable.from_scores(method, labels, values) for method, values in scores.items()]
