"""
Ability laws and matching designs for the Monte Carlo comparison.

Similar-ability pairing (LS) draws the first player uniformly and the
partner uniformly among the `window` players nearest in ability rank. With
window = p every other player is eligible and LS coincides with random
pairing (RS).
"""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from pairrank.errors import InputError
from pairrank.models.comparisons import MatchLog
from pairrank.schemas import AbilityLawSpec

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-6

AbilityLaw = AbilityLawSpec


@dataclass(frozen=True)
class MatchingDesign:
    kind: Literal["RS", "LS"] = "RS"
    window: int = 5

    def __post_init__(self):
        if self.kind not in ("RS", "LS"):
            raise InputError(f"unknown matching design {self.kind!r}")
        if self.window < 1:
            raise InputError("LS window must be at least 1")


def draw_abilities(law: AbilityLaw, p_plus_1: int, rng: np.random.Generator) -> np.ndarray:
    """
    LogNormalShift: alpha = exp(scale * Z) + shift.
    DiracMixture: alpha = atom (drawn with probs) + noise_sd * Z, clamped at 1e-6.
    """
    if p_plus_1 < 1:
        raise InputError("need at least one player")
    z = rng.standard_normal(p_plus_1)
    if law.kind == "LogNormalShift":
        return np.exp(law.scale * z) + law.shift
    atoms = np.asarray(law.atoms, dtype=float)
    picks = rng.choice(atoms.size, size=p_plus_1, p=np.asarray(law.probs, dtype=float))
    alpha = atoms[picks] + law.noise_sd * z
    clamped = int(np.sum(alpha <= 0))
    if clamped:
        logger.warning("clamped %d nonpositive abilities to %g", clamped, ALPHA_FLOOR)
        alpha = np.where(alpha <= 0, ALPHA_FLOOR, alpha)
    return alpha


def neighbour_table(alpha: np.ndarray, window: int) -> np.ndarray:
    """For each player, the `window` others closest in ability rank (nearest first)."""
    size = alpha.shape[0]
    window = min(window, size - 1)
    rank = np.empty(size, dtype=np.int64)
    rank[np.argsort(alpha, kind="stable")] = np.arange(size)
    distance = np.abs(rank[:, None] - rank[None, :]).astype(float)
    np.fill_diagonal(distance, np.inf)
    # ties in distance go to the lower-ranked partner
    key = distance * size + rank[None, :]
    return np.argsort(key, axis=1, kind="stable")[:, :window]


def draw_matches(alpha: np.ndarray, design: MatchingDesign, n: int, rng: np.random.Generator) -> MatchLog:
    """n matches; i beats j with probability alpha_i / (alpha_i + alpha_j)."""
    alpha = np.asarray(alpha, dtype=float)
    size = alpha.shape[0]
    if n < 1:
        raise InputError("need at least one match")
    if size < 2:
        raise InputError("need at least two players")
    first = rng.integers(size, size=n)
    if design.kind == "RS":
        second = rng.integers(size - 1, size=n)
        second = second + (second >= first)
    else:
        table = neighbour_table(alpha, design.window)
        second = table[first, rng.integers(table.shape[1], size=n)]
    wins = rng.random(n) < alpha[first] / (alpha[first] + alpha[second])
    return MatchLog(first, second, wins.astype(np.int8))
