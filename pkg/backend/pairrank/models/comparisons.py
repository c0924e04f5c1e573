"""
Data model for paired-comparison data.

Binary match outcomes are aggregated into one binomial count per unordered
pair of players, stored once with i < j. Player 0 is the identification
anchor for the estimators downstream, so every constructor here preserves the
caller's player order.

Citation orientation: C[i][j] counts citations appearing in journal j to
papers of journal i. Each such citation is a "win" for i, the cited journal.
Reading the matrix transposed silently reverses every rating.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union, overload

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _graph_components

from pairrank.errors import InputError

logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PlayerId:
    index: int
    label: Optional[str] = None

    def __str__(self) -> str:
        return self.label if self.label is not None else str(self.index)


@dataclass(frozen=True)
class MatchRecord:
    """One binary outcome; `outcome` is 1 when i beats j."""

    i: int
    j: int
    outcome: int

    def __post_init__(self):
        if self.i == self.j:
            raise InputError(f"self-match for player {self.i}")
        if self.outcome not in (0, 1):
            raise InputError(f"outcome must be 0 or 1, got {self.outcome}")


class MatchLog(Sequence[MatchRecord]):
    """Array-backed sequence of match records, as produced by the simulator."""

    def __init__(self, i: np.ndarray, j: np.ndarray, outcome: np.ndarray):
        self.i = _frozen(np.asarray(i, dtype=np.int64))
        self.j = _frozen(np.asarray(j, dtype=np.int64))
        self.outcome = _frozen(np.asarray(outcome, dtype=np.int8))
        if not (self.i.shape == self.j.shape == self.outcome.shape):
            raise InputError("match log columns differ in length")

    def __len__(self) -> int:
        return int(self.i.shape[0])

    @overload
    def __getitem__(self, k: int) -> MatchRecord: ...

    @overload
    def __getitem__(self, k: slice) -> "MatchLog": ...

    def __getitem__(self, k):
        if isinstance(k, slice):
            return MatchLog(self.i[k], self.j[k], self.outcome[k])
        return MatchRecord(int(self.i[k]), int(self.j[k]), int(self.outcome[k]))

    def __iter__(self) -> Iterator[MatchRecord]:
        for a, b, y in zip(self.i.tolist(), self.j.tolist(), self.outcome.tolist()):
            yield MatchRecord(a, b, y)


@dataclass(frozen=True)
class ComparisonDataset:
    """
    Players plus aggregated pairwise counts.

    `i`, `j`, `n_ij`, `w_ij` are parallel arrays over observed pairs, sorted
    by (i, j) with i < j; `w_ij` counts wins of i over j.
    """

    p_plus_1: int
    i: np.ndarray
    j: np.ndarray
    n_ij: np.ndarray
    w_ij: np.ndarray
    labels: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        for name in ("i", "j", "n_ij", "w_ij"):
            object.__setattr__(self, name, _frozen(np.array(getattr(self, name), dtype=np.int64)))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(k) for k in range(self.p_plus_1)))
        else:
            object.__setattr__(self, "labels", tuple(str(lab) for lab in self.labels))
        if len(self.labels) != self.p_plus_1:
            raise InputError(f"{len(self.labels)} labels for {self.p_plus_1} players")
        if len(set(self.labels)) != len(self.labels):
            raise InputError("player labels must be unique")
        if len(self.i):
            if np.any(self.i >= self.j):
                raise InputError("pairs must be stored with i < j")
            if self.i.min() < 0 or self.j.max() >= self.p_plus_1:
                raise InputError("player index out of range")
            if np.any(self.n_ij < 1) or np.any(self.w_ij < 0) or np.any(self.w_ij > self.n_ij):
                raise InputError("counts must satisfy 0 <= w_ij <= n_ij and n_ij >= 1")
            keys = self.i * self.p_plus_1 + self.j
            if np.any(np.diff(keys) <= 0):
                raise InputError("pairs must be unique and sorted")

    @property
    def n(self) -> int:
        return int(self.n_ij.sum())

    @property
    def n_pairs(self) -> int:
        return int(self.i.shape[0])

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"unknown player label {label!r}", label=label) from None

    def reorder(self, order: Sequence[int]) -> "ComparisonDataset":
        """Relabel players so that new player k is old player order[k]."""
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(self.p_plus_1)):
            raise InputError("order must be a permutation of the players")
        inverse = np.empty_like(order)
        inverse[order] = np.arange(self.p_plus_1)
        a, b = inverse[self.i], inverse[self.j]
        swap = a > b
        wins = np.where(swap, self.n_ij - self.w_ij, self.w_ij)
        return _from_pair_arrays(
            self.p_plus_1,
            np.where(swap, b, a),
            np.where(swap, a, b),
            self.n_ij,
            wins,
            [self.labels[k] for k in order],
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p_plus_1": self.p_plus_1,
            "labels": list(self.labels),
            "pairs": [
                [int(a), int(b), int(m), int(w)]
                for a, b, m, w in zip(self.i, self.j, self.n_ij, self.w_ij)
            ],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ComparisonDataset":
        try:
            p_plus_1 = int(payload["p_plus_1"])
            pairs = np.asarray(payload.get("pairs", []), dtype=np.int64).reshape(-1, 4)
            labels = payload.get("labels") or ()
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed dataset payload: {exc}") from exc
        return _from_pair_arrays(p_plus_1, pairs[:, 0], pairs[:, 1], pairs[:, 2], pairs[:, 3], labels)


@dataclass(frozen=True)
class CitationMatrix:
    """C[i][j] = citations in journal j to papers of journal i."""

    labels: Tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise InputError(f"citation matrix must be square, got shape {counts.shape}")
        if not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
            raise InputError("citation counts must be integers")
        if np.any(counts < 0):
            r, c = np.argwhere(counts < 0)[0]
            raise InputError(f"negative citation count at ({r}, {c})")
        if len(self.labels) != counts.shape[0]:
            raise InputError(f"{len(self.labels)} labels for a {counts.shape[0]}x{counts.shape[0]} matrix")
        object.__setattr__(self, "labels", tuple(str(lab) for lab in self.labels))
        object.__setattr__(self, "counts", _frozen(counts.astype(np.int64)))


def _from_pair_arrays(
    p_plus_1: int,
    a: np.ndarray,
    b: np.ndarray,
    m: np.ndarray,
    w: np.ndarray,
    labels: Sequence[str] = (),
) -> ComparisonDataset:
    """Build a dataset from possibly unsorted, repeated (i<j) pair rows by summing."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    keys = a * p_plus_1 + b
    uniq, inv = np.unique(keys, return_inverse=True)
    n_ij = np.bincount(inv, weights=m, minlength=len(uniq)).astype(np.int64)
    w_ij = np.bincount(inv, weights=w, minlength=len(uniq)).astype(np.int64)
    keep = n_ij > 0
    uniq = uniq[keep]
    return ComparisonDataset(
        p_plus_1=p_plus_1,
        i=uniq // p_plus_1,
        j=uniq % p_plus_1,
        n_ij=n_ij[keep],
        w_ij=w_ij[keep],
        labels=tuple(labels),
    )


def aggregate(
    records: Union[MatchLog, Iterable[MatchRecord]],
    p_plus_1: int,
    labels: Sequence[str] = (),
) -> ComparisonDataset:
    """
    Aggregate binary outcomes into binomial pair counts.

    The result does not depend on the order of `records`.
    """
    if p_plus_1 < 1:
        raise InputError("p_plus_1 must be positive")
    if isinstance(records, MatchLog):
        ri, rj, y = records.i, records.j, records.outcome.astype(np.int64)
    else:
        rows = [(r.i, r.j, r.outcome) for r in records]
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
        ri, rj, y = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.any(ri == rj):
        k = int(np.flatnonzero(ri == rj)[0])
        raise InputError(f"record {k}: self-match for player {int(ri[k])}")
    bad = (ri < 0) | (rj < 0) | (ri >= p_plus_1) | (rj >= p_plus_1)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise InputError(f"record {k}: player index out of range for {p_plus_1} players")
    lo = np.minimum(ri, rj)
    hi = np.maximum(ri, rj)
    # the lower index wins when it was i and i won, or it was j and i lost
    lo_wins = np.where(ri < rj, y, 1 - y)
    return _from_pair_arrays(p_plus_1, lo, hi, np.ones_like(lo), lo_wins, labels)


def from_citation_matrix(m: CitationMatrix) -> ComparisonDataset:
    """
    Stigler model: citations to journal i appearing in journal j are wins of i over j.

    Self citations on the diagonal are ignored and pairs that never cite each
    other are omitted.
    """
    c = np.asarray(m.counts, dtype=np.int64)
    a, b = np.triu_indices(c.shape[0], k=1)
    wins = c[a, b]
    totals = wins + c[b, a]
    keep = totals > 0
    d = ComparisonDataset(
        p_plus_1=c.shape[0],
        i=a[keep],
        j=b[keep],
        n_ij=totals[keep],
        w_ij=wins[keep],
        labels=m.labels,
    )
    components = connected_components(d)
    if len(components) > 1:
        logger.warning(
            "citation graph is disconnected: %d components over %d journals",
            len(components),
            d.p_plus_1,
        )
    return d


def win_totals(d: ComparisonDataset) -> np.ndarray:
    """w_i, the total wins of each player; sums to n."""
    won = np.bincount(d.i, weights=d.w_ij, minlength=d.p_plus_1)
    won += np.bincount(d.j, weights=d.n_ij - d.w_ij, minlength=d.p_plus_1)
    return won.astype(np.int64)


def match_totals(d: ComparisonDataset) -> np.ndarray:
    """Number of matches played by each player."""
    played = np.bincount(d.i, weights=d.n_ij, minlength=d.p_plus_1)
    played += np.bincount(d.j, weights=d.n_ij, minlength=d.p_plus_1)
    return played.astype(np.int64)


def connected_components(d: ComparisonDataset) -> List[List[int]]:
    """Players grouped by the undirected comparison graph, ordered by smallest member."""
    if d.p_plus_1 == 0:
        return []
    graph = coo_matrix(
        (np.ones(d.n_pairs), (d.i, d.j)), shape=(d.p_plus_1, d.p_plus_1)
    ).tocsr()
    _, membership = _graph_components(graph, directed=False)
    groups: Dict[int, List[int]] = {}
    for player, comp in enumerate(membership.tolist()):
        groups.setdefault(comp, []).append(player)
    return sorted(groups.values(), key=lambda g: g[0])
