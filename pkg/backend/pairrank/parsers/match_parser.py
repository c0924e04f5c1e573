"""
Match-log CSV reader: columns `winner,loser`, one row per match.

Entries are player labels, or integer indices when every entry is an integer
and no label list is supplied.
"""

import io
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import pandas as pd

from pairrank.errors import InputError
from pairrank.models.comparisons import MatchRecord

REQUIRED_COLUMNS = ("winner", "loser")


def parse_match_csv(
    source: Union[str, Path, io.StringIO],
    labels: Optional[Sequence[str]] = None,
) -> Tuple[List[MatchRecord], List[str]]:
    """
    Returns the match records (winner as player i, outcome 1) and the player labels.

    With `labels` given, an unknown label is an error; otherwise players are
    numbered in order of first appearance.
    """
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot parse match log: {exc}") from exc

    frame.columns = [str(c).strip().lower() for c in frame.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise InputError(f"match log is missing columns {missing}", line=1)

    winners = [str(v).strip() for v in frame["winner"]]
    losers = [str(v).strip() for v in frame["loser"]]

    if labels is None and all(_is_index(v) for v in winners + losers):
        # "010" and "10" name the same player
        winners = [str(int(v)) for v in winners]
        losers = [str(int(v)) for v in losers]
        indices = [int(v) for v in winners + losers]
        size = max(indices) + 1 if indices else 0
        known = [str(k) for k in range(size)]
    elif labels is None:
        known = []
        for v in _interleave(winners, losers):
            if v and v not in known:
                known.append(v)
    else:
        known = [str(lab) for lab in labels]

    lookup = {lab: k for k, lab in enumerate(known)}
    records = []
    for row, (w, l) in enumerate(zip(winners, losers)):
        line = row + 2
        for value in (w, l):
            if not value:
                raise InputError("empty player entry", line=line)
            if value not in lookup:
                raise InputError(f"unknown player label {value!r}", line=line, label=value)
        if w == l:
            raise InputError(f"player {w!r} cannot play itself", line=line, label=w)
        records.append(MatchRecord(lookup[w], lookup[l], 1))
    return records, known


def _is_index(value: str) -> bool:
    return value.isdigit()


def _interleave(a: Sequence[str], b: Sequence[str]):
    for x, y in zip(a, b):
        yield x
        yield y
