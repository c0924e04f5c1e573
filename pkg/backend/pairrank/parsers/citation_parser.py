"""
Citation-matrix CSV reader.

Layout: the first row is a header of journal labels, the first column holds
row labels, and cell (r, c) is the integer count C[r][c] of citations in
journal c to papers of journal r. Row and column labels must name the same
journals; columns are reordered to follow the rows.
"""

import io
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from pairrank.errors import InputError
from pairrank.models.comparisons import CitationMatrix


def parse_citation_csv(source: Union[str, Path, io.StringIO]) -> CitationMatrix:
    try:
        frame = pd.read_csv(source, index_col=0, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot parse citation matrix: {exc}") from exc

    rows = [str(r).strip() for r in frame.index]
    cols = [str(c).strip() for c in frame.columns]
    frame.index = rows
    frame.columns = cols

    for labels, where in ((rows, "row"), (cols, "column")):
        seen = set()
        for k, lab in enumerate(labels):
            if not lab:
                raise InputError(f"empty {where} label", line=k + 2 if where == "row" else 1)
            if lab in seen:
                raise InputError(f"duplicate {where} label {lab!r}", line=k + 2 if where == "row" else 1, label=lab)
            seen.add(lab)

    missing = [c for c in cols if c not in set(rows)]
    if missing:
        raise InputError(f"header label {missing[0]!r} has no matching row", line=1, label=missing[0])
    extra = [r for r in rows if r not in set(cols)]
    if extra:
        line = rows.index(extra[0]) + 2
        raise InputError(f"row label {extra[0]!r} has no matching column", line=line, label=extra[0])

    frame = frame[rows]
    counts = np.zeros((len(rows), len(rows)), dtype=np.int64)
    for r, (label, values) in enumerate(frame.iterrows()):
        for c, raw in enumerate(values.tolist()):
            text = str(raw).strip()
            try:
                value = int(text)
            except ValueError:
                raise InputError(
                    f"count {text!r} in row {label!r}, column {rows[c]!r} is not an integer",
                    line=r + 2,
                ) from None
            if value < 0:
                raise InputError(f"negative count in row {label!r}, column {rows[c]!r}", line=r + 2)
            counts[r, c] = value
    return CitationMatrix(labels=tuple(rows), counts=counts)
