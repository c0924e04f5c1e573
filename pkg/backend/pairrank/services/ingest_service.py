import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

from pairrank.errors import InputError
from pairrank.models.comparisons import (
    ComparisonDataset,
    aggregate,
    connected_components,
    from_citation_matrix,
)
from pairrank.parsers.citation_parser import parse_citation_csv
from pairrank.parsers.match_parser import parse_match_csv
from pairrank.schemas import DatasetSummary

logger = logging.getLogger(__name__)

InputFormat = Literal["citations", "matches"]


class IngestService:
    """Turns citation matrices and match logs into canonical datasets."""

    def __init__(self, labels: Optional[Sequence[str]] = None):
        self.labels = list(labels) if labels is not None else None

    def load(self, path: Union[str, Path], fmt: InputFormat) -> ComparisonDataset:
        path = Path(path)
        if not path.is_file():
            raise InputError(f"input file {str(path)!r} not found")
        if fmt == "citations":
            if self.labels is not None:
                raise InputError("--labels applies to match logs only")
            return from_citation_matrix(parse_citation_csv(path))
        if fmt == "matches":
            records, labels = parse_match_csv(path, self.labels)
            if not records:
                raise InputError("match log holds no matches")
            return aggregate(records, len(labels), labels)
        raise InputError(f"unknown input format {fmt!r}")

    def ingest(self, path: Union[str, Path], fmt: InputFormat) -> Tuple[ComparisonDataset, DatasetSummary]:
        dataset = self.load(path, fmt)
        summary = summarize(dataset)
        logger.info(
            "ingested %s: %d players, %d pairs, %d matches, %d component(s)",
            path, summary.players, summary.pairs, summary.total_matches, summary.components,
        )
        if summary.components > 1 and fmt == "matches":
            logger.warning("comparison graph is disconnected; component sizes %s", summary.component_sizes)
        return dataset, summary


def summarize(dataset: ComparisonDataset) -> DatasetSummary:
    components = connected_components(dataset)
    return DatasetSummary(
        players=dataset.p_plus_1,
        pairs=dataset.n_pairs,
        total_matches=dataset.n,
        components=len(components),
        component_sizes=[len(c) for c in components],
    )


def load_dataset(path: Union[str, Path]) -> ComparisonDataset:
    """Reads a dataset JSON written by `ingest`."""
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"dataset file {str(path)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"dataset file is not valid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(payload, dict):
        raise InputError("dataset file must hold a JSON object")
    return ComparisonDataset.from_dict(payload)


def read_labels(path: Union[str, Path]) -> List[str]:
    """One player label per line; blank lines are skipped."""
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise InputError(f"labels file {str(path)!r} not found") from None
    labels = [line.strip() for line in lines if line.strip()]
    if len(set(labels)) != len(labels):
        raise InputError("labels file repeats a label")
    return labels
