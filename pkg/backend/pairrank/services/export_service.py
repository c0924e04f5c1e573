import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel

from pairrank import __version__
from pairrank.errors import InputError
from pairrank.models.comparisons import ComparisonDataset
from pairrank.schemas import RunManifest

logger = logging.getLogger(__name__)

OutputFormat = Literal["csv", "json"]
MANIFEST_NAME = "manifest.json"


def file_digest(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(config: Mapping[str, Any]) -> str:
    payload = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()


class ExportService:
    """Writes tables, datasets and the run manifest into one output directory."""

    def __init__(self, out_dir: Union[str, Path], fmt: OutputFormat = "csv"):
        if fmt not in ("csv", "json"):
            raise InputError(f"unknown output format {fmt!r}")
        self.out_dir = Path(out_dir)
        self.fmt = fmt
        self.written: list = []

    def _target(self, name: str, suffix: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{name}.{suffix}"
        self.written.append(path)
        return path

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._target(name, self.fmt)
        if self.fmt == "csv":
            frame.to_csv(path, index=False, float_format="%.10g")
        else:
            frame.to_json(path, orient="records", indent=2, double_precision=10)
        logger.debug("wrote %d rows to %s", len(frame), path)
        return path

    def write_json(self, name: str, payload: Union[BaseModel, Dict[str, Any]]) -> Path:
        path = self._target(name, "json")
        if isinstance(payload, BaseModel):
            text = payload.model_dump_json(indent=2)
        else:
            text = json.dumps(payload, indent=2, sort_keys=True)
        path.write_text(text + "\n")
        return path

    def write_dataset(self, dataset: ComparisonDataset, name: str = "dataset") -> Path:
        return self.write_json(name, dataset.to_dict())

    def write_manifest(
        self,
        command: str,
        config: Mapping[str, Any],
        seed: Optional[int],
        inputs: Sequence[Union[str, Path]] = (),
        metadata: Optional[Dict[str, str]] = None,
    ) -> RunManifest:
        manifest = RunManifest(
            command=command,
            config_hash=config_hash(config),
            seed=seed,
            library_version=__version__,
            input_digests={str(p): file_digest(p) for p in inputs},
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            metadata=dict(metadata or {}),
        )
        self.write_json(MANIFEST_NAME[: -len(".json")], manifest)
        logger.info("%s: %d file(s) written to %s", command, len(self.written), self.out_dir)
        return manifest
