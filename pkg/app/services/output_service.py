# app/services/output_service.py

"""
Result files: atomic CSV/JSON writes and the run manifest.

Every file is written to a temporary sibling and moved into place with
os.replace, so an interrupted run never leaves a truncated file.
"""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping

from pydantic import BaseModel, Field

from app import __version__

logger = logging.getLogger(__name__)


class RunManifest(BaseModel):
    """Everything needed to reproduce a run."""
    command: str = Field(..., description="Subcommand that produced the outputs")
    config: Dict[str, Any] = Field(default_factory=dict, description="Resolved configuration snapshot")
    seed: int = Field(..., ge=0, description="Master seed")
    source: str = Field(..., description="Input data descriptor")
    out_dir: str
    version: str = __version__


def atomic_write_text(path: Path, text: str) -> Path:
    """Write text to path via a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug(f"Wrote {path}")
    return path


def write_csv(path: Path, columns: List[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({column: "" if row.get(column) is None else row.get(column) for column in columns})
    return atomic_write_text(path, buffer.getvalue())


def write_json(path: Path, payload: Any) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    """Write manifest.json; called before any other output of the run."""
    return write_json(Path(out_dir) / "manifest.json", manifest.model_dump())
