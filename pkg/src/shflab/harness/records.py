"""Experiment records, content hashes and atomic flat-file persistence."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Table", "ExperimentRecord", "canonical_json", "content_hash", "write_atomic", "persist"]


def _plain(value):
    """JSON-safe copy: numpy scalars and arrays become Python values, non-finite floats strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    return value


def canonical_json(obj) -> str:
    """Sorted keys, no whitespace, shortest round-trip floats."""
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_hash(obj) -> str:
    """Git-style object hash (``blob <len>\\0`` header) of the canonical JSON, with SHA-256."""
    body = canonical_json(obj).encode("utf-8")
    return hashlib.sha256(b"blob %d\0" % len(body) + body).hexdigest()


@dataclass
class Table:
    """A rectangular result table written as CSV."""

    header: list
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


@dataclass
class ExperimentRecord:
    """Everything needed to reproduce and audit one run.

    ``input_hash`` covers the config snapshot (experiment, seed, tolerance and
    every parameter with defaults filled in), so it changes exactly when the
    content changes.  ``wall_time`` is kept out of the persisted record body.
    """

    id: str
    config: dict
    seed: int
    input_hash: str
    outputs: dict
    wall_time: float = 0.0
    tables: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def body(self) -> dict:
        return {
            "id": self.id,
            "config": self.config,
            "seed": self.seed,
            "input_hash": self.input_hash,
            "outputs": self.outputs,
            "tables": sorted(self.tables),
            "warnings": list(self.warnings),
        }


def write_atomic(path: Path, text: str) -> None:
    """Write through a temporary file in the target directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def persist(record: ExperimentRecord, out_dir: str | Path) -> dict:
    """Write ``<id>.json``, ``<id>.<table>.csv`` and ``<id>.timing.json``.

    The record and the tables are deterministic functions of the
    configuration; timing lives in its own file.  Returns the written paths.
    """
    out = Path(out_dir)
    paths = {}
    for name, table in sorted(record.tables.items()):
        p = out / f"{record.id}.{name}.csv"
        write_atomic(p, table.to_csv())
        paths[name] = p
    p = out / f"{record.id}.json"
    write_atomic(p, json.dumps(_plain(record.body()), sort_keys=True, indent=2, ensure_ascii=False) + "\n")
    paths["record"] = p
    p = out / f"{record.id}.timing.json"
    write_atomic(p, json.dumps({"id": record.id, "wall_time": record.wall_time}) + "\n")
    paths["timing"] = p
    return paths
