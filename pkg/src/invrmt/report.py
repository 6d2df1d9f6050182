"""Deterministic CSV/JSON writers that record what they wrote."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def jsonable(obj):
    """Plain JSON types; NaN and infinities become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if hasattr(obj, "isoformat"):
        return obj.isoformat()
    return obj


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return repr(x) if math.isfinite(x) else ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    return str(jsonable(x))


class OutputDir:
    """Writes files under ``root`` and keeps their content hashes for the manifest."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def path(self, rel) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def record(self, rel):
        self.files[str(rel)] = sha256_file(self.root / rel)

    def json(self, rel, obj):
        with open(self.path(rel), "w") as fh:
            json.dump(jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.record(rel)

    def csv(self, rel, rows: list[dict], columns: list[str] | None = None):
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
        with open(self.path(rel), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_cell(row.get(c)) for c in columns])
        self.record(rel)

    def column(self, rel, name, values):
        self.csv(rel, [{name: v} for v in values], [name])

    def external(self, rel):
        """Register a file written by other code."""
        self.record(rel)

    def manifest(self, extra: dict) -> dict:
        entries = [{"path": k, "sha256": v} for k, v in sorted(self.files.items())]
        body = dict(extra, files=entries)
        with open(self.root / "manifest.json", "w") as fh:
            json.dump(jsonable(body), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return body


def relpath(path, start) -> str:
    return os.path.relpath(path, start)
