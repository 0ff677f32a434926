"""Result persistence: run manifests, CSV tables, JSON mirrors, feature blocks.

Float cells are written with ``repr``, the shortest representation that
round-trips exactly, so a given record always serializes to the same
bytes and re-reading a file reproduces the in-memory values bit for bit.
The manifest is always written before any result file.
"""

import csv
import io
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import ConfigError
from .scheduling import FeatureBlock

__all__ = [
    "RunManifest",
    "write_manifest",
    "record_to_csv_text",
    "record_to_json_text",
    "write_results",
    "read_csv_rows",
    "export_feature_block",
    "import_feature_block",
    "default_output_dir",
]

OUTPUT_DIR_ENV = "SVDMIMO_OUT"


def default_output_dir():
    """Output directory: ``$SVDMIMO_OUT`` or ``./svdmimo-out``."""
    return os.environ.get(OUTPUT_DIR_ENV, os.path.join(os.getcwd(), "svdmimo-out"))


def _format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


@dataclass
class RunManifest:
    """Everything needed to reproduce a run bit for bit."""

    command: str
    seed: int
    config: dict
    convention: str
    averaging: str
    outputs: list = field(default_factory=list)
    version: str = __version__
    created_utc: str = ""

    def to_json(self):
        payload = {
            "command": self.command,
            "seed": self.seed,
            "config": _jsonable(self.config),
            "convention": self.convention,
            "averaging": self.averaging,
            "outputs": list(self.outputs),
            "version": self.version,
            "created_utc": self.created_utc,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_manifest(manifest, out_dir):
    """Write ``manifest.json``; must happen before any result file."""
    os.makedirs(out_dir, exist_ok=True)
    if not manifest.created_utc:
        manifest.created_utc = datetime.now(timezone.utc).isoformat()
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
    return path


def _fieldnames(rows):
    names = []
    for row in rows:
        for key in row:
            if key not in names:
                names.append(key)
    return names


def record_to_csv_text(record):
    """Render a MetricsRecord's rows as CSV (deterministic bytes)."""
    buf = io.StringIO()
    names = _fieldnames(record.rows)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in record.rows:
        writer.writerow([_format_cell(row[k]) if k in row else "" for k in names])
    return buf.getvalue()


def record_to_json_text(record):
    """Render a MetricsRecord (rows + meta) as JSON (deterministic bytes)."""
    payload = {
        "kind": record.kind,
        "meta": _jsonable(record.meta),
        "rows": [_jsonable(row) for row in record.rows],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_results(record, out_dir, base_name, fmt="both"):
    """Write a record as CSV and/or JSON; returns the written paths."""
    if fmt not in ("csv", "json", "both"):
        raise ConfigError(f"format must be csv, json or both, got {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if fmt in ("csv", "both"):
        path = os.path.join(out_dir, base_name + ".csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(record_to_csv_text(record))
        paths.append(path)
    if fmt in ("json", "both"):
        path = os.path.join(out_dir, base_name + ".json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(record_to_json_text(record))
        paths.append(path)
    return paths


def read_csv_rows(path):
    """Read a result CSV back into a list of dicts (numbers parsed)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for key, value in raw.items():
                if value is None or value == "":
                    continue
                try:
                    num = float(value)
                except ValueError:
                    row[key] = value
                    continue
                row[key] = int(num) if num.is_integer() and "." not in value else num
            rows.append(row)
    return rows


def export_feature_block(block, path):
    """Write a feature block as CSV: feature_index, importance, d_1..d_D."""
    d = block.dim
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature_index", "importance"] + [f"d_{i + 1}" for i in range(d)])
        for idx in range(block.count):
            writer.writerow(
                [str(idx), repr(float(block.importance[idx]))]
                + [repr(float(v)) for v in block.features[idx]]
            )
    return path


def import_feature_block(path):
    """Read a feature block written by :func:`export_feature_block`."""
    importance = []
    features = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["feature_index", "importance"]:
            raise ConfigError(f"{path} is not a feature block CSV")
        for row in reader:
            importance.append(float(row[1]))
            features.append([float(v) for v in row[2:]])
    if not features:
        raise ConfigError(f"{path} contains no features")
    return FeatureBlock(features=np.array(features), importance=np.array(importance))
