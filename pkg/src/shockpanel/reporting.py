"""Serialization, run manifests and plot-data tables.

Every float is written with 17 significant digits so repeated runs can be
compared byte for byte.  Non-finite floats become ``null`` in JSON and
empty cells in CSV.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ReportSchemaError
from .panel import format_float

__all__ = [
    "dumps",
    "write_json",
    "read_json",
    "file_sha256",
    "config_hash",
    "RunManifest",
    "figure_rows",
    "pvalue_table",
    "write_figure_csv",
    "write_pvalue_csv",
    "validate_estimate",
]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_plain(v) for v in seq]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats and a trailing newline."""
    return _encode(_plain(obj), indent, 0) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path):
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config) -> str:
    """SHA-256 of the canonical (key-sorted, compact) JSON of ``config``."""
    text = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"), allow_nan=False,
                      default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the clock for reproducible builds
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch and epoch.strip().isdigit() else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class RunManifest:
    """Reproducibility record written next to every command's outputs."""

    command: list
    config: dict
    seed: int | None = None
    version: str = ""
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timestamp: str = field(default_factory=_timestamp)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = file_sha256(path)

    def to_dict(self) -> dict:
        return {
            "command": list(self.command),
            "config_hash": config_hash(self.config),
            "config": self.config,
            "inputs": dict(sorted(self.inputs.items())),
            "seed": self.seed,
            "tool_version": self.version,
            "timestamp": self.timestamp,
            "outputs": dict(sorted(self.outputs.items())),
        }

    def write(self, path) -> None:
        write_json(self.to_dict(), path)


_ROW_KEYS = {"tau", "regime", "estimate", "ci_lo", "ci_hi"}
_PAIR_KEYS = {"tau", "pairing", "p"}


def validate_estimate(doc) -> None:
    """Raise :class:`ReportSchemaError` unless ``doc`` looks like estimate output."""
    if not isinstance(doc, dict):
        raise ReportSchemaError("estimate document must be a JSON object")
    for key in ("variant", "outcome", "spec", "rows", "pairwise", "jointF"):
        if key not in doc:
            raise ReportSchemaError(f"estimate document lacks {key!r}")
    if not isinstance(doc["rows"], list) or not doc["rows"]:
        raise ReportSchemaError("'rows' must be a non-empty list")
    for i, r in enumerate(doc["rows"]):
        if not isinstance(r, dict) or not _ROW_KEYS <= set(r):
            raise ReportSchemaError(f"rows[{i}] needs fields {sorted(_ROW_KEYS)}")
    for i, r in enumerate(doc["pairwise"]):
        if not isinstance(r, dict) or not _PAIR_KEYS <= set(r):
            raise ReportSchemaError(f"pairwise[{i}] needs fields {sorted(_PAIR_KEYS)}")
    taus = sorted({r["tau"] for r in doc["rows"]})
    regimes = sorted({r["regime"] for r in doc["rows"]})
    if len(doc["rows"]) != len(taus) * len(regimes):
        raise ReportSchemaError("rows do not form a complete tau x regime grid")
    if doc["pairwise"]:
        pairings = {r["pairing"] for r in doc["pairwise"]}
        if len(doc["pairwise"]) != len(taus) * len(pairings):
            raise ReportSchemaError("pairwise tests do not cover every tau")
        if set(doc["jointF"]) != pairings:
            raise ReportSchemaError("jointF must hold one test per pairing")


def figure_rows(doc) -> list:
    """``(tau, regime, estimate, ci_lo, ci_hi)`` tuples sorted by regime order then tau."""
    validate_estimate(doc)
    order = {r: i for i, r in enumerate(dict.fromkeys(r["regime"] for r in doc["rows"]))}
    rows = sorted(doc["rows"], key=lambda r: (order[r["regime"]], r["tau"]))
    return [(r["tau"], r["regime"], r["estimate"], r["ci_lo"], r["ci_hi"]) for r in rows]


def pvalue_table(doc) -> tuple:
    """Header and rows of the pairing x tau p-value table, joint F last."""
    validate_estimate(doc)
    if not doc["pairwise"]:
        return None, []
    taus = sorted({r["tau"] for r in doc["pairwise"]})
    pairings = list(dict.fromkeys(r["pairing"] for r in doc["pairwise"]))
    cell = {(r["pairing"], r["tau"]): r["p"] for r in doc["pairwise"]}
    any_joint = next(iter(doc["jointF"].values()))
    lags = any_joint.get("lags", [])
    joint_name = "p_joint_lags_" + "_".join(str(t) for t in lags) if lags else "p_joint"
    header = ["pairing", *(f"p_tau_{t:+d}" for t in taus), joint_name]
    rows = [[p, *(cell[(p, t)] for t in taus), doc["jointF"][p]["p"]] for p in pairings]
    return header, rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def write_figure_csv(doc, path) -> None:
    _write_csv(path, ["tau", "regime", "estimate", "ci_lo", "ci_hi"], figure_rows(doc))


def write_pvalue_csv(doc, path) -> bool:
    """Write the p-value table; returns False (and writes nothing) for pooled runs."""
    header, rows = pvalue_table(doc)
    if header is None:
        return False
    _write_csv(path, header, rows)
    return True
