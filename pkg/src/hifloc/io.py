"""On-disk formats.

Trajectory CSV: header ``t,i,v`` then one row per sample. Floats are written
with ``repr`` so every value round-trips exactly. Labels and provenance live
in ``manifest.jsonl`` next to the ``trajectories/`` directory, one JSON object
per line with sorted keys: ``eta``, ``file``, ``label``, ``scenario``, ``seed``.

Feature CSV: header ``label,f1,...,fd``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import MissingLabel, SchemaError
from .sim import Trajectory

TRAJECTORY_HEADER = "t,i,v"
MANIFEST_NAME = "manifest.jsonl"
TRAJECTORY_DIR = "trajectories"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    lines = [TRAJECTORY_HEADER]
    for t, i, v in zip(traj.t.tolist(), traj.i.tolist(), traj.v.tolist()):
        lines.append(f"{_fmt(t)},{_fmt(i)},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path, label=None, meta=None) -> Trajectory:
    """Parse a trajectory CSV; problems are reported with line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc})") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRAJECTORY_HEADER:
        raise SchemaError(f"{path}:1: header must be '{TRAJECTORY_HEADER}'")
    cols = TRAJECTORY_HEADER.split(",")
    data = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 3:
            raise SchemaError(f"{path}:{lineno}: expected 3 columns, found {len(cells)}")
        row = []
        for name, cell in zip(cols, cells):
            try:
                value = float(cell)
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: column '{name}' is not numeric: {cell!r}") from None
            if not math.isfinite(value):
                raise SchemaError(f"{path}:{lineno}: column '{name}' is not finite: {cell!r}")
            row.append(value)
        data.append(row)
    arr = np.asarray(data, dtype=float).reshape(-1, 3)
    return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], label, dict(meta or {}))


def manifest_entry(traj: Trajectory, file: str) -> dict:
    return {
        "eta": float(traj.meta.get("eta", 0.0)),
        "file": file,
        "label": None if traj.label is None else int(traj.label),
        "scenario": traj.meta.get("scenario"),
        "seed": traj.meta.get("seed"),
    }


def write_dataset(trajectories, out_dir) -> Path:
    """Write ``trajectories/*.csv`` and ``manifest.jsonl`` under ``out_dir``."""
    out_dir = Path(out_dir)
    tdir = out_dir / TRAJECTORY_DIR
    tdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, traj in enumerate(trajectories):
        name = f"{TRAJECTORY_DIR}/traj_{k:05d}_L{traj.label}.csv"
        write_trajectory_csv(traj, out_dir / name)
        entries.append(json.dumps(manifest_entry(traj, name), sort_keys=True))
    manifest = out_dir / MANIFEST_NAME
    manifest.write_text("\n".join(entries) + "\n")
    return manifest


def read_manifest(path) -> list:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read manifest ({exc})") from exc
    entries = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(entry, dict) or "file" not in entry:
            raise SchemaError(f"{path}:{lineno}: manifest entry needs a 'file' field")
        if entry.get("label") is None:
            raise MissingLabel(f"{path}:{lineno}: manifest entry for {entry['file']} has no label")
        entries.append(entry)
    return entries


def read_dataset(data_dir, manifest=None) -> list:
    """Load every trajectory named in the manifest, joined with its label.

    Raises ``MissingLabel`` when a manifest entry has no CSV, or a CSV under
    ``trajectories/`` has no manifest entry.
    """
    data_dir = Path(data_dir)
    manifest = Path(manifest) if manifest is not None else data_dir / MANIFEST_NAME
    entries = read_manifest(manifest)
    base = manifest.parent
    named = set()
    out = []
    for entry in entries:
        path = base / entry["file"]
        if not path.is_file():
            raise MissingLabel(f"manifest entry {entry['file']} has no CSV file")
        named.add(path.resolve())
        meta = {k: entry[k] for k in ("eta", "scenario", "seed") if k in entry}
        meta["file"] = entry["file"]
        out.append(read_trajectory_csv(path, int(entry["label"]), meta))
    tdir = base / TRAJECTORY_DIR
    if tdir.is_dir():
        orphans = sorted(p.name for p in tdir.glob("*.csv") if p.resolve() not in named)
        if orphans:
            raise MissingLabel(f"CSV files without a manifest entry: {orphans}")
    return out


def write_features_csv(labels, X, path) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    lines = ["label," + ",".join(f"f{k + 1}" for k in range(d))]
    for lab, row in zip(labels, X.tolist()):
        lines.append(f"{int(lab)}," + ",".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_features_csv(path):
    """Return ``(labels, X)`` from a feature CSV."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc})") from exc
    if not lines:
        raise SchemaError(f"{path}: empty feature file")
    header = lines[0].split(",")
    d = len(header) - 1
    if header[0] != "label" or d < 1 or header[1:] != [f"f{k + 1}" for k in range(d)]:
        raise SchemaError(f"{path}:1: header must be 'label,f1,...,fd'")
    labels, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != d + 1:
            raise SchemaError(f"{path}:{lineno}: expected {d + 1} columns, found {len(cells)}")
        try:
            labels.append(int(cells[0]))
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: column 'label' is not an integer: {cells[0]!r}") from None
        row = []
        for k, cell in enumerate(cells[1:], start=1):
            try:
                row.append(float(cell))
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: column 'f{k}' is not numeric: {cell!r}") from None
        rows.append(row)
    return np.asarray(labels, dtype=np.int64), np.asarray(rows, dtype=float).reshape(-1, d)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")
