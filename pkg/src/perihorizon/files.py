"""Reading and writing datasets, traces and run outputs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from perihorizon.datagen import ROLES, CollocationSet


class SchemaError(ValueError):
    """A data file does not follow the expected layout."""


def unique_path(directory, stem: str, suffix: str) -> Path:
    """``directory/stem.suffix``, or the first free ``stem-N.suffix`` if that exists."""
    directory = Path(directory)
    candidate = directory / f"{stem}{suffix}"
    n = 1
    while candidate.exists():
        candidate = directory / f"{stem}-{n}{suffix}"
        n += 1
    return candidate


def _coord_names(dim: int):
    return ("x", "t") if dim == 1 else ("x", "y")


def write_dataset(data: CollocationSet, path, extra_meta: dict | None = None) -> Path:
    """CSV with one row per point plus a ``.json`` sidecar holding provenance."""
    path = Path(path)
    names = _coord_names(data.dim)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "role", "target", "pair"])
        for c, role, target, pid in zip(data.coords, data.roles, data.targets, data.pair):
            w.writerow([repr(float(c[0])), repr(float(c[1])), role, repr(float(target)), int(pid)])
    meta = dict(data.meta)
    meta.update(extra_meta or {})
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_dataset(path) -> CollocationSet:
    path = Path(path)
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    coords, roles, targets, pairs = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 5 or header[2:] != ["role", "target", "pair"]:
            raise SchemaError(f"{path}: header must be <c1>,<c2>,role,target,pair; got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise SchemaError(f"{path}: row {lineno} has {len(row)} fields, expected 5")
            try:
                coords.append((float(row[0]), float(row[1])))
                targets.append(float(row[3]))
                pairs.append(int(row[4]))
            except ValueError as exc:
                raise SchemaError(f"{path}: row {lineno}: {exc}") from exc
            if row[2] not in ROLES:
                raise SchemaError(f"{path}: row {lineno}: unknown role {row[2]!r}")
            roles.append(row[2])
    meta.setdefault("dim", 1 if header[1] == "t" else 2)
    return CollocationSet(np.array(coords).reshape(-1, 2), np.array(roles, dtype=object), targets, pairs, meta)


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
