"""Writers for operator files, reports and study tables."""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from scipy.io import mmwrite

from .mesh import BackgroundMesh

_LOGGER = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"


def _plain(value: Any) -> Any:
    """JSON-friendly copy of numpy scalars, arrays and tuples."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    if isinstance(value, (list, tuple)):
        return "x".join(str(v) for v in value)
    return str(value)


def write_json(path: Path, data: Any) -> Path:
    """Write sorted, indented JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, rows: Iterable[dict[str, Any]], columns: list[str]) -> Path:
    """Write rows with a header; missing values are empty."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else _cell(row[c]) for c in columns])
    _LOGGER.debug("Wrote %s", path)
    return path


def write_operators(build, out_dir: Path) -> list[Path]:
    """Write m.csv, Sx.mtx, Sy.mtx and boundary.json of a build."""
    out_dir.mkdir(parents=True, exist_ok=True)
    ops = build.ops
    coords = build.nodes.coords
    rows = (
        {"i": i, "x": coords[i, 0], "y": coords[i, 1], "m": ops.m[i]} for i in range(ops.n)
    )
    paths = [write_csv(out_dir / "m.csv", rows, ["i", "x", "y", "m"])]
    for name, matrix in (("Sx", ops.sx), ("Sy", ops.sy)):
        path = out_dir / f"{name}.mtx"
        mmwrite(str(path), matrix.tocoo(), field="real", precision=17, symmetry="general")
        paths.append(path)
    faces = [
        {
            "face_id": bf.face_id,
            "kind": bf.kind,
            "node_ids": bf.node_ids,
            "interp": bf.interp,
            "points": bf.points,
            "weights": bf.weights,
            "normals": bf.normals,
        }
        for bf in ops.boundary_faces
    ]
    paths.append(write_json(out_dir / "boundary.json", faces))
    return paths


def write_mesh(path: Path, mesh: BackgroundMesh) -> Path:
    """Dump leaf boxes with their kinds and held nodes."""
    cells = [
        {
            "id": cell.id,
            "key": cell.key,
            "bounds": cell.bounds,
            "kind": cell.kind,
            "node": cell.node,
        }
        for cell in mesh.cells
    ]
    return write_json(path, {"min_cut_size": mesh.min_cut_size, "cells": cells})
