"""Trajectory CSV and report JSON files."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .ode import Trajectory

__all__ = ["write_trajectory_csv", "read_trajectory_csv", "write_crossings_csv",
           "write_json", "to_jsonable", "fmt"]


def fmt(x: float) -> str:
    # 17 significant digits round-trip any float64 exactly
    return format(float(x), ".17g")


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i}" for i in range(traj.dim)])
        for t, row in zip(traj.times, traj.states):
            w.writerow([fmt(t)] + [fmt(v) for v in row])


def read_trajectory_csv(path) -> Trajectory:
    """Parse a ``t,x0,x1,...`` CSV. Raises ValueError on malformed content."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "t" or header[1:] != [f"x{i}" for i in range(len(header) - 1)]:
        raise ValueError(f"{path}: expected header t,x0,x1,..., got {','.join(header)}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: no samples")
    try:
        arr = np.array([[float(v) for v in r] for r in body])
    except ValueError as err:
        raise ValueError(f"{path}: non-numeric entry ({err})") from None
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match the header width")
    return Trajectory(arr[:, 0], arr[:, 1:])


def write_crossings_csv(path, crossings, dim: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i}" for i in range(dim)])
        for c in crossings:
            w.writerow([fmt(c.time)] + [fmt(v) for v in c.point])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2) + "\n")
