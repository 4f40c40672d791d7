"""Deterministic file exports.

Every number is written with 12 significant digits; every file carries the
hash of the configuration that produced it (a ``# config_hash=...`` first
line for CSV, a ``config_hash`` field for JSON).
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

SIG_DIGITS = 12


def fmt(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.{SIG_DIGITS}g}"


def _round_floats(obj):
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)
        return float(fmt(x))
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_round_floats(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Key-sorted JSON with floats rounded to 12 significant digits; inf becomes the string "inf"."""
    return json.dumps(_round_floats(obj), sort_keys=True, indent=2) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def write_csv(path, header, rows, config_hash):
    lines = [f"# config_hash={config_hash}", header]
    lines.extend(",".join(r) for r in rows)
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_config_hash(path) -> str | None:
    path = Path(path)
    if path.suffix == ".json":
        try:
            return json.loads(path.read_text()).get("config_hash")
        except (OSError, ValueError):
            return None
    with open(path) as fh:
        first = fh.readline().strip()
    if first.startswith("# config_hash="):
        return first.split("=", 1)[1]
    return None


def write_json(path, obj):
    Path(path).write_text(canonical_json(obj))
    return Path(path)


def write_profile_csv(path, profile, config_hash):
    rows = ((fmt(t), fmt(f)) for t, f in zip(profile.theta, profile.f))
    return write_csv(path, "theta,f", rows, config_hash)


def write_mask_csv(path, grid, omega, config_hash):
    """One row per angular column: the column is the run of rows below ``first_exit_r_index``."""
    from .solver import exit_rows

    exits = exit_rows(grid, omega)
    rows = ((str(j), str(int(e))) for j, e in enumerate(exits))
    return write_csv(path, "theta_index,first_exit_r_index", rows, config_hash)


def read_mask_csv(path, grid):
    from .solver import mask_from_exit_rows

    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, dtype=np.int64, ndmin=2)
    exits = np.zeros(grid.n_theta, np.int64)
    exits[data[:, 0]] = data[:, 1]
    return mask_from_exit_rows(grid, exits)


def write_slice_csv(path, grid, A, B, config_hash):
    rows = []
    for label, m in (("A", A), ("B", B)):
        for node in np.flatnonzero(m):
            i, j = grid.row_col(int(node))
            rows.append((label, str(i), str(j)))
    return write_csv(path, "set,r_index,theta_index", rows, config_hash)


def write_curve_csv(path, points, config_hash):
    pts = np.asarray(points, float).reshape(-1, 2)
    rows = ((fmt(r), fmt(t), fmt(r * math.cos(t)), fmt(r * math.sin(t))) for r, t in pts)
    return write_csv(path, "r,theta,x,y", rows, config_hash)


def write_manifest(directory, files, config_hash):
    directory = Path(directory)
    entries = {}
    for f in sorted(Path(p) for p in files):
        entries[f.name] = sha256_file(f)
    return write_json(directory / "manifest.json", {"config_hash": config_hash, "artifacts": entries})
