"""Plain-text persistence: profiles and trajectories as CSV, metadata as JSON."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import Grid, ModelSpec, Profile
from .dual import DualProfile, DualScale
from .jko import QuantileFn
from .solver import Trajectory

FLOAT_FMT = "%.17g"


def _write_columns(path: Path, header: tuple[str, str], a: np.ndarray, b: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, np.column_stack([a, b]), fmt=FLOAT_FMT, delimiter=",")


def _read_columns(path: Path, header: tuple[str, str]) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != header:
        raise ValueError(f"{path}: expected header {','.join(header)}")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float).reshape(-1, 2)
    return data[:, 0], data[:, 1]


def dump_json(path: Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def write_profile(path: Path, p: Profile) -> None:
    """Cell centres and values as ``x,u``."""
    _write_columns(path, ("x", "u"), p.x, p.u)


def read_profile(path: Path, t: float = 0.0) -> Profile:
    """Inverse of :func:`write_profile`; the centres must be uniformly spaced."""
    x, u = _read_columns(path, ("x", "u"))
    if x.size < 2:
        raise ValueError(f"{path}: need at least two rows")
    dx = (x[-1] - x[0]) / (x.size - 1)
    if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0):
        raise ValueError(f"{path}: x is not uniformly spaced")
    return Profile(Grid(x[0] - dx / 2, dx, x.size), u, t)


def read_samples(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Arbitrary ``x,u`` samples (increasing ``x``) for interpolated initial data."""
    x, u = _read_columns(path, ("x", "u"))
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError(f"{path}: x must be strictly increasing with at least two rows")
    return x, u


def write_trajectory(directory: Path, tr: Trajectory, prefix: str = "snap") -> list[dict]:
    """One CSV per snapshot plus ``index.json`` with time, mass and support ends."""
    directory = Path(directory)
    index = []
    for k, p in enumerate(tr):
        name = f"{prefix}_{k:04d}.csv"
        write_profile(directory / name, p)
        pos = np.flatnonzero(p.u > 0)
        e = p.grid.edges
        index.append({
            "t": float(p.t), "file": name, "mass": p.mass,
            "support_left": float(e[pos[0]]) if pos.size else None,
            "support_right": float(e[pos[-1] + 1]) if pos.size else None,
        })
    dump_json(directory / "index.json", index)
    return index


def read_trajectory(directory: Path, spec: ModelSpec) -> Trajectory:
    directory = Path(directory)
    index = json.loads((directory / "index.json").read_text())
    return Trajectory(spec, [read_profile(directory / e["file"], e["t"]) for e in index])


def write_dual(path: Path, d: DualProfile) -> None:
    """``eta,v`` at mass-cell centres plus a JSON sidecar with the remaining state."""
    path = Path(path)
    _write_columns(path, ("eta", "v"), d.eta, d.v)
    dump_json(path.with_suffix(".json"), {
        "M": d.M, "a_left": d.a_left, "t": d.t, "singular": list(d.singular),
        "scale": {"time_factor": d.scale.time_factor, "eta_factor": d.scale.eta_factor},
    })


def read_dual(path: Path, spec: ModelSpec) -> DualProfile:
    path = Path(path)
    _, v = _read_columns(path, ("eta", "v"))
    meta = json.loads(path.with_suffix(".json").read_text())
    return DualProfile(spec, meta["M"], v, meta["a_left"], meta["t"], tuple(meta["singular"]),
                       DualScale(**meta["scale"]))


def write_quantiles(path: Path, qf: QuantileFn) -> None:
    """Interior quantile nodes as ``s,Q``; mass and support ends go to a sidecar."""
    path = Path(path)
    _write_columns(path, ("s", "Q"), qf.s, qf.Q)
    dump_json(path.with_suffix(".json"), {"M": qf.M, "left": qf.left, "right": qf.right})


def read_quantiles(path: Path) -> QuantileFn:
    path = Path(path)
    s, Q = _read_columns(path, ("s", "Q"))
    meta = json.loads(path.with_suffix(".json").read_text())
    return QuantileFn(s, Q, meta["M"], meta["left"], meta["right"])


def write_series(path: Path, header: tuple[str, ...], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([FLOAT_FMT % v if isinstance(v, float) else v for v in r])
