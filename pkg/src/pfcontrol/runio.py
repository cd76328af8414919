"""Deterministic run outputs: CSV tables, binary snapshots, manifests.

All floating-point text goes through one 17-significant-digit format, so
identical runs produce byte-identical files.  Snapshots are raw
little-endian float64 arrays behind a fixed 16-byte header: the magic
"PFSC", a u32 dimension, and two u32 per-axis counts (the second is 0
for one-dimensional fields).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "fmt",
    "write_csv",
    "write_snapshot",
    "read_snapshot",
    "write_state_csv",
    "write_controls_csv",
    "write_adjoint_csv",
    "write_history_csv",
    "write_stages_csv",
    "write_diagnostics_csv",
    "write_manifest",
    "read_manifest",
]

_MAGIC = b"PFSC"


def fmt(x) -> str:
    """Canonical float formatting: shortest 17-significant-digit form."""
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in row) + "\n")


def write_snapshot(path, values, counts):
    """Write a nodal field; counts are the per-axis node counts."""
    values = np.asarray(values, dtype=float)
    counts = tuple(int(c) for c in counts)
    if len(counts) not in (1, 2):
        raise ValueError("snapshots support 1 or 2 axes")
    if int(np.prod(counts)) != values.size:
        raise ValueError(f"counts {counts} do not match {values.size} values")
    n1 = counts[1] if len(counts) == 2 else 0
    header = struct.pack("<4sIII", _MAGIC, len(counts), counts[0], n1)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.astype("<f8").tobytes())


def read_snapshot(path):
    """Read a snapshot; returns (dim, counts, flat values)."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated snapshot header")
        magic, dim, n0, n1 = struct.unpack("<4sIII", header)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad snapshot magic {magic!r}")
        counts = (n0,) if dim == 1 else (n0, n1)
        values = np.frombuffer(fh.read(), dtype="<f8").copy()
    if values.size != int(np.prod(counts)):
        raise ValueError(f"{path}: payload does not match header counts {counts}")
    return dim, counts, values


def _coord_columns(grid):
    return ["x"] if grid.dim == 1 else ["x", "y"]


def _field_rows(grid, times, *fields):
    coords = grid.coords
    for k, t in enumerate(times):
        for i in range(grid.n_nodes):
            yield (t, *coords[i], *(f[k, i] for f in fields))


def write_state_csv(path, grid, times, theta, phi):
    write_csv(path, ["t", *_coord_columns(grid), "theta", "phi"], _field_rows(grid, times, theta, phi))


def write_adjoint_csv(path, grid, times, p, q):
    write_csv(path, ["t", *_coord_columns(grid), "p", "q"], _field_rows(grid, times, p, q))


def write_controls_csv(out_dir, grid, times, controls, suffix=""):
    out_dir = Path(out_dir)
    write_csv(
        out_dir / f"controls_u{suffix}.csv",
        ["t", *_coord_columns(grid), "u"],
        _field_rows(grid, times, controls.u),
    )
    bidx = grid.boundary_index
    bcoords = grid.coords[bidx]
    write_csv(
        out_dir / f"controls_v{suffix}.csv",
        ["t", *_coord_columns(grid), "v"],
        (
            (t, *bcoords[i], controls.v[k, i])
            for k, t in enumerate(times)
            for i in range(len(bidx))
        ),
    )
    write_csv(
        out_dir / f"controls_eta{suffix}.csv",
        ["t", *_coord_columns(grid), "eta"],
        _field_rows(grid, times, controls.eta),
    )


def write_history_csv(path, history, stage_labels=None):
    """history: a list of IterationRecord, or one such list per stage."""
    if stage_labels is None:
        staged = [((0, "", ""), history)]
    else:
        staged = [
            ((idx, fmt(eps), "" if sigma is None else fmt(sigma)), records)
            for (idx, eps, sigma), records in zip(stage_labels, history)
        ]
    rows = [
        (idx, eps, sigma, rec.iteration, rec.cost, rec.residual, rec.step_size, rec.backtracks)
        for (idx, eps, sigma), records in staged
        for rec in records
    ]
    write_csv(
        path,
        ["stage", "eps", "sigma", "iteration", "cost", "residual", "step_size", "backtracks"],
        rows,
    )


def write_stages_csv(path, rows):
    header = [
        "eps", "sigma", "cost", "residual", "zeta",
        "violation_u", "violation_v", "violation_eta",
        "drift_u", "drift_v", "drift_eta",
    ]
    write_csv(path, header, rows)


def write_diagnostics_csv(path, traj):
    rows = []
    times = traj.times()
    for k in range(1, traj.nt + 1):
        rows.append(
            (
                times[k],
                traj.min_theta[k],
                traj.max_theta[k],
                traj.max_abs_phi[k],
                traj.balance_residual[k - 1],
                traj.newton_iters_phi[k - 1],
                traj.newton_iters_theta[k - 1],
            )
        )
    write_csv(
        path,
        ["t", "min_theta", "max_theta", "max_abs_phi", "balance_residual",
         "newton_iters_phi", "newton_iters_theta"],
        rows,
    )


def write_manifest(path, command, config_echo, seed, summary, wall_seconds):
    from . import __version__

    manifest = {
        "command": command,
        "config": config_echo,
        "seed": seed,
        "summary": summary,
        "version": __version__,
        "wall_seconds": wall_seconds,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
