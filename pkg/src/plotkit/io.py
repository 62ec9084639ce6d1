"""Readers for the documented artifact formats.

These parsers are deliberately independent of the simulation package: they
re-state the documented schemas and fail loudly if an input drifts from
them.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

# The diagnostics CSV schema: one row per record, these columns in this
# order. Any drift in the producer must fail here, not plot garbage.
DIAGNOSTICS_COLUMNS = [
    "t",
    "mass",
    "mom_x",
    "mom_y",
    "E",
    "calE",
    "intD",
    "sup_rho",
    "rho_bound_margin",
    "sup_Fplus",
    "div_L2",
    "div_Linf",
    "gradPv_L2",
    "gradPv_Linf",
    "Gt_L2",
    "Pt_L2",
    "rho_vdot_L2",
    "wt_rho_vdot_L2",
    "wt_grad_vdot_acc",
    "energy_residual",
]

BOUNDARY_HEADER = ["x0", "y0", "x1", "y1"]

SNAPSHOT_MAGIC = b"CNSF"
SNAPSHOT_VERSION = 1


class FormatError(ValueError):
    """An input file does not match its documented schema."""


def read_diagnostics_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load a diagnostics CSV into a column-name -> float-array mapping."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != DIAGNOSTICS_COLUMNS:
        raise FormatError(f"unexpected diagnostics CSV header in {path}")
    data = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float)
    data = data.reshape(-1, len(DIAGNOSTICS_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(DIAGNOSTICS_COLUMNS)}


def read_sweep_json(path: str | Path) -> dict:
    """Load a viscosity-sweep JSON report and validate its rate data."""
    data = json.loads(Path(path).read_text())
    for key in ("nu", "div_L2L2"):
        if key not in data:
            raise FormatError(f"sweep report missing key {key!r}")
    nu = [float(x) for x in data["nu"]]
    if len(nu) < 3:
        raise FormatError("rate plot needs at least three viscosity values")
    if len(set(nu)) != len(nu):
        raise FormatError("duplicated viscosity entries in sweep report")
    if len(data["div_L2L2"]) != len(nu):
        raise FormatError("viscosity and divergence-norm lists differ in length")
    return data


def read_field_snapshot(path: str | Path) -> np.ndarray:
    """Load a CNSF binary field snapshot as an (n, n) array."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}")
        version, nx, ny = struct.unpack("<III", fh.read(12))
        if version != SNAPSHOT_VERSION:
            raise FormatError(f"unsupported snapshot version {version}")
        data = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8")
    if data.size != nx * ny:
        raise FormatError("truncated snapshot payload")
    return data.reshape(nx, ny).copy()


def read_boundary_csv(path: str | Path) -> np.ndarray:
    """Load a boundary-polyline CSV as an (m, 2, 2) segment array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != BOUNDARY_HEADER:
        raise FormatError(f"unexpected boundary CSV header in {path}")
    segs = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float)
    return segs.reshape(-1, 2, 2)
