"""Binary field snapshot I/O.

Layout: magic "CNSF", u32 version=1, u32 nx, u32 ny, then nx*ny
little-endian f64 samples, row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import ScalarField, TorusGrid

MAGIC = b"CNSF"
VERSION = 1


class SnapshotError(ValueError):
    pass


def write_snapshot(path: str | Path, f: ScalarField) -> None:
    n = f.grid.n
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, n, n))
        fh.write(f.values.astype("<f8").tobytes(order="C"))


def read_snapshot(path: str | Path) -> ScalarField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version, nx, ny = struct.unpack("<III", fh.read(12))
        if version != VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        data = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8")
        if data.size != nx * ny:
            raise SnapshotError("truncated snapshot payload")
    if nx != ny:
        raise SnapshotError(f"non-square snapshot {nx}x{ny} is not supported")
    return ScalarField(TorusGrid(nx), data.reshape(nx, ny).copy())
