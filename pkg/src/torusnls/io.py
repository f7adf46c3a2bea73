"""Binary field snapshots and atomic file output.

Snapshot layout (all little-endian)::

    b"NLS2" | u32 M | u32 layout | M*M pairs of float64 (re, im)

Layout tag 0 is the only one defined: coefficients in k-space, row-major
with ``k2`` fastest, both axes in DFT order (0, 1, ..., M/2-1, -M/2, ..., -1).
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Union

import numpy as np

from .spectral import Grid2D, SpectralField

__all__ = ["MAGIC", "LAYOUT_KSPACE", "encode_snapshot", "decode_snapshot",
           "save_snapshot", "load_snapshot", "atomic_write", "write_json"]

MAGIC = b"NLS2"
LAYOUT_KSPACE = 0
_HEADER = struct.Struct("<4sII")

PathLike = Union[str, os.PathLike]


class SnapshotError(ValueError):
    pass


def encode_snapshot(f: SpectralField) -> bytes:
    header = _HEADER.pack(MAGIC, f.grid.M, LAYOUT_KSPACE)
    return header + np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()


def decode_snapshot(data: bytes) -> SpectralField:
    if len(data) < _HEADER.size:
        raise SnapshotError("snapshot is truncated (no header)")
    magic, M, layout = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if layout != LAYOUT_KSPACE:
        raise SnapshotError(f"unsupported layout tag {layout}")
    expected = _HEADER.size + 16 * M * M
    if len(data) != expected:
        raise SnapshotError(f"snapshot has {len(data)} bytes, expected {expected} for M={M}")
    coeffs = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(M, M)
    return SpectralField(Grid2D(M), coeffs)


def atomic_write(path: PathLike, data: Union[bytes, str]) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_snapshot(path: PathLike, f: SpectralField) -> None:
    atomic_write(path, encode_snapshot(f))


def load_snapshot(path: PathLike) -> SpectralField:
    return decode_snapshot(Path(path).read_bytes())


def write_json(path: PathLike, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
