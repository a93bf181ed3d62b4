"""Grid-file input/output.

Binary format (little-endian throughout):

    magic  8 bytes  b"MSCANGRD"
    u32    version (1)
    u32    d
    u64    n
    u32    dtype code: 0 = f64, 1 = i64
    payload: n^d values, row-major (last axis fastest)

CSV covers d <= 2 only (unambiguous rows x columns layout): one value per
line for d = 1, comma-separated rows for d = 2.  Integer payloads are
converted losslessly to float64.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DomainError, GridFormatError
from .scan import Field

__all__ = ["write_grid", "read_grid", "write_grid_csv", "read_grid_csv", "read_grid_any"]

GRID_MAGIC = b"MSCANGRD"
GRID_VERSION = 1
_DTYPES = {0: "<f8", 1: "<i8"}
_CODES = {"f64": 0, "i64": 1}


def write_grid(field, path, dtype="f64"):
    """Write a Field in the binary grid format."""
    if dtype not in _CODES:
        raise DomainError(f"dtype must be one of {sorted(_CODES)}, got {dtype!r}")
    payload = field.values
    if dtype == "i64":
        as_int = payload.astype(np.int64)
        if not np.array_equal(as_int.astype(np.float64), payload):
            raise DomainError("values are not integral; cannot store as i64")
        blob = as_int.astype("<i8").tobytes()
    else:
        blob = payload.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<IIQI", GRID_VERSION, field.d, field.n, _CODES[dtype]))
        fh.write(blob)


def read_grid(path):
    """Read a binary grid file into a Field."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != GRID_MAGIC:
            raise GridFormatError(f"{path}: bad magic {magic!r}")
        header = fh.read(20)
        if len(header) != 20:
            raise GridFormatError(f"{path}: truncated header")
        version, d, n, code = struct.unpack("<IIQI", header)
        if version != GRID_VERSION:
            raise GridFormatError(f"{path}: unsupported version {version}")
        if code not in _DTYPES:
            raise GridFormatError(f"{path}: unknown dtype code {code}")
        payload = fh.read()
    expected = n**d * 8
    if len(payload) != expected:
        raise GridFormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    flat = np.frombuffer(payload, dtype=_DTYPES[code])
    if code == 1 and np.any(np.abs(flat) > 2**53):
        raise GridFormatError(f"{path}: i64 values exceed the exact float64 range")
    return Field.from_flat(int(d), int(n), flat.astype(np.float64))


def write_grid_csv(field, path):
    """Write a d <= 2 Field as CSV (rows x columns)."""
    if field.d > 2:
        raise DomainError("CSV grids support d <= 2 only; use the binary format")
    with open(path, "w", newline="\n") as fh:
        if field.d == 1:
            for x in field.values:
                fh.write(f"{float(x)!r}\n")
        else:
            for row in field.values:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_grid_csv(path):
    """Read a CSV grid (d inferred: single column -> d=1, square matrix -> d=2)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise GridFormatError(f"{path}: empty grid")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise GridFormatError(f"{path}: ragged rows")
    arr = np.asarray(rows, dtype=np.float64)
    if width == 1:
        flat = arr.ravel()
        return Field.from_flat(1, flat.size, flat)
    if len(rows) != width:
        raise GridFormatError(f"{path}: grid must be square, got {len(rows)}x{width}")
    return Field(2, width, arr)


def read_grid_any(path, fmt="bin"):
    if fmt == "bin":
        return read_grid(path)
    if fmt == "csv":
        return read_grid_csv(path)
    raise DomainError(f"unknown grid format {fmt!r}")
