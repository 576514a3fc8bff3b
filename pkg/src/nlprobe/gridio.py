"""GRD1 binary grids and the CSV dumps used by the pipeline.

GRD1 layout (all little-endian)::

    offset  size  content
    0       8     ASCII magic "GRDF0001"
    8       4     uint32 kind (0 = real, 1 = complex)
    12      4     uint32 nx
    16      4     uint32 ny
    20      32    float64 xmin, xmax, ymin, ymax
    52      ...   nx*ny samples, row-major over (x, y); float64, or
                  interleaved (re, im) float64 pairs for complex
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .fields import Field, GridSpec

MAGIC = b"GRDF0001"
_HEADER = struct.Struct("<8sIII4d")
KIND_REAL, KIND_COMPLEX = 0, 1


def write_grd1(path, field: Field) -> None:
    g = field.grid
    kind = KIND_COMPLEX if field.is_complex else KIND_REAL
    header = _HEADER.pack(MAGIC, kind, g.nx, g.ny, g.xmin, g.xmax, g.ymin, g.ymax)
    dtype = "<c16" if kind == KIND_COMPLEX else "<f8"
    payload = np.ascontiguousarray(field.values, dtype=dtype).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_grd1(path) -> Field:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated GRD1 header")
    magic, kind, nx, ny, xmin, xmax, ymin, ymax = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if kind not in (KIND_REAL, KIND_COMPLEX):
        raise FormatError(f"{path}: unknown kind {kind}")
    itemsize = 16 if kind == KIND_COMPLEX else 8
    expected = _HEADER.size + nx * ny * itemsize
    if len(data) != expected:
        raise FormatError(f"{path}: payload is {len(data) - _HEADER.size} bytes, "
                          f"header implies {expected - _HEADER.size}")
    dtype = "<c16" if kind == KIND_COMPLEX else "<f8"
    vals = np.frombuffer(data, dtype=dtype, offset=_HEADER.size).reshape(nx, ny)
    try:
        grid = GridSpec(nx, ny, xmin, xmax, ymin, ymax)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return Field(grid, vals.astype(np.complex128 if kind else np.float64))


def fmt(x) -> str:
    """Round-trip-safe decimal for a double."""
    return format(float(x), ".17g")


def write_rows(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_rows(path):
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh)]
