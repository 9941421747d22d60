"""
File formats: CRTF binary fields, CSV and 16-bit PGM exports, key=value text.

CRTF layout (all little-endian)::

    b"CRTF"  u32 version (=1)  u32 m
    (m + 1) x [u64 count, f64 spacing, f64 origin]     # t-axis last
    prod(counts) x f64 values                          # t index fastest
"""

from __future__ import annotations

import csv
import os
import struct
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .field import GridError, GridSpec, ScalarField

MAGIC = b"CRTF"
VERSION = 1
_HEAD = struct.Struct("<4sII")
_AXIS = struct.Struct("<Qdd")

PathLike = Union[str, os.PathLike]


class FormatError(ValueError):
    """Malformed or unsupported input file."""


def write_crtf(path: PathLike, f: ScalarField) -> None:
    grid = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, grid.spatial_dim))
        for n, h, o in zip(grid.counts, grid.spacing, grid.origin):
            fh.write(_AXIS.pack(n, h, o))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_crtf(path: PathLike) -> ScalarField:
    """Read a CRTF file; every structural problem raises :class:`FormatError`."""
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise FormatError(f"{path}: file is {len(data)} bytes, shorter than the {_HEAD.size}-byte header")
    magic, version, m = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte offset 0 (expected {MAGIC!r})")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version} at byte offset 4")
    if not 1 <= m <= 3:
        raise FormatError(f"{path}: spatial dimension {m} at byte offset 8 is outside 1..3")
    offset = _HEAD.size
    counts, spacing, origin = [], [], []
    for axis in range(m + 1):
        if offset + _AXIS.size > len(data):
            raise FormatError(f"{path}: truncated axis record {axis} at byte offset {offset}")
        n, h, o = _AXIS.unpack_from(data, offset)
        counts.append(n)
        spacing.append(h)
        origin.append(o)
        offset += _AXIS.size
    try:
        grid = GridSpec(tuple(counts), tuple(spacing), tuple(origin))
    except GridError as exc:
        raise FormatError(f"{path}: invalid grid in header ({exc})") from exc
    expected = grid.size * 8
    if len(data) - offset != expected:
        raise FormatError(f"{path}: payload at byte offset {offset} has {len(data) - offset} bytes, "
                          f"expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=offset).reshape(grid.shape)
    try:
        return ScalarField(grid, values)
    except GridError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_csv(path: PathLike, f: ScalarField) -> None:
    """One row per sample: coordinates (x1.., t) then the value."""
    grid = f.grid
    m = grid.spatial_dim
    names = [f"x{i + 1}" for i in range(m)] + ["t", "value"]
    coords = np.meshgrid(*[grid.axis(i) for i in range(m + 1)], indexing="ij")
    cols = [c.ravel() for c in coords] + [f.values.ravel()]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        writer.writerows(zip(*(map(repr, col.tolist()) for col in cols)))


def read_csv_values(path: PathLike) -> np.ndarray:
    """Value column of a CSV written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-1] != "value":
            raise FormatError(f"{path}: last CSV column must be 'value', got {header[-1]!r}")
        return np.array([float(row[-1]) for row in reader])


def slice_2d(f: ScalarField, fixed: Mapping[int, int] = None) -> np.ndarray:
    """2-D array from f by fixing every axis but two.

    ``fixed`` maps axis -> index; unspecified extra axes take their middle
    sample. The two free axes are the first two not fixed.
    """
    fixed = dict(fixed or {})
    ndim = f.values.ndim
    free = [ax for ax in range(ndim) if ax not in fixed]
    keep = free[:2]
    if len(keep) < 2:
        raise ValueError("a slice needs two free axes")
    index = []
    for ax in range(ndim):
        if ax in keep:
            index.append(slice(None))
        else:
            i = fixed.get(ax, f.grid.counts[ax] // 2)
            if not 0 <= i < f.grid.counts[ax]:
                raise ValueError(f"slice index {i} out of range on axis {ax}")
            index.append(i)
    return f.values[tuple(index)]


def write_pgm(path: PathLike, image: np.ndarray) -> tuple:
    """16-bit binary PGM (P5) with the min/max mapping in ``<path>.minmax``.

    Rows are written with the first array axis as image rows. Returns
    ``(vmin, vmax)``.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D array")
    vmin, vmax = float(img.min()), float(img.max())
    span = vmax - vmin
    levels = np.zeros(img.shape) if span == 0 else (img - vmin) / span * 65535.0
    data = np.rint(levels).astype(">u2")
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
    write_keyvalue(f"{path}.minmax", {"min": repr(vmin), "max": repr(vmax)})
    return vmin, vmax


def read_pgm(path: PathLike) -> np.ndarray:
    """Read back a 16-bit P5 image written by :func:`write_pgm` (values mapped to [min, max])."""
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    cols, rows, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    data = np.frombuffer(parts[4][: rows * cols * 2], dtype=">u2").reshape(rows, cols)
    meta = read_keyvalue(f"{path}.minmax")
    vmin, vmax = float(meta["min"]), float(meta["max"])
    return vmin + data.astype(float) / maxval * (vmax - vmin)


def write_keyvalue(path: PathLike, pairs: Mapping) -> None:
    with open(path, "w") as fh:
        for key, value in pairs.items():
            fh.write(f"{key}={value}\n")


def parse_keyvalue(text: str, source: str = "<string>") -> dict:
    """``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise FormatError(f"{source}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def read_keyvalue(path: PathLike) -> dict:
    return parse_keyvalue(Path(path).read_text(), str(path))
