"""
Uniform Cartesian sampling of scalar fields on R^m_x x R_t.

Axis order is fixed: the ``m`` spatial axes come first and the t-axis is
last, so ``values[i1, ..., im, j]`` is the sample at
``(origin + index * spacing)`` with the t index varying fastest in memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

MAX_SPATIAL_DIM = 3
MIN_COUNT = 4


class GridError(ValueError):
    """Raised for invalid grids or mismatched fields."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``m`` spatial axes followed by one t-axis.

    Parameters
    ----------
    counts, spacing, origin : sequences of length ``m + 1``
        Per-axis sample count, step and coordinate of the first sample.
        The last entry always describes the t-axis.
    """

    counts: tuple
    spacing: tuple
    origin: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        spacing = tuple(float(h) for h in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if not (len(counts) == len(spacing) == len(origin)):
            raise GridError("counts, spacing and origin must have equal length")
        m = len(counts) - 1
        if not 1 <= m <= MAX_SPATIAL_DIM:
            raise GridError(f"spatial dimension must be in 1..{MAX_SPATIAL_DIM}, got {m}")
        if any(c < MIN_COUNT for c in counts):
            raise GridError(f"every axis needs at least {MIN_COUNT} samples, got {counts}")
        if not all(math.isfinite(h) and h > 0 for h in spacing):
            raise GridError(f"spacings must be finite and positive, got {spacing}")
        if not all(math.isfinite(o) for o in origin):
            raise GridError(f"origins must be finite, got {origin}")
        total = 1
        for c in counts:
            total *= c
        if total > np.iinfo(np.intp).max // 8:
            raise GridError(f"grid with {total} samples exceeds the addressable range")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float], counts: Sequence[int]):
        """Grid whose first and last samples sit exactly on ``lo`` and ``hi``."""
        counts = [int(c) for c in counts]
        spacing = [(b - a) / (n - 1) for a, b, n in zip(lo, hi, counts)]
        return cls(tuple(counts), tuple(spacing), tuple(lo))

    @property
    def spatial_dim(self) -> int:
        return len(self.counts) - 1

    @property
    def shape(self) -> tuple:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def dt(self) -> float:
        return self.spacing[-1]

    @property
    def t(self) -> np.ndarray:
        return self.axis(self.spatial_dim)

    @property
    def max_spacing(self) -> float:
        return max(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def spatial_cell_volume(self) -> float:
        return float(np.prod(self.spacing[:-1]))

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.counts[i])

    def upper(self, i: int) -> float:
        return self.origin[i] + self.spacing[i] * (self.counts[i] - 1)

    def mesh(self) -> list:
        """Open (broadcastable) coordinate arrays, one per axis."""
        return np.meshgrid(*[self.axis(i) for i in range(len(self.counts))],
                           indexing="ij", sparse=True)

    def with_counts(self, counts: Sequence[int]) -> "GridSpec":
        return GridSpec(tuple(counts), self.spacing, self.origin)

    def rescaled_spatial(self, factor: float) -> "GridSpec":
        """Same samples seen through the map x -> factor * x."""
        m = self.spatial_dim
        spacing = tuple(h * factor for h in self.spacing[:m]) + (self.spacing[m],)
        origin = tuple(o * factor for o in self.origin[:m]) + (self.origin[m],)
        return GridSpec(self.counts, spacing, origin)

    def same_as(self, other: "GridSpec") -> bool:
        return (self.counts == other.counts
                and np.allclose(self.spacing, other.spacing, rtol=1e-12, atol=0)
                and np.allclose(self.origin, other.origin, rtol=1e-12, atol=1e-12))


class ScalarField:
    """Real samples of a function on a :class:`GridSpec`.

    The values array is copied on construction and frozen, so fields can be
    shared freely. Non-finite samples are rejected.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values):
        arr = np.array(values, dtype=np.float64, order="C", copy=True)
        if arr.shape != grid.shape:
            if arr.size != grid.size:
                raise GridError(f"values have {arr.size} samples, grid expects {grid.size}")
            arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise GridError("field values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    def __repr__(self):
        return f"ScalarField(counts={self.grid.counts}, linf={linf_norm(self):.3g})"

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @property
    def spatial_dim(self) -> int:
        return self.grid.spatial_dim

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def regrid(self, grid: GridSpec) -> "ScalarField":
        """Reinterpret the same samples on another grid of identical shape."""
        if grid.shape != self.grid.shape:
            raise GridError("regrid requires identical counts")
        return ScalarField(grid, self.values)


@dataclass(frozen=True)
class SupportBox:
    """Inclusive per-axis index intervals enclosing every sample above a tolerance."""

    lo: tuple
    hi: tuple
    max_abs_outside: float

    def contains_index(self, index: Sequence[int]) -> bool:
        return all(a <= i <= b for a, i, b in zip(self.lo, index, self.hi))

    def margins(self, grid: GridSpec) -> tuple:
        """Distance in cells from the box to the lower and upper grid faces."""
        return (tuple(self.lo),
                tuple(n - 1 - b for n, b in zip(grid.counts, self.hi)))

    def slices(self) -> tuple:
        return tuple(slice(a, b + 1) for a, b in zip(self.lo, self.hi))


def _check_same_grid(f: ScalarField, g: ScalarField):
    if not f.grid.same_as(g.grid):
        raise GridError(f"grid mismatch: {f.grid.counts} vs {g.grid.counts}")


def cumulative_t_integral(f: ScalarField) -> ScalarField:
    """Trapezoid approximation of the integral of f from the grid's t-minimum to t."""
    out = cumulative_trapezoid(f.values, dx=f.grid.dt, axis=-1, initial=0.0)
    return f.with_values(out)


def total_t_integral(f: ScalarField) -> np.ndarray:
    """Trapezoid integral over the whole t-axis; returns an m-dimensional array."""
    return trapezoid(f.values, dx=f.grid.dt, axis=-1)


def partial_t(f: ScalarField) -> ScalarField:
    """Second-order finite-difference derivative along t.

    Central differences inside, one-sided second-order stencils on the two
    boundary slabs so the output lives on the same grid.
    """
    v = f.values
    h = f.grid.dt
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * h)
    return f.with_values(out)


def detect_support(f: ScalarField, tol: float) -> Optional[SupportBox]:
    """Smallest index box outside which every |value| <= tol, or None if all are."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    mask = np.abs(f.values) > tol
    if not mask.any():
        return None
    lo, hi = [], []
    ndim = mask.ndim
    for ax in range(ndim):
        other = tuple(i for i in range(ndim) if i != ax)
        hit = np.flatnonzero(mask.any(axis=other))
        lo.append(int(hit[0]))
        hi.append(int(hit[-1]))
    box_slices = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
    outside = np.abs(f.values).copy()
    outside[box_slices] = 0.0
    return SupportBox(tuple(lo), tuple(hi), float(outside.max()))


def detect_halfspace(f: ScalarField, tol: float, strict: bool = False) -> Optional[float]:
    """Largest grid time t0 such that |f| <= tol on every sample with t < t0.

    Returns the grid t-maximum for a field that is clean everywhere. When the
    lowest t-slab is already dirty the window cannot certify a half-space;
    ``strict=True`` then returns None, otherwise the grid t-minimum.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    dirty = (np.abs(f.values) > tol).reshape(-1, f.grid.counts[-1]).any(axis=0)
    t = f.grid.t
    if not dirty.any():
        return float(t[-1])
    first = int(np.argmax(dirty))
    if first == 0 and strict:
        return None
    return float(t[first])


def bottom_slab_clean(f: ScalarField, tol: float) -> bool:
    return bool(np.abs(f.values[..., 0]).max() <= tol)


def l2_norm(f: ScalarField) -> float:
    """Discrete L2 norm including the cell volume."""
    return float(np.sqrt(np.sum(f.values ** 2) * f.grid.cell_volume))


def linf_norm(f: ScalarField) -> float:
    return float(np.abs(f.values).max())


def add(f: ScalarField, g: ScalarField) -> ScalarField:
    _check_same_grid(f, g)
    return f.with_values(f.values + g.values)


def subtract(f: ScalarField, g: ScalarField) -> ScalarField:
    _check_same_grid(f, g)
    return f.with_values(f.values - g.values)


def scale(f: ScalarField, c: float) -> ScalarField:
    return f.with_values(float(c) * f.values)


def pad_field(f: ScalarField, widths: Sequence) -> ScalarField:
    """Zero-pad ``f``; ``widths[i] = (before, after)`` in samples for axis i."""
    grid = f.grid
    widths = [(int(a), int(b)) for a, b in widths]
    if len(widths) != len(grid.counts) or any(a < 0 or b < 0 for a, b in widths):
        raise GridError(f"need one non-negative (before, after) pair per axis, got {widths}")
    counts = tuple(n + a + b for n, (a, b) in zip(grid.counts, widths))
    origin = tuple(o - a * h for o, (a, _), h in zip(grid.origin, widths, grid.spacing))
    return ScalarField(GridSpec(counts, grid.spacing, origin), np.pad(f.values, widths))


def crop_field(f: ScalarField, grid: GridSpec) -> ScalarField:
    """Restrict ``f`` to ``grid``, which must be an aligned sub-grid of f's grid."""
    src = f.grid
    if not np.allclose(grid.spacing, src.spacing, rtol=1e-12, atol=0):
        raise GridError("crop target must share the spacing")
    slices = []
    for i, (o, h, n) in enumerate(zip(grid.origin, grid.spacing, grid.counts)):
        pos = (o - src.origin[i]) / h
        start = int(round(pos))
        if abs(pos - start) > 1e-6 or start < 0 or start + n > src.counts[i]:
            raise GridError(f"crop target is not an aligned sub-grid on axis {i}")
        slices.append(slice(start, start + n))
    return ScalarField(grid, f.values[tuple(slices)])


def interior(grid: GridSpec, depth: int) -> tuple:
    """Slices dropping ``depth`` samples at both ends of every axis."""
    if depth == 0:
        return tuple(slice(None) for _ in grid.counts)
    if any(2 * depth >= n for n in grid.counts):
        raise GridError(f"interior depth {depth} leaves no samples on {grid.counts}")
    return tuple(slice(depth, n - depth) for n in grid.counts)


def relative_l2(f: ScalarField, reference: ScalarField, depth: int = 0) -> float:
    """||f - reference|| / ||reference|| restricted to the interior of depth ``depth``."""
    _check_same_grid(f, reference)
    sl = interior(f.grid, depth)
    diff = f.values[sl] - reference.values[sl]
    denom = np.sqrt(np.sum(reference.values[sl] ** 2))
    if denom == 0:
        return float(np.sqrt(np.sum(diff ** 2)))
    return float(np.sqrt(np.sum(diff ** 2)) / denom)
