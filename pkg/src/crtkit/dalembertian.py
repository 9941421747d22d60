"""Finite-difference iterated d'Alembertian for cones of half-opening phi."""

from __future__ import annotations

import math

import numpy as np

from .field import GridError, ScalarField


def second_difference(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """[1, -2, 1]/h^2 along ``axis``; one-sided second-order stencils at both ends."""
    v = np.moveaxis(values, axis, -1)
    out = np.empty_like(v)
    out[..., 1:-1] = v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]
    out[..., 0] = 2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]
    out[..., -1] = 2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]
    out /= h * h
    return np.moveaxis(out, -1, axis)


def _box_once(values: np.ndarray, spacing, tan2: float) -> np.ndarray:
    m = values.ndim - 1
    out = second_difference(values, m, spacing[m])
    for i in range(m):
        out -= tan2 * second_difference(values, i, spacing[i])
    return out


def apply_box(f: ScalarField, phi: float = math.pi / 4, k: int = 1) -> ScalarField:
    """k-fold application of d_t^2 - tan^2(phi) * Laplacian_x.

    Each pass uses the 3-point stencil per axis, so the result equals k
    repeated single applications bit for bit.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = int(k)
    if min(f.grid.counts) < 2 * k + 2:
        raise GridError(f"apply_box with k={k} needs at least {2 * k + 2} samples per axis")
    tan2 = math.tan(phi) ** 2
    v = f.values
    for _ in range(k):
        v = _box_once(v, f.grid.spacing, tan2)
    return f.with_values(v)
