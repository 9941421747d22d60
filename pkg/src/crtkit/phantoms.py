"""Compactly supported smooth phantoms evaluated analytically."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field import GridSpec, ScalarField

KINDS = ("bump", "gaussian")
GAUSSIAN_EXTENT = 8.0  # scaled radius beyond which a Gaussian is set to zero (tail ~1e-14)


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class PhantomSpec:
    """A sum of bumps or Gaussians on R^m x R_t.

    ``centers[i]`` has ``m + 1`` coordinates (t last); ``radii[i]`` is either
    a scalar or one radius (Gaussian width) per axis.

    The bump profile is ``amplitude * exp(1 - 1/(1 - r^2))`` for scaled
    distance ``r < 1`` and exactly zero outside.
    """

    kind: str
    centers: tuple
    radii: tuple
    amplitudes: tuple = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PhantomError(f"unknown phantom kind {self.kind!r}; expected one of {KINDS}")
        centers = tuple(tuple(float(c) for c in ctr) for ctr in self.centers)
        if not centers:
            raise PhantomError("a phantom needs at least one center")
        dim = len(centers[0])
        if any(len(c) != dim for c in centers) or dim < 2:
            raise PhantomError("all centers need the same length m + 1 >= 2")
        radii = []
        for r in self.radii:
            r = np.broadcast_to(np.asarray(r, dtype=float), (dim,))
            if np.any(r <= 0) or not np.all(np.isfinite(r)):
                raise PhantomError(f"radii must be positive, got {r}")
            radii.append(tuple(float(v) for v in r))
        if len(radii) == 1 and len(centers) > 1:
            radii = radii * len(centers)
        if len(radii) != len(centers):
            raise PhantomError("need one radius entry per center")
        amps = self.amplitudes
        if amps is None:
            amps = (1.0,) * len(centers)
        amps = tuple(float(a) for a in np.broadcast_to(np.asarray(amps, float), (len(centers),)))
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", tuple(radii))
        object.__setattr__(self, "amplitudes", amps)

    @property
    def ndim(self) -> int:
        return len(self.centers[0])

    @property
    def spatial_dim(self) -> int:
        return self.ndim - 1

    def extent(self, i: int) -> tuple:
        """Interval on axis ``i`` outside which the phantom vanishes."""
        reach = 1.0 if self.kind == "bump" else GAUSSIAN_EXTENT
        lo = min(c[i] - reach * r[i] for c, r in zip(self.centers, self.radii))
        hi = max(c[i] + reach * r[i] for c, r in zip(self.centers, self.radii))
        return lo, hi

    def components(self):
        yield from zip(self.centers, self.radii, self.amplitudes)


def _scaled_sq(coords, center, radii):
    q = 0.0
    for x, c, r in zip(coords, center, radii):
        q = q + ((x - c) / r) ** 2
    return q


def _bump_profile(q):
    q = np.asarray(q, dtype=float)
    out = np.zeros(q.shape)
    inside = q < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
    return out


def _bump_profile_dq(q):
    q = np.asarray(q, dtype=float)
    out = np.zeros(q.shape)
    inside = q < 1.0
    qi = q[inside]
    out[inside] = -np.exp(1.0 - 1.0 / (1.0 - qi)) / (1.0 - qi) ** 2
    return out


def evaluate(spec: PhantomSpec, coords: Sequence) -> np.ndarray:
    """Phantom value at broadcastable coordinate arrays ``coords`` (t last)."""
    if len(coords) != spec.ndim:
        raise PhantomError(f"expected {spec.ndim} coordinate arrays, got {len(coords)}")
    total = 0.0
    for center, radii, amp in spec.components():
        q = np.asarray(_scaled_sq(coords, center, radii), dtype=float)
        if spec.kind == "bump":
            total = total + amp * _bump_profile(q)
        else:
            total = total + amp * np.where(q < GAUSSIAN_EXTENT ** 2, np.exp(-0.5 * q), 0.0)
    return np.asarray(total, dtype=float)


def evaluate_dt(spec: PhantomSpec, coords: Sequence) -> np.ndarray:
    """Analytic t-derivative of the phantom."""
    t = coords[-1]
    total = 0.0
    for center, radii, amp in spec.components():
        q = np.asarray(_scaled_sq(coords, center, radii), dtype=float)
        dq_dt = 2.0 * (t - center[-1]) / radii[-1] ** 2
        if spec.kind == "bump":
            total = total + amp * _bump_profile_dq(q) * dq_dt
        else:
            inside = q < GAUSSIAN_EXTENT ** 2
            total = total + amp * (-0.5) * np.where(inside, np.exp(-0.5 * q), 0.0) * dq_dt
    return np.asarray(total, dtype=float)


def check_fits(spec: PhantomSpec, grid: GridSpec, margin_cells: int = 1):
    """Raise unless the phantom's support sits inside the grid with a margin."""
    if spec.ndim != grid.spatial_dim + 1:
        raise PhantomError(f"phantom has {spec.ndim} axes, grid has {grid.spatial_dim + 1}")
    for i in range(spec.ndim):
        lo, hi = spec.extent(i)
        pad = margin_cells * grid.spacing[i]
        if lo < grid.origin[i] + pad or hi > grid.upper(i) - pad:
            raise PhantomError(
                f"phantom extent [{lo:.4g}, {hi:.4g}] on axis {i} does not fit "
                f"[{grid.origin[i]:.4g}, {grid.upper(i):.4g}] with {margin_cells} guard cells")


def render_phantom(spec: PhantomSpec, grid: GridSpec, check: bool = True) -> ScalarField:
    if check:
        check_fits(spec, grid)
    return ScalarField(grid, np.broadcast_to(evaluate(spec, grid.mesh()), grid.shape))


def render_phantom_dt(spec: PhantomSpec, grid: GridSpec) -> ScalarField:
    return ScalarField(grid, np.broadcast_to(evaluate_dt(spec, grid.mesh()), grid.shape))


def bump(center, radius, amplitude: float = 1.0) -> PhantomSpec:
    return PhantomSpec("bump", (tuple(center),), (radius,), (amplitude,))


def default_scene(m: int, count: int = None, t_count: int = None):
    """Standard bump phantom and grid used by the CLI defaults and acceptance runs.

    The phantom is a unit-radius bump centred at the origin. Spatial and
    t spacings are equal, the choice under which the 3-point box stencil
    matches the pi/4 cone best. For ``m = 2`` the bump sits in the upper part
    of the t-window so that its cone shadow (which the weighted transform
    needs) stays short; see :func:`crtkit.cone.shadow_padding`.
    """
    if m == 1:
        n = count or 256
        nt = t_count or n
        spec = bump((0.0, 0.0), 1.0)
        grid = GridSpec.from_bounds((-3.0, -1.5), (3.0, 4.5), (n, nt))
    elif m == 2:
        n = count or 96
        nt = t_count or int(round(4 * n / 3))
        h = 2.96875 / (n - 1)
        spec = bump((0.0, 0.0, 0.0), 1.0)
        top = 1.0 + 3 * h
        grid = GridSpec((n, n, nt), (h, h, h), (-1.484375, -1.484375, top - (nt - 1) * h))
    elif m == 3:
        n = count or 64
        h = 3.2 / (n - 1)
        nt = t_count or int(round(2.6 / h)) + 1
        spec = bump((0.0, 0.0, 0.0, 0.0), 1.0)
        grid = GridSpec((n, n, n, nt), (h,) * 4, (-1.6, -1.6, -1.6, -1.3))
    else:
        raise PhantomError(f"no default scene for m = {m}")
    return spec, grid
