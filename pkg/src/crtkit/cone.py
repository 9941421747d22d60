"""
Direct-quadrature conical Radon transform for axis-aligned cones.

All cones open along +t with half-opening angle ``phi``. The transform is the
convolution

    g(x, t) = sum_y f(x - y, t - cot(phi) |y|) * dy^m

over the spatial grid offsets ``y``. This is the slow, trusted path; the
Fourier-multiplier path lives in :mod:`crtkit.spectral`.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma, gammaincc

from .field import GridSpec, ScalarField, pad_field

logger = logging.getLogger(__name__)


class ConeError(ValueError):
    pass


class PaddingError(ConeError):
    """The input support sits too close to a grid face."""


@dataclass(frozen=True)
class ConeParams:
    """Half-opening angle of cones whose axis is the t-direction."""

    phi: float = math.pi / 4

    def __post_init__(self):
        phi = float(self.phi)
        if not (0.0 < phi < math.pi / 2) or not math.isfinite(phi):
            raise ConeError(f"half-opening angle must lie strictly in (0, pi/2), got {phi}")
        object.__setattr__(self, "phi", phi)

    @property
    def tan(self) -> float:
        return math.tan(self.phi)

    @property
    def cot(self) -> float:
        return 1.0 / math.tan(self.phi)

    @property
    def sin(self) -> float:
        return math.sin(self.phi)


@dataclass(frozen=True)
class QuadratureSpec:
    """Interpolation order used for off-grid t samples (1 linear, 3 cubic)."""

    order: int = 1

    def __post_init__(self):
        if self.order not in (1, 3):
            raise ConeError(f"interpolation order must be 1 or 3, got {self.order}")


def lattice_zeta(s: float, spacing) -> float:
    """Epstein zeta sum'_{v in L} |v|^(-2s) of the rectangular lattice ``spacing * Z^m``.

    Evaluated with the Ewald split on the lattice rescaled to unit cell
    volume; both real- and reciprocal-space sums converge like exp(-pi n^2).
    """
    h = np.asarray(spacing, dtype=float)
    m = h.size
    if s <= 0 or 2 * s == m or float(m / 2.0 - s).is_integer() and s > m / 2.0:
        raise ValueError("lattice_zeta needs 0 < s with m/2 - s not a non-positive integer")
    cell = float(np.prod(h))
    unit = cell ** (1.0 / m)
    a = h / unit
    nmax = int(math.ceil(6.0 / min(a.min(), (1.0 / a).min()))) + 2
    rng = np.arange(-nmax, nmax + 1, dtype=float)
    grids = np.meshgrid(*([rng] * m), indexing="ij")
    v2 = sum((a[i] * grids[i]) ** 2 for i in range(m)).ravel()
    w2 = sum((grids[i] / a[i]) ** 2 for i in range(m)).ravel()
    v2 = v2[v2 > 0]
    w2 = w2[w2 > 0]

    def upper_gamma(p, x):
        if p > 0:
            return gammaincc(p, x) * gamma(p)
        # Gamma(p, x) = (Gamma(p + 1, x) - x^p e^-x) / p for p < 0
        return (upper_gamma(p + 1, x) - x ** p * np.exp(-x)) / p

    total = -1.0 / s + 1.0 / (s - m / 2.0)
    total += np.sum(upper_gamma(s, np.pi * v2) * (np.pi * v2) ** (-s))
    total += np.sum(upper_gamma(m / 2.0 - s, np.pi * w2) * (np.pi * w2) ** (s - m / 2.0))
    return float(total * np.pi ** s / gamma(s) * unit ** (-2.0 * s))


@lru_cache(maxsize=64)
def vertex_weight(spacing: tuple) -> float:
    """Quadrature weight of the y = 0 cell for the integrand F(y)/|y|.

    With the lattice sum over y != 0 the rectangle rule carries an error
    ``cell * Z(1/2) * F(0)`` (Z the lattice zeta). Giving the origin the
    weight ``-cell * Z(1/2)`` cancels it, leaving an O(h^(m+1)) error.
    """
    cell = float(np.prod(spacing))
    return -cell * lattice_zeta(0.5, spacing)


def _interp_weights(frac: float, order: int):
    """Weights on samples (b-1, b, b+1, b+2) for the position b + frac."""
    u = frac
    if order == 1:
        return (0.0, 1.0 - u, u, 0.0)
    return (-u * (u - 1.0) * (u - 2.0) / 6.0,
            (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
            -(u + 1.0) * u * (u - 2.0) / 2.0,
            (u + 1.0) * u * (u - 1.0) / 6.0)


def _offset_ranges(src_box, counts_x):
    """Spatial offsets j for which source box + j intersects the grid."""
    ranges = []
    for (lo, hi), n in zip(src_box, counts_x):
        ranges.append(range(-hi, n - lo))
    return ranges


def _shift_slices(box, j, counts):
    """Slices (into out, into the cropped source) for the spatial offset j."""
    dst_sl, src_sl = [], []
    for (lo, hi), ji, n in zip(box, j, counts):
        a = max(lo + ji, 0)
        b = min(hi + ji, n - 1)
        if a > b:
            return None
        dst_sl.append(slice(a, b + 1))
        src_sl.append(slice(a - lo - ji, b - lo - ji + 1))
    return tuple(dst_sl), tuple(src_sl)


def _accumulate_shift(out, src, dst_sl, src_sl, shift, weight, order):
    """out[dst, q] += weight * src[src, q - shift] with interpolation along t.

    ``out`` and ``src`` share their t-axis (row 0 of both is the same time).
    """
    nt = src.shape[-1]
    n0 = int(math.floor(shift))
    theta = shift - n0
    if theta < 1e-12:
        theta = 0.0
    elif theta > 1.0 - 1e-12:
        n0 += 1
        theta = 0.0
    if n0 >= nt:
        return
    out_rows = out[dst_sl]
    src_rows = src[src_sl]
    if theta == 0.0:
        out_rows[..., n0:] += weight * src_rows[..., :nt - n0]
        return

    # position q - n0 - theta = b + u with b = q - n0 - 1, u = 1 - theta
    u = 1.0 - theta
    w = _interp_weights(u, order)
    q_lo = n0 + 1  # first output row with b >= 0; row n0 only sees sample b+1 = 0
    if order == 1 or nt - n0 < 6:
        out_rows[..., n0] += weight * w[2] * src_rows[..., 0]
        if q_lo < nt:
            out_rows[..., q_lo:] += weight * (w[1] * src_rows[..., 0:nt - q_lo]
                                              + w[2] * src_rows[..., 1:nt - n0])
        return
    # cubic: samples b-1..b+2 = q-n0-2 .. q-n0+1; below-grid samples are zero,
    # rows whose b+2 leaves the grid fall back to linear interpolation
    lin = _interp_weights(u, 1)
    q_cubic_end = min(nt, nt - 1 + n0)  # rows below this keep b+2 inside the grid
    out_rows[..., n0] += weight * (w[2] * src_rows[..., 0] + w[3] * src_rows[..., 1])
    q = n0 + 1
    if q < q_cubic_end:
        out_rows[..., q] += weight * (w[1] * src_rows[..., 0] + w[2] * src_rows[..., 1]
                                      + w[3] * src_rows[..., 2])
    q0 = n0 + 2
    if q0 < q_cubic_end:
        k = q_cubic_end - q0
        out_rows[..., q0:q_cubic_end] += weight * (
            w[0] * src_rows[..., 0:k] + w[1] * src_rows[..., 1:k + 1]
            + w[2] * src_rows[..., 2:k + 2] + w[3] * src_rows[..., 3:k + 3])
    for q in range(max(q_cubic_end, n0 + 1), nt):
        b = q - n0 - 1
        out_rows[..., q] += weight * (lin[1] * src_rows[..., b] + lin[2] * src_rows[..., b + 1])


def _nonzero_box(values):
    mask = values != 0.0
    if not mask.any():
        return None
    box = []
    for ax in range(values.ndim):
        other = tuple(i for i in range(values.ndim) if i != ax)
        hit = np.flatnonzero(mask.any(axis=other))
        box.append((int(hit[0]), int(hit[-1])))
    return box


def check_padding(f: ScalarField, guard: int = 1, spatial: bool = True):
    """Raise :class:`PaddingError` if f is nonzero within ``guard`` cells of a face.

    The t-maximum face is never checked: the transform looks only backwards
    in t. ``spatial=False`` restricts the check to the t-minimum face.
    """
    box = _nonzero_box(f.values)
    if box is None:
        return
    grid = f.grid
    m = grid.spatial_dim
    lo_t = box[m][0]
    if lo_t < guard:
        need = guard - lo_t
        raise PaddingError(
            f"support starts {lo_t} samples above the t-minimum; prepend at least "
            f"{need} t-samples ({need * grid.dt:.4g} in t) of zero padding")
    if spatial:
        for i in range(m):
            lo, hi = box[i]
            gap = min(lo, grid.counts[i] - 1 - hi)
            if gap < guard:
                need = guard - gap
                raise PaddingError(
                    f"support reaches within {gap} samples of the faces of spatial axis {i}; "
                    f"pad that axis by at least {need} samples ({need * grid.spacing[i]:.4g}) per side")


def _cone_sum(f: ScalarField, cone: ConeParams, order: int, weighted: bool) -> np.ndarray:
    grid = f.grid
    m = grid.spatial_dim
    out = np.zeros(grid.shape)
    box = _nonzero_box(f.values)
    if box is None:
        return out
    hx = np.asarray(grid.spacing[:m])
    ht = grid.dt
    nt = grid.counts[-1]
    cell = float(np.prod(hx))
    t0 = box[m][0]
    # work only on the source's support box; both arrays start at row t0
    src = np.ascontiguousarray(f.values[tuple(slice(a, b + 1) for a, b in box[:m]) + (slice(t0, nt),)])
    dst = out[..., t0:]
    max_shift = nt - 1 - t0
    max_radius = (max_shift + 1) * ht * cone.tan
    ranges = _offset_ranges(box[:m], grid.counts[:m])
    vw = vertex_weight(tuple(hx)) if weighted else None
    used = 0
    for j in itertools.product(*ranges):
        r = math.sqrt(sum((ji * h) ** 2 for ji, h in zip(j, hx)))
        if r > max_radius:
            continue
        shift = cone.cot * r / ht
        if shift > max_shift + 1:
            continue
        sl = _shift_slices(box[:m], j, grid.counts[:m])
        if sl is None:
            continue
        if weighted:
            weight = cone.sin * (vw if r == 0.0 else cell / r)
        else:
            weight = cell
        _accumulate_shift(dst, src, sl[0], sl[1], shift, weight, order)
        used += 1
    logger.debug("cone sum used %d spatial offsets", used)
    return out


def forward_crt(f: ScalarField, cone: ConeParams = ConeParams(),
                quad: QuadratureSpec = QuadratureSpec(), *,
                surface_measure: bool = False, flip: bool = False,
                check: bool = True) -> ScalarField:
    """Conical Radon transform of f by direct quadrature on its own grid.

    Parameters
    ----------
    f : ScalarField
        Input sampled on ``m`` spatial axes (m <= 3) plus t. Must vanish
        below the grid's t-minimum and outside its spatial window.
    cone : ConeParams
        Half-opening angle.
    quad : QuadratureSpec
        Interpolation order for the off-grid samples ``f(., t - cot|y|)``.
    surface_measure : bool
        Multiply by ``1/sin(phi)`` so the result integrates against surface
        measure on the cone instead of ``dy``.
    flip : bool
        Use cones opening towards -t (reverses the kernel's t orientation).
    check : bool
        Verify the guard margin around the support first.

    Returns
    -------
    ScalarField on the same grid.
    """
    if flip:
        rev = f.with_values(f.values[..., ::-1])
        out = forward_crt(rev, cone, quad, surface_measure=surface_measure, check=check)
        return out.with_values(out.values[..., ::-1])
    if check:
        check_padding(f)
    out = _cone_sum(f, cone, quad.order, weighted=False)
    if surface_measure:
        out /= cone.sin
    return f.with_values(out)


def weighted_forward_crt(f: ScalarField, cone: ConeParams = ConeParams(),
                         quad: QuadratureSpec = QuadratureSpec(), *,
                         check: bool = True) -> ScalarField:
    """Cone transform with weight ``|(y, t)|^-1 = sin(phi)/|y|`` on the cone.

    The y = 0 cell uses the lattice-sum vertex weight from
    :func:`vertex_weight`. Only defined for ``m >= 2``.
    """
    if f.spatial_dim == 1:
        raise ConeError("weight non-integrable in one spatial dimension")
    if check:
        check_padding(f, spatial=False)
    return f.with_values(_cone_sum(f, cone, quad.order, weighted=True))


def cone_reach(grid: GridSpec, cone: ConeParams) -> float:
    """t-extent a cone needs to sweep the spatial diagonal of ``grid``."""
    m = grid.spatial_dim
    diameter = math.sqrt(sum((grid.upper(i) - grid.origin[i]) ** 2 for i in range(m)))
    return cone.cot * diameter


def pad_t(f: ScalarField, below: int = 0, above: int = 0) -> ScalarField:
    """Zero-pad the t-axis."""
    widths = [(0, 0)] * f.grid.spatial_dim + [(below, above)]
    return pad_field(f, widths)


def shadow_padding(f: ScalarField, cone: ConeParams = ConeParams(), above: int = 0,
                   guard: int = 2, tol: float = 0.0) -> list:
    """Pad widths that keep the cone shadow of f's support inside the grid.

    After appending ``above`` t-samples, every spatial axis is widened so
    that the support dilated by ``tan(phi) * (t_max - t_support_min)``
    still sits ``guard`` samples away from the faces. Needed whenever the
    forward data is processed further by operators that look sideways
    (the weighted transform, spatial finite differences).
    """
    grid = f.grid
    m = grid.spatial_dim
    box = _nonzero_box(np.where(np.abs(f.values) > tol, f.values, 0.0))
    if box is None:
        return [(0, 0)] * m + [(0, above)]
    t_top = grid.upper(m) + above * grid.dt
    reach = cone.tan * (t_top - grid.t[box[m][0]])
    widths = []
    for i in range(m):
        cells = int(math.ceil(reach / grid.spacing[i] - 1e-9)) + guard
        lo, hi = box[i]
        widths.append((max(0, cells - lo), max(0, cells - (grid.counts[i] - 1 - hi))))
    widths.append((0, above))
    return widths
