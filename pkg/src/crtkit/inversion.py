"""
Inversion of the cone transform and numerical range checks.

Even total dimension (m = 2k - 1 spatial axes): the box power ``k`` applied
to forward data is a multiple of ``f_t``. Odd total dimension (m = 2k):
the weighted transform has to be applied first and the box power doubles.
Integrating the filtered field in t recovers f.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cone import ConeParams, QuadratureSpec, forward_crt, weighted_forward_crt
from .dalembertian import apply_box
from .field import (ScalarField, SupportBox, bottom_slab_clean, cumulative_t_integral,
                    detect_halfspace, detect_support, interior, linf_norm, partial_t, scale,
                    total_t_integral)
from .spectral import QUARTER, even_constant, odd_constant

logger = logging.getLogger(__name__)

EVEN = "even"
ODD = "odd"
SHELL_CELLS = 2


class DimensionError(ValueError):
    pass


def parity_of(m: int) -> str:
    """Parity of the total dimension m + 1."""
    return EVEN if (m + 1) % 2 == 0 else ODD


def natural_k(m: int) -> int:
    return (m + 1) // 2 if parity_of(m) == EVEN else m // 2


def _resolve_k(m: int, parity: str, k: Optional[int]) -> int:
    if parity not in (EVEN, ODD):
        raise DimensionError(f"parity must be 'even' or 'odd', got {parity!r}")
    if parity != parity_of(m):
        raise DimensionError(f"m = {m} spatial axes give {parity_of(m)} total dimension, not {parity}")
    want = natural_k(m)
    if k is not None and int(k) != want:
        expected = "2k - 1" if parity == EVEN else "2k"
        raise DimensionError(f"k = {k} needs m = {expected}, but the field has m = {m}")
    return want


def default_tolerance(f: ScalarField) -> float:
    """max(10 h^2, 1e-6), h the largest spacing."""
    return max(10.0 * f.grid.max_spacing ** 2, 1e-6)


def _to_quarter(g: ScalarField, phi: float) -> ScalarField:
    # x' = cot(phi) x turns a phi-cone into a pi/4 cone
    return g.regrid(g.grid.rescaled_spatial(1.0 / math.tan(phi)))


def invert_even(g: ScalarField, phi: float = QUARTER, k: Optional[int] = None) -> ScalarField:
    """Recover f from ``g = C_phi[f]`` when the total dimension is even.

    Returns ``c^-1 * int_{t_min}^t box_phi^k g dz`` with
    ``c = tan^m(phi) (-1)^k alpha(m)``.
    """
    m = g.spatial_dim
    k = _resolve_k(m, EVEN, k)
    c = even_constant(m, phi)
    return scale(cumulative_t_integral(apply_box(g, phi, k)), 1.0 / c)


def odd_filtered(g: ScalarField, phi: float = QUARTER, quad: QuadratureSpec = QuadratureSpec(),
                 check: bool = True) -> ScalarField:
    """``box^{2k} C'[g]`` in pi/4 coordinates, divided by tan^m(phi) and mapped back."""
    m = g.spatial_dim
    k = _resolve_k(m, ODD, None)
    work = g if phi == QUARTER else _to_quarter(g, phi)
    filtered = apply_box(weighted_forward_crt(work, ConeParams(QUARTER), quad, check=check),
                         QUARTER, 2 * k)
    if phi != QUARTER:
        filtered = scale(filtered, math.tan(phi) ** -m).regrid(g.grid)
    return filtered


def invert_odd(g: ScalarField, phi: float = QUARTER, k: Optional[int] = None,
               quad: QuadratureSpec = QuadratureSpec()) -> ScalarField:
    """Recover f from ``g = C_phi[f]`` when the total dimension is odd.

    At ``phi = pi/4`` this is ``kappa^-1 * int box^{2k} C'[g] dz`` with
    ``kappa = alpha(2k) beta(2k)``. Other angles are mapped to pi/4 by
    stretching the spatial axes (only the spacing changes, the samples stay).

    The weighted transform looks sideways along the whole cone, so ``g``
    must be given wherever it is nonzero below the grid's t-maximum; pad
    with :func:`crtkit.cone.shadow_padding` before the forward transform.
    """
    m = g.spatial_dim
    if m == 1:
        raise DimensionError("odd-dimension inversion needs m >= 2 (weight non-integrable for m = 1)")
    _resolve_k(m, ODD, k)
    return scale(cumulative_t_integral(odd_filtered(g, phi, quad)), 1.0 / odd_constant(m))


def invert(g: ScalarField, phi: float = QUARTER, quad: QuadratureSpec = QuadratureSpec()):
    """Pick the even or odd inversion from the number of spatial axes."""
    if parity_of(g.spatial_dim) == EVEN:
        return invert_even(g, phi)
    return invert_odd(g, phi, quad=quad)


@dataclass(frozen=True)
class RangeReport:
    """Residuals and verdicts of the three range conditions for one data set.

    ``cond3_t0`` is None when the lowest t-slab is already above tolerance,
    so no half-space can be certified inside the window.
    """

    parity: str
    k: int
    phi: float
    tol: float
    cond1_residual: float
    cond2_residual: float
    cond3_t0: Optional[float]
    support_box: Optional[SupportBox]
    bottom_clean: bool
    counts: tuple
    spacing: tuple
    origin: tuple = field(default=())

    @property
    def cond1_pass(self) -> bool:
        return self.cond1_residual <= self.tol

    @property
    def cond2_pass(self) -> bool:
        return self.cond2_residual <= self.tol

    @property
    def cond3_pass(self) -> bool:
        return self.cond3_t0 is not None and self.bottom_clean

    @property
    def passed(self) -> bool:
        return self.cond1_pass and self.cond2_pass and self.cond3_pass

    def as_dict(self) -> dict:
        return {
            "parity": self.parity,
            "k": self.k,
            "phi": repr(self.phi),
            "cond1_residual": f"{self.cond1_residual:.17g}",
            "cond2_residual": f"{self.cond2_residual:.17g}",
            "cond3_t0": "violated" if self.cond3_t0 is None else f"{self.cond3_t0:.17g}",
            "cond1_pass": str(self.cond1_pass).lower(),
            "cond2_pass": str(self.cond2_pass).lower(),
            "cond3_pass": str(self.cond3_pass).lower(),
            "tol": f"{self.tol:.17g}",
            "counts": ",".join(str(c) for c in self.counts),
            "spacing": ",".join(repr(h) for h in self.spacing),
            "origin": ",".join(repr(o) for o in self.origin),
            "bottom_clean": str(self.bottom_clean).lower(),
            "support_lo": "" if self.support_box is None else ",".join(map(str, self.support_box.lo)),
            "support_hi": "" if self.support_box is None else ",".join(map(str, self.support_box.hi)),
        }

    def to_keyvalue(self) -> str:
        return "".join(f"{key}={value}\n" for key, value in self.as_dict().items())

    def to_text(self) -> str:
        def mark(ok):
            return "PASS" if ok else "FAIL"
        t0 = "violated" if self.cond3_t0 is None else f"{self.cond3_t0:.6g}"
        box = ("none" if self.support_box is None
               else f"{list(self.support_box.lo)}..{list(self.support_box.hi)}")
        lines = [
            f"range check ({self.parity} total dimension, k={self.k}, phi={self.phi:.6g})",
            f"  grid {self.counts} spacing {tuple(round(h, 6) for h in self.spacing)}",
            f"  tolerance {self.tol:.3g}",
            f"  (1) compact support   residual {self.cond1_residual:.3e}  box {box}  "
            f"{mark(self.cond1_pass)}",
            f"  (2) zero t-integral   residual {self.cond2_residual:.3e}  {mark(self.cond2_pass)}",
            f"  (3) half-space        t0 {t0}  bottom slab clean: {self.bottom_clean}  "
            f"{mark(self.cond3_pass)}",
            f"  verdict: {'in range' if self.passed else 'NOT in range'}",
        ]
        return "\n".join(lines) + "\n"


def filtered_data(g: ScalarField, phi: float = QUARTER, parity: Optional[str] = None,
                  quad: QuadratureSpec = QuadratureSpec()):
    """The field whose support and t-integral the range conditions constrain.

    Returns ``(F, depth)``; samples closer than ``depth`` to a face are
    touched by one-sided stencils and are left out of the checks.
    """
    m = g.spatial_dim
    parity = parity or parity_of(m)
    k = _resolve_k(m, parity, None)
    if parity == EVEN:
        return apply_box(g, phi, k), k
    return odd_filtered(g, phi, quad, check=False), 2 * k


def check_range(g: ScalarField, phi: float = QUARTER, parity: Optional[str] = None,
                k: Optional[int] = None, tol: Optional[float] = None,
                quad: QuadratureSpec = QuadratureSpec()) -> RangeReport:
    """Test the three range conditions on sampled data ``g``.

    (1) the filtered field vanishes, relative to its maximum, on a shell of
        two samples inside the region where the stencils are centred;
    (2) its t-integral vanishes, relative to the largest l1 norm in t;
    (3) g itself vanishes below some t0 inside the window.

    Never raises on a failed condition; the report carries the verdicts.
    """
    m = g.spatial_dim
    parity = parity or parity_of(m)
    k = _resolve_k(m, parity, k)
    tol = default_tolerance(g) if tol is None else float(tol)
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    F, depth = filtered_data(g, phi, parity, quad)
    valid = F.values[interior(F.grid, depth)]
    peak = float(np.abs(valid).max()) if valid.size else 0.0

    if peak == 0.0:
        cond1, cond2, box = 0.0, 0.0, None
    else:
        core = np.abs(valid).copy()
        core[tuple(slice(SHELL_CELLS, n - SHELL_CELLS) for n in core.shape)] = 0.0
        cond1 = float(core.max()) / peak
        sub = ScalarField(F.grid.with_counts(valid.shape), valid)
        box = detect_support(sub, tol * peak)
        if box is not None:
            box = SupportBox(tuple(a + depth for a in box.lo), tuple(b + depth for b in box.hi),
                             box.max_abs_outside)
        integral = total_t_integral(sub)
        scale_l1 = float(total_t_integral(sub.with_values(np.abs(valid))).max())
        cond2 = float(np.abs(integral).max()) / scale_l1 if scale_l1 > 0 else 0.0

    g_peak = linf_norm(g)
    if g_peak == 0.0:
        t0, clean = float(g.grid.t[-1]), True
    else:
        t0 = detect_halfspace(g, tol * g_peak, strict=True)
        clean = bottom_slab_clean(g, tol * g_peak)
    report = RangeReport(parity, k, float(phi), tol, cond1, cond2, t0, box, clean,
                         g.grid.counts, g.grid.spacing, g.grid.origin)
    logger.info("range check: cond1 %.3g cond2 %.3g t0 %s", cond1, cond2, t0)
    return report


def fundamental_solution_apply(f: ScalarField, phi: float = QUARTER, parity: Optional[str] = None,
                               k: Optional[int] = None,
                               quad: QuadratureSpec = QuadratureSpec()) -> ScalarField:
    """Convolve f with the causal fundamental solution built from the cone kernel.

    Even parity: ``box_phi^k`` of the result is f. Odd parity: ``box^{2k}``
    of the weighted transform of the result is f (pi/4 only).
    """
    m = f.spatial_dim
    parity = parity or parity_of(m)
    _resolve_k(m, parity, k)
    if parity == EVEN:
        c = even_constant(m, phi)
    else:
        if phi != QUARTER:
            raise DimensionError("the odd fundamental solution is only provided at phi = pi/4")
        c = odd_constant(m)
    return scale(cumulative_t_integral(forward_crt(f, ConeParams(phi), quad)), 1.0 / c)


@dataclass(frozen=True)
class Calibration:
    fitted: float
    closed_form: float

    @property
    def relative_deviation(self) -> float:
        return abs(self.fitted - self.closed_form) / abs(self.closed_form)


def calibrate_constant(f: ScalarField, g: ScalarField, phi: float = QUARTER,
                       depth: int = 3, quad: QuadratureSpec = QuadratureSpec()) -> Calibration:
    """Least-squares scalar between the filtered forward data and ``f_t``.

    ``g`` is the forward transform of ``f``. The fitted value should match
    the closed-form constant; a mismatch points at constant bookkeeping.
    """
    m = f.spatial_dim
    F, _ = filtered_data(g, phi, None, quad)
    ft = partial_t(f)
    sl = interior(f.grid, depth)
    a, b = F.values[sl].ravel(), ft.values[sl].ravel()
    fitted = float(a @ b / (b @ b))
    if parity_of(m) == EVEN:
        closed = even_constant(m, phi)
    else:
        closed = odd_constant(m)
    return Calibration(fitted, closed)
