"""
Brute-force reference values computed straight from analytic phantoms.

Nothing here touches the grid machinery of :mod:`crtkit.cone`; the only
shared code is the phantom definition. Every oracle runs its quadrature at
two resolutions and refuses to answer unless they agree.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.integrate import quad, romb
from scipy.special import gamma, j0

from .phantoms import PhantomSpec, evaluate

GATE_TOL = 1e-8
_CHUNK = 512


class OracleConvergenceError(RuntimeError):
    """A quadrature refinement changed the answer by more than the gate allows."""


def _romb_on(fun, a: float, b: float, level: int):
    """Romberg integral of ``fun`` (vectorized over its first argument) on [a, b]."""
    n = 2 ** level + 1
    r = np.linspace(a, b, n)
    vals = np.concatenate([fun(r[i:i + _CHUNK]) for i in range(0, n, _CHUNK)])
    return romb(vals, dx=(b - a) / (n - 1), axis=0)


def _radial_kernel(m: int, omega: float, tau: float):
    if m == 1:
        return lambda r: 2.0 * np.cos(omega * r) * np.exp(-tau * r)
    if m == 2:
        return lambda r: 2.0 * np.pi * j0(omega * r) * np.exp(-tau * r) * r
    if m == 3:
        # 4 pi sinc(omega r) r^2, written without the removable 0/0
        return lambda r: 4.0 * np.pi * np.sinc(omega * r / np.pi) * np.exp(-tau * r) * r * r
    raise ValueError(f"oracle_symbol supports m in 1..3, got {m}")


def oracle_symbol(omega: float, tau: float, m: int, level: int = 14) -> float:
    """Damped radial integral of the cone kernel, i.e. its symbol at sigma = -i tau.

    Integrates ``(angular kernel)(omega r) exp(-tau r) r^(m-1)`` over
    ``[0, 40/tau]`` with Romberg's rule and checks it against the next
    refinement level.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    fun = _radial_kernel(m, float(omega), float(tau))
    end = 40.0 / tau
    coarse = _romb_on(fun, 0.0, end, level)
    fine = _romb_on(fun, 0.0, end, level + 1)
    if abs(fine - coarse) > GATE_TOL * max(abs(fine), 1e-300):
        raise OracleConvergenceError(
            f"symbol oracle m={m}, omega={omega}, tau={tau}: levels differ by {abs(fine - coarse):.3g}")
    return float(fine)


def sphere_area(m: int) -> float:
    """Surface area of the unit sphere in R^m (2 for m = 1)."""
    return 2.0 * math.pi ** (m / 2.0) / gamma(m / 2.0)


def phantom_integral(spec: PhantomSpec) -> float:
    """Integral of the phantom over all of R^(m+1), by 1-D radial quadrature."""
    d = spec.ndim
    if spec.kind == "bump":
        radial, _ = quad(lambda r: math.exp(1.0 - 1.0 / (1.0 - r * r)) * r ** (d - 1)
                         if r < 1.0 else 0.0, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    else:
        radial = 2.0 ** (d / 2.0 - 1.0) * gamma(d / 2.0)
    total = 0.0
    for _, radii, amp in spec.components():
        total += amp * float(np.prod(radii)) * sphere_area(d) * radial
    return float(total)


def _reach(spec: PhantomSpec, x: np.ndarray, t: float, phi: float) -> float:
    """Radius beyond which the backward cone from (x, t) misses the support."""
    m = spec.spatial_dim
    t_lo, _ = spec.extent(m)
    r_time = math.tan(phi) * (t - t_lo)
    far = 0.0
    for i in range(m):
        lo, hi = spec.extent(i)
        far += max(abs(x[i] - lo), abs(x[i] - hi)) ** 2
    return min(r_time, math.sqrt(far))


def _cone_integral(spec: PhantomSpec, x, t, phi, level, n_ang):
    m = spec.spatial_dim
    cot = 1.0 / math.tan(phi)
    rmax = _reach(spec, x, t, phi)
    if rmax <= 0.0:
        return 0.0
    if m == 1:
        def fun(r):
            tt = t - cot * r
            return evaluate(spec, [x[0] - r, tt]) + evaluate(spec, [x[0] + r, tt])
    elif m == 2:
        theta = 2.0 * np.pi * np.arange(n_ang) / n_ang
        c, s = np.cos(theta), np.sin(theta)

        def fun(r):
            r = r[:, None]
            vals = evaluate(spec, [x[0] - r * c, x[1] - r * s, t - cot * r])
            return vals.mean(axis=1) * 2.0 * np.pi * r[:, 0]
    else:
        mu, wmu = np.polynomial.legendre.leggauss(n_ang // 2)
        psi = 2.0 * np.pi * np.arange(n_ang) / n_ang
        sin_t = np.sqrt(1.0 - mu ** 2)
        dirs = np.stack([np.outer(sin_t, np.cos(psi)), np.outer(sin_t, np.sin(psi)),
                         np.outer(mu, np.ones_like(psi))])
        weights = np.outer(wmu, np.full(psi.size, 2.0 * np.pi / psi.size))

        def fun(r):
            r = r[:, None, None]
            vals = evaluate(spec, [x[0] - r * dirs[0], x[1] - r * dirs[1], x[2] - r * dirs[2],
                                   t - cot * r])
            return np.sum(vals * weights, axis=(1, 2)) * r[:, 0, 0] ** 2
    return float(_romb_on(fun, 0.0, rmax, level))


def oracle_forward_crt(spec: PhantomSpec, points: Sequence, phi: float = math.pi / 4,
                       refinement: int = 8, tol: float = GATE_TOL) -> np.ndarray:
    """Cone integrals ``int f(x - y, t - cot(phi)|y|) dy`` at the given points.

    Parameters
    ----------
    points : sequence of (x_1, ..., x_m, t)
    refinement : int
        Sets the base resolution: about ``256 * refinement`` radial intervals
        (rounded up to a power of two) and ``32 * refinement`` angular
        nodes. The answer is accepted only if doubling both changes it by
        less than ``tol`` relative to the largest value in the batch.
    """
    m = spec.spatial_dim
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != m + 1:
        raise ValueError(f"points need {m + 1} coordinates, got {pts.shape[1]}")
    level = 8 + int(math.ceil(math.log2(max(int(refinement), 1))))
    n_ang = 32 * int(refinement)
    coarse = np.array([_cone_integral(spec, p[:m], p[m], phi, level, n_ang) for p in pts])
    fine = np.array([_cone_integral(spec, p[:m], p[m], phi, level + 1, 2 * n_ang) for p in pts])
    scale = max(float(np.abs(fine).max()), 1e-300)
    gap = float(np.abs(fine - coarse).max())
    if gap > tol * scale:
        raise OracleConvergenceError(
            f"forward oracle did not settle: refinement changed values by {gap / scale:.3g} relative")
    return fine
