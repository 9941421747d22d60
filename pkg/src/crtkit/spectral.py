"""
Fourier symbols of the cone kernels and damped FFT multipliers.

Conventions: ``F[f](omega, sigma) = int f(x, t) exp(-i (x.omega + t sigma))``.
Symbols are evaluated at complex ``sigma`` with ``Im sigma < 0``, where the
transforms of causal (half-space supported) kernels are analytic.

Branch rule: for ``W = sigma^2 - tan^2(phi) |omega|^2`` the fractional power
``W^s`` uses ``arg W`` in ``(-2*pi, 0)`` and the constants use
``(-1)^s := exp(-i*pi*s)``. At ``sigma = -i*tau`` this reproduces the
positive damped integrals for every dimension m (checked against
:func:`crtkit.oracles.oracle_symbol`).
"""

from __future__ import annotations

import cmath
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.fft import fftn, ifftn, next_fast_len
from scipy.special import gamma

from .field import ScalarField

logger = logging.getLogger(__name__)

QUARTER = math.pi / 4
IMAG_RESIDUE_LIMIT = 1e-8
_CHUNK_ELEMENTS = 4_000_000


class SymbolDomainError(ValueError):
    pass


_QUARTER_TURNS = (1.0, -1j, -1.0, 1j)


def _minus_one_pow(s: float) -> complex:
    """(-1)^s := exp(-i pi s), exact when 2s is an integer."""
    if float(2 * s).is_integer():
        return _QUARTER_TURNS[int(2 * s) % 4]
    return cmath.exp(-1j * math.pi * s)


def alpha(m: int) -> complex:
    """Constant of the cone-kernel symbol in spatial dimension m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return (_minus_one_pow((m + 1) / 2.0) * 2.0 ** m * math.pi ** ((m - 1) / 2.0)
            * gamma((m + 1) / 2.0))


def beta(m: int) -> complex:
    """Constant of the weighted-kernel symbol; equals alpha(m) / (sqrt(2) (1 - m))."""
    if m == 1:
        raise ZeroDivisionError("beta is undefined for m = 1 (factor 1/(1 - m))")
    if m < 1:
        raise ValueError("m must be >= 1")
    return (math.sqrt(2.0) * _minus_one_pow((m + 1) / 2.0) * 2.0 ** (m - 1) / (1.0 - m)
            * math.pi ** ((m - 1) / 2.0) * gamma((m + 1) / 2.0))


def even_constant(m: int, phi: float = QUARTER) -> float:
    """Real factor c in box_phi^k C_phi[f] = c * f_t for m = 2k - 1."""
    if m % 2 != 1:
        raise ValueError(f"even total dimension needs odd m, got {m}")
    k = (m + 1) // 2
    tan = 1.0 if phi == QUARTER else math.tan(phi)  # math.tan(pi/4) rounds below 1
    c = tan ** m * (-1) ** k * alpha(m)
    return float(c.real)


def odd_constant(m: int) -> float:
    """alpha(m) * beta(m), the real factor of box^{2k} C'[C[f]] = c * f_t for m = 2k."""
    if m % 2 != 0 or m < 2:
        raise ValueError(f"odd total dimension needs even m >= 2, got {m}")
    return float((alpha(m) * beta(m)).real)


def branch_power(w, s: float):
    """W^s with arg W taken in (-2*pi, 0]."""
    w = np.asarray(w, dtype=complex)
    arg = np.angle(w)
    arg = np.where(arg > 0, arg - 2.0 * np.pi, arg)
    return np.abs(w) ** s * np.exp(1j * s * arg)


def _check_sigma(sigma):
    if np.any(np.imag(sigma) >= 0):
        raise SymbolDomainError("symbols are only defined for Im(sigma) < 0")


def _omega_sq(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 0:
        return omega ** 2
    return np.sum(omega ** 2, axis=-1)


@dataclass(frozen=True)
class SymbolEvaluator:
    """Evaluates the cone symbols for spatial dimension m and angle phi.

    ``eps`` is the damping used by :func:`apply_multiplier`; symbols
    themselves take sigma as given.
    """

    m: int
    phi: float = QUARTER
    eps: float = 0.1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0 < self.phi < math.pi / 2:
            raise ValueError("phi must lie in (0, pi/2)")

    @property
    def tan(self) -> float:
        return math.tan(self.phi)

    def D_radial(self, omega_sq, sigma):
        """Cone-kernel symbol as a function of |omega|^2."""
        tan = self.tan
        w = sigma ** 2 - tan * tan * omega_sq
        return tan ** self.m * alpha(self.m) * 1j * sigma / branch_power(w, (self.m + 1) / 2.0)

    def Dprime_radial(self, omega_sq, sigma):
        w = sigma ** 2 - omega_sq
        return beta(self.m) / branch_power(w, (self.m - 1) / 2.0)

    def box_radial(self, omega_sq, sigma, k: int):
        tan = self.tan
        return (-1) ** k * (sigma ** 2 - tan * tan * omega_sq) ** k

    def D(self, omega, sigma):
        sigma = np.asarray(sigma, dtype=complex)
        _check_sigma(sigma)
        return self.D_radial(_omega_sq(omega), sigma)

    def Dprime(self, omega, sigma):
        sigma = np.asarray(sigma, dtype=complex)
        _check_sigma(sigma)
        if self.m < 2:
            raise SymbolDomainError("weighted symbol needs m >= 2")
        if abs(self.phi - QUARTER) > 1e-14:
            raise SymbolDomainError("weighted symbol is only available at phi = pi/4; rescale x first")
        return self.Dprime_radial(_omega_sq(omega), sigma)


def symbol_D(omega, sigma, ev: SymbolEvaluator):
    return ev.D(omega, sigma)


def symbol_Dprime(omega, sigma, ev: SymbolEvaluator):
    return ev.Dprime(omega, sigma)


def box_symbol(omega, sigma, phi: float, k: int):
    """(-1)^k (sigma^2 - tan^2(phi)|omega|^2)^k, the symbol of box_phi^k."""
    tan = math.tan(phi)
    sigma = np.asarray(sigma, dtype=complex)
    return (-1) ** k * (sigma ** 2 - tan * tan * _omega_sq(omega)) ** k


# Multipliers consumed by apply_multiplier take (omega_sq, sigma) meshes.
Multiplier = Callable[[np.ndarray, np.ndarray], np.ndarray]


def D_multiplier(m: int, phi: float = QUARTER) -> Multiplier:
    ev = SymbolEvaluator(m, phi)
    return ev.D_radial


def Dprime_multiplier(m: int) -> Multiplier:
    ev = SymbolEvaluator(m, QUARTER)
    if m < 2:
        raise SymbolDomainError("weighted symbol needs m >= 2")
    return ev.Dprime_radial


def box_multiplier(phi: float, k: int) -> Multiplier:
    tan2 = math.tan(phi) ** 2

    def mult(omega_sq, sigma):
        return (-1) ** k * (sigma ** 2 - tan2 * omega_sq) ** k
    return mult


def default_eps(f: ScalarField) -> float:
    """4 / (t-extent of the grid)."""
    grid = f.grid
    extent = grid.dt * (grid.counts[-1] - 1)
    return 4.0 / extent


@dataclass(frozen=True)
class MultiplierDiagnostics:
    eps: float
    padded_shape: tuple
    imag_residue: float
    linf: float

    @property
    def residue_ok(self) -> bool:
        return self.imag_residue <= IMAG_RESIDUE_LIMIT * max(self.linf, 1e-300)


def _padded_len(n: int, factor: float) -> int:
    # odd lengths have no self-conjugate Nyquist bin, so a real kernel stays real
    size = next_fast_len(max(n, int(math.ceil(n * factor))))
    while size % 2 == 0:
        size = next_fast_len(size + 1)
    return size


def apply_multiplier(f: ScalarField, multiplier: Multiplier, eps: Optional[float] = None,
                     pad: float = 2.0, pad_t: Optional[float] = None,
                     return_diagnostics: bool = False):
    """Apply a Fourier multiplier on the line Im(sigma) = -eps.

    Computes ``exp(eps t) IFFT[multiplier(omega, sigma - i eps) FFT[exp(-eps t) f]]``
    after zero-padding every spatial axis by ``pad`` and the t-axis by
    ``pad_t`` (defaults to ``pad``). The real part is returned; the
    imaginary part is measured and reported.

    Parameters
    ----------
    multiplier : callable
        ``multiplier(omega_sq, sigma)`` evaluated on broadcastable meshes of
        squared spatial frequency and complex temporal frequency.
    """
    grid = f.grid
    m = grid.spatial_dim
    if eps is None:
        eps = default_eps(f)
    if not eps > 0:
        raise ValueError("eps must be positive")
    pad_t = pad if pad_t is None else pad_t
    shape = tuple(_padded_len(n, pad) for n in grid.counts[:m]) + (
        _padded_len(grid.counts[-1], pad_t),)

    tloc = grid.dt * np.arange(grid.counts[-1])
    damp = np.exp(-eps * tloc)
    spectrum = fftn(f.values * damp, s=shape, overwrite_x=True)

    omega_sq = 0.0
    for i in range(m):
        w = 2.0 * np.pi * np.fft.fftfreq(shape[i], d=grid.spacing[i])
        w = w.reshape((-1,) + (1,) * (m - i - 1))
        omega_sq = omega_sq + w ** 2
    sigma = 2.0 * np.pi * np.fft.fftfreq(shape[m], d=grid.dt) - 1j * eps
    # evaluate the symbol a few sigma-planes at a time to bound the temporaries
    per_plane = spectrum[..., 0].size
    step = max(1, _CHUNK_ELEMENTS // per_plane)
    for a in range(0, shape[m], step):
        b = min(a + step, shape[m])
        spectrum[..., a:b] *= multiplier(omega_sq[..., None], sigma[a:b])
    result = ifftn(spectrum, overwrite_x=True)
    del spectrum
    crop = tuple(slice(0, n) for n in grid.counts)
    result = result[crop] * np.exp(eps * tloc)
    real = np.ascontiguousarray(result.real)
    residue = float(np.abs(result.imag).max())
    linf = float(np.abs(real).max())
    diag = MultiplierDiagnostics(float(eps), shape, residue, linf)
    if not diag.residue_ok:
        msg = (f"imaginary residue {residue:.3g} exceeds {IMAG_RESIDUE_LIMIT:g} x linf "
               f"({linf:.3g}); check the branch choice or eps")
        logger.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    out = f.with_values(real)
    if return_diagnostics:
        return out, diag
    return out


def symbol_table(m: int, phi: float, omegas, sigmas):
    """Rows (m, phi, omega, Re sigma, Im sigma, Re D, Im D) for auditing."""
    ev = SymbolEvaluator(m, phi)
    rows = []
    for w in omegas:
        for s in sigmas:
            v = complex(ev.D(float(w), complex(s)))
            rows.append((m, phi, float(w), complex(s).real, complex(s).imag, v.real, v.imag))
    return rows
