"""Quick self-checks: symbol calibration, constants and a small m = 1 pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .cone import forward_crt
from .dalembertian import apply_box
from .field import relative_l2, scale
from .inversion import check_range, invert_even
from .oracles import oracle_symbol
from .phantoms import default_scene, render_phantom, render_phantom_dt
from .spectral import (SymbolEvaluator, alpha, apply_multiplier, beta, box_symbol,
                       even_constant, odd_constant)

CALIBRATION_VALUES = (0.5, 1.0, 2.0, 4.0, 8.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def symbol_calibration_error(m: int) -> float:
    """Worst relative gap between the closed-form symbol and the radial oracle."""
    ev = SymbolEvaluator(m)
    worst = 0.0
    for w in CALIBRATION_VALUES:
        for tau in CALIBRATION_VALUES:
            ref = oracle_symbol(w, tau, m)
            val = complex(ev.D(w, -1j * tau))
            worst = max(worst, abs(val - ref) / abs(ref))
    return worst


def _calibration() -> CheckResult:
    errs = [symbol_calibration_error(m) for m in (1, 2, 3)]
    return CheckResult("symbol calibration m=1..3", max(errs) <= 1e-8,
                       "max rel err " + ", ".join(f"{e:.1e}" for e in errs))


def _constants() -> CheckResult:
    gaps = [abs(beta(m) * math.sqrt(2.0) * (1 - m) - alpha(m)) / abs(alpha(m)) for m in range(2, 7)]
    kappa = abs(alpha(2) * beta(2) - 2 * math.sqrt(2) * math.pi ** 2) / (2 * math.sqrt(2) * math.pi ** 2)
    ok = max(gaps) <= 1e-14 and kappa <= 1e-12
    return CheckResult("alpha/beta identities", ok, f"max gap {max(gaps):.1e}, kappa gap {kappa:.1e}")


def _cancellation() -> CheckResult:
    rng = np.random.default_rng(7)
    worst = 0.0
    for k in (1, 2):
        m = 2 * k - 1
        ev = SymbolEvaluator(m)
        for _ in range(20):
            w = rng.uniform(0, 5, size=m)
            s = rng.uniform(-5, 5) - 1j * rng.uniform(0.1, 3)
            val = box_symbol(w, s, math.pi / 4, k) * ev.D(w, s) / (1j * s)
            worst = max(worst, abs(val - (-1) ** k * alpha(m)) / abs(alpha(m)))
    for k in (1,):
        m = 2 * k
        ev = SymbolEvaluator(m)
        for _ in range(20):
            w = rng.uniform(0, 5, size=m)
            s = rng.uniform(-5, 5) - 1j * rng.uniform(0.1, 3)
            val = box_symbol(w, s, math.pi / 4, 2 * k) * ev.Dprime(w, s) * ev.D(w, s) / (1j * s)
            worst = max(worst, abs(val / odd_constant(m) - 1.0))
    return CheckResult("symbol cancellation", worst <= 1e-10, f"max rel err {worst:.1e}")


def _identity_multiplier() -> CheckResult:
    spec, grid = default_scene(1, 64)
    f = render_phantom(spec, grid)
    out = apply_multiplier(f, lambda w, s: np.ones(np.broadcast_shapes(np.shape(w), np.shape(s))))
    err = relative_l2(out, f)
    return CheckResult("identity multiplier", err <= 1e-10, f"rel l2 {err:.1e}")


def _small_pipeline() -> CheckResult:
    spec, grid = default_scene(1, 128)
    f = render_phantom(spec, grid)
    g = forward_crt(f)
    ident = relative_l2(apply_box(g), scale(render_phantom_dt(spec, grid), even_constant(1)), depth=2)
    back = relative_l2(invert_even(g), f)
    report = check_range(g)
    ok = ident <= 0.05 and back <= 0.02 and report.passed
    return CheckResult("m=1 identity/roundtrip/range (128^2)", ok,
                       f"identity {ident:.2e}, roundtrip {back:.2e}, range {'pass' if report.passed else 'fail'}")


CHECKS: List[Callable[[], CheckResult]] = [
    _calibration, _constants, _cancellation, _identity_multiplier, _small_pipeline,
]


def run_selftest() -> List[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            results.append(check())
        except Exception as exc:  # a crashing check is a failed check
            results.append(CheckResult(check.__name__.lstrip("_"), False, f"raised {exc!r}"))
    return results
