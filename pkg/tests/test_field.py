import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crtkit.field import (GridError, GridSpec, ScalarField, add, bottom_slab_clean, crop_field,
                          cumulative_t_integral, detect_halfspace, detect_support, l2_norm,
                          linf_norm, pad_field, partial_t, relative_l2, scale, subtract,
                          total_t_integral)
from crtkit.phantoms import bump, render_phantom, render_phantom_dt

from conftest import field_from


class TestGridSpec:
    def test_from_bounds_hits_both_ends(self):
        g = GridSpec.from_bounds((-1.0, 2.0), (1.0, 5.0), (5, 7))
        assert g.axis(0)[0] == -1.0
        assert g.axis(0)[-1] == pytest.approx(1.0, abs=1e-15)
        assert g.t[-1] == pytest.approx(5.0, abs=1e-15)
        assert g.spatial_dim == 1

    @pytest.mark.parametrize("counts, spacing", [
        ((3, 8), (0.1, 0.1)),
        ((8, 8), (0.0, 0.1)),
        ((8, 8), (0.1, -1.0)),
        ((8, 8), (0.1, float("nan"))),
    ])
    def test_rejects_bad_axes(self, counts, spacing):
        with pytest.raises(GridError):
            GridSpec(counts, spacing, (0.0, 0.0))

    @pytest.mark.parametrize("ndim", [1, 5])
    def test_rejects_unsupported_dimension(self, ndim):
        with pytest.raises(GridError, match="spatial dimension"):
            GridSpec((4,) * ndim, (1.0,) * ndim, (0.0,) * ndim)

    def test_rejects_overflowing_size(self):
        with pytest.raises(GridError, match="addressable"):
            GridSpec((2 ** 20, 2 ** 20, 2 ** 20, 2 ** 20), (1.0,) * 4, (0.0,) * 4)

    def test_rescaled_spatial_keeps_t(self):
        g = GridSpec((4, 4, 6), (0.5, 0.5, 0.25), (-1.0, -1.0, 0.0))
        r = g.rescaled_spatial(2.0)
        assert r.spacing == (1.0, 1.0, 0.25)
        assert r.origin == (-2.0, -2.0, 0.0)


class TestScalarField:
    def test_values_are_frozen(self, grid2d):
        f = ScalarField.zeros(grid2d)
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0
        with pytest.raises(AttributeError):
            f.grid = grid2d

    def test_rejects_non_finite(self, grid2d):
        vals = np.zeros(grid2d.shape)
        vals[3, 4] = np.inf
        with pytest.raises(GridError, match="finite"):
            ScalarField(grid2d, vals)

    def test_rejects_wrong_size(self, grid2d):
        with pytest.raises(GridError):
            ScalarField(grid2d, np.zeros(10))

    def test_copy_on_construction(self, grid2d):
        vals = np.ones(grid2d.shape)
        f = ScalarField(grid2d, vals)
        vals[:] = 2.0
        assert f.values.max() == 1.0


class TestTIntegrals:
    def test_zero_integrates_to_zero(self, grid2d):
        assert not cumulative_t_integral(ScalarField.zeros(grid2d)).values.any()
        assert not total_t_integral(ScalarField.zeros(grid2d)).any()

    def test_constant_integrand(self):
        g = GridSpec.from_bounds((0.0, 0.0), (1.0, 1.0), (4, 11))
        out = cumulative_t_integral(ScalarField(g, np.ones(g.shape)))
        np.testing.assert_allclose(out.values, np.broadcast_to(g.t - g.t[0], g.shape), atol=1e-15)

    def test_derivative_of_bump_integrates_back(self):
        errs = []
        for n in (64, 128):
            g = GridSpec.from_bounds((-1.5, -1.5), (1.5, 1.5), (n, n))
            spec = bump((0.0, 0.0), 1.0)
            back = cumulative_t_integral(render_phantom_dt(spec, g))
            errs.append(linf_norm(subtract(back, render_phantom(spec, g))))
        assert errs[1] < errs[0] / 3.0
        assert errs[1] < 5e-3

    def test_total_integral_of_derivative_vanishes(self):
        g = GridSpec.from_bounds((-1.5, -1.5), (1.5, 1.5), (96, 96))
        spec = bump((0.0, 0.0), 1.0)
        assert np.abs(total_t_integral(render_phantom_dt(spec, g))).max() < 10 * g.dt ** 2

    def test_total_integral_of_bump_is_positive_at_center(self):
        g = GridSpec.from_bounds((-1.5, -1.5), (1.5, 1.5), (31, 31))
        total = total_t_integral(render_phantom(bump((0.0, 0.0), 1.0), g))
        assert total[15] > 0

    def test_cumulative_then_partial_is_second_order(self):
        errs = []
        for n in (32, 64, 128):
            g = GridSpec.from_bounds((0.0, 0.0), (1.0, 2.0), (8, n))
            f = field_from(g, lambda x, t: np.cos(x) * np.sin(3 * t) + t ** 3 / 5)
            errs.append(relative_l2(partial_t(cumulative_t_integral(f)), f, depth=1))
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        assert all(3.5 <= r <= 4.5 for r in ratios), ratios


class TestPartialT:
    def test_linear_is_exact(self, grid2d):
        f = field_from(grid2d, lambda x, t: 3.0 * t + x)
        np.testing.assert_allclose(partial_t(f).values, 3.0, atol=1e-12)

    def test_constant_gives_zero(self, grid2d):
        f = ScalarField(grid2d, np.full(grid2d.shape, 7.0))
        np.testing.assert_allclose(partial_t(f).values, 0.0, atol=1e-12)

    def test_sine_is_second_order(self):
        errs = []
        for n in (50, 100):
            g = GridSpec.from_bounds((0.0, 0.0), (1.0, 3.0), (4, n))
            f = field_from(g, lambda x, t: np.sin(t) + 0 * x)
            ref = field_from(g, lambda x, t: np.cos(t) + 0 * x)
            errs.append(linf_norm(subtract(partial_t(f), ref)))
        assert errs[1] < errs[0] / 3.5


class TestSupport:
    def test_zero_field_has_no_support(self, grid2d):
        assert detect_support(ScalarField.zeros(grid2d), 1e-12) is None

    def test_ones_fill_grid(self, grid2d):
        box = detect_support(ScalarField(grid2d, np.ones(grid2d.shape)), 1e-12)
        assert box.lo == (0, 0)
        assert box.hi == tuple(n - 1 for n in grid2d.counts)

    def test_bump_box_matches_analytic_ball(self):
        g = GridSpec.from_bounds((-2.0, -2.0, -2.0), (2.0, 2.0, 2.0), (41, 41, 41))
        f = render_phantom(bump((0.3, -0.2, 0.1), 0.7), g)
        box = detect_support(f, 1e-12)
        for i, c in enumerate((0.3, -0.2, 0.1)):
            lo = g.origin[i] + box.lo[i] * g.spacing[i]
            hi = g.origin[i] + box.hi[i] * g.spacing[i]
            assert abs(lo - (c - 0.7)) <= g.spacing[i] + 1e-12
            assert abs(hi - (c + 0.7)) <= g.spacing[i] + 1e-12
        assert box.max_abs_outside <= 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-6, 0.5), st.floats(1e-6, 0.5))
    def test_support_monotone_in_tol(self, a, b):
        lo_tol, hi_tol = sorted((a, b))
        g = GridSpec.from_bounds((-1.5, -1.5), (1.5, 1.5), (31, 31))
        f = render_phantom(bump((0.1, 0.0), 1.0), g)
        small, big = detect_support(f, lo_tol), detect_support(f, hi_tol)
        if big is None:
            return
        assert all(s <= b_ for s, b_ in zip(small.lo, big.lo))
        assert all(s >= b_ for s, b_ in zip(small.hi, big.hi))

    def test_halfspace_of_late_support(self):
        g = GridSpec.from_bounds((-1.0, 0.0), (1.0, 5.0), (21, 101))
        f = render_phantom(bump((0.0, 3.0), (0.8, 1.0)), g)
        t0 = detect_halfspace(f, 1e-12)
        assert t0 >= 2.0 - g.dt

    def test_halfspace_of_zero_is_tmax(self, grid2d):
        assert detect_halfspace(ScalarField.zeros(grid2d), 1e-12) == grid2d.t[-1]

    def test_dirty_bottom_slab(self, grid2d):
        f = ScalarField(grid2d, np.ones(grid2d.shape))
        assert detect_halfspace(f, 1e-12, strict=True) is None
        assert detect_halfspace(f, 1e-12) == grid2d.t[0]
        assert not bottom_slab_clean(f, 1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-8, 0.9), st.floats(1.0, 2.0))
    def test_slab_below_t0_is_clean(self, tol, center):
        g = GridSpec.from_bounds((-1.0, 0.0), (1.0, 3.0), (21, 61))
        f = render_phantom(bump((0.0, center), (0.9, 0.9)), g)
        t0 = detect_halfspace(f, tol)
        below = f.values[:, g.t < t0]
        assert below.size == 0 or np.abs(below).max() <= tol


class TestArithmetic:
    def test_norms_and_arithmetic(self, grid2d):
        f = field_from(grid2d, lambda x, t: np.sin(x + t))
        assert l2_norm(ScalarField.zeros(grid2d)) == 0.0
        assert l2_norm(scale(f, 2.0)) == pytest.approx(2.0 * l2_norm(f))
        assert not add(f, scale(f, -1.0)).values.any()

    def test_l2_includes_cell_volume(self):
        g = GridSpec.from_bounds((0.0, 0.0), (1.0, 1.0), (11, 11))
        assert l2_norm(ScalarField(g, np.ones(g.shape))) == pytest.approx(math.sqrt(121 * 0.01))

    def test_grid_mismatch_is_an_error(self, grid2d):
        other = GridSpec.from_bounds((-1.0, 0.0), (1.0, 2.0), (33, 40))
        with pytest.raises(GridError, match="mismatch"):
            add(ScalarField.zeros(grid2d), ScalarField.zeros(other))

    def test_pad_then_crop_roundtrip(self, grid2d):
        f = field_from(grid2d, lambda x, t: x * t)
        padded = pad_field(f, [(2, 3), (0, 5)])
        assert padded.grid.counts == (38, 46)
        back = crop_field(padded, grid2d)
        assert np.array_equal(back.values, f.values)

    def test_crop_rejects_misaligned(self, grid2d):
        g = GridSpec((5, 5), grid2d.spacing, (grid2d.origin[0] + 0.3 * grid2d.spacing[0], 0.0))
        with pytest.raises(GridError, match="aligned"):
            crop_field(ScalarField.zeros(grid2d), g)

    def test_operations_are_deterministic(self, grid2d):
        f = field_from(grid2d, lambda x, t: np.exp(-x * x) * np.cos(t))
        a = cumulative_t_integral(partial_t(f)).values
        b = cumulative_t_integral(partial_t(f)).values
        assert a.tobytes() == b.tobytes()
