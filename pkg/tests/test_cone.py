import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crtkit.cone import (ConeError, ConeParams, PaddingError, QuadratureSpec, cone_reach,
                         forward_crt, lattice_zeta, pad_t, shadow_padding, vertex_weight,
                         weighted_forward_crt)
from crtkit.field import GridSpec, ScalarField, crop_field, linf_norm, pad_field
from crtkit.oracles import oracle_forward_crt
from crtkit.phantoms import PhantomSpec, bump, render_phantom

# Dirichlet L-values at 1/2 used for the square lattice sum 4 * zeta(1/2) * beta(1/2)
ZETA_HALF = -1.4603545088095868
BETA_HALF = 0.6676914571896092


def gaussian_scene(n, phi=math.pi / 4):
    spec = PhantomSpec("gaussian", [(0.0, 0.0)], [0.25])
    grid = GridSpec.from_bounds((-4.0, -2.5), (4.0, 5.5), (n + 1, n + 1))
    idx = [(n // 2, n // 2), (n // 2 + n // 8, 5 * n // 8), (n // 4, 3 * n // 4)]
    pts = [(grid.axis(0)[i], grid.t[j]) for i, j in idx]
    return spec, grid, idx, oracle_forward_crt(spec, pts, phi=phi)


def oracle_error(n, phi, order):
    spec, grid, idx, ref = gaussian_scene(n, phi)
    out = forward_crt(render_phantom(spec, grid), ConeParams(phi), QuadratureSpec(order))
    num = np.array([out.values[i, j] for i, j in idx])
    return np.abs(num - ref).max() / np.abs(ref).max()


class TestParams:
    @pytest.mark.parametrize("phi", [0.0, math.pi / 2, -0.3, float("nan")])
    def test_angle_range(self, phi):
        with pytest.raises(ConeError):
            ConeParams(phi)

    def test_order(self):
        with pytest.raises(ConeError):
            QuadratureSpec(2)

    def test_trig(self):
        c = ConeParams(math.pi / 3)
        assert c.tan * c.cot == pytest.approx(1.0)
        assert c.sin == pytest.approx(math.sqrt(3) / 2)


class TestLatticeZeta:
    def test_square_lattice(self):
        assert lattice_zeta(0.5, (1.0, 1.0)) == pytest.approx(4 * ZETA_HALF * BETA_HALF, rel=1e-12)

    def test_one_dimensional(self):
        assert lattice_zeta(1.0, (1.0,)) == pytest.approx(math.pi ** 2 / 3, rel=1e-12)

    @pytest.mark.parametrize("h", [0.5, 0.1, 2.0])
    def test_scaling(self, h):
        assert lattice_zeta(0.5, (h, h)) == pytest.approx(lattice_zeta(0.5, (1.0, 1.0)) / h, rel=1e-12)

    def test_rectangular_matches_direct_sum_at_convergent_s(self):
        # s = 5/2 > m/2 converges absolutely, so a brute-force sum is a check
        n = np.arange(-400, 401)
        x, y = np.meshgrid(0.7 * n, 1.3 * n, indexing="ij")
        r2 = (x * x + y * y).ravel()
        direct = np.sum(r2[r2 > 0] ** -2.5)
        assert lattice_zeta(2.5, (0.7, 1.3)) == pytest.approx(direct, rel=1e-8)

    def test_vertex_weight_is_positive_and_linear_in_h(self):
        assert vertex_weight((0.5, 0.5)) == pytest.approx(vertex_weight((1.0, 1.0)) / 2)
        assert vertex_weight((0.1, 0.1)) > 0

    @pytest.mark.parametrize("s", [0.0, 1.0])
    def test_domain(self, s):
        with pytest.raises(ValueError):
            lattice_zeta(s, (1.0, 1.0))


class TestForward:
    def test_zero(self, grid2d):
        assert not forward_crt(ScalarField.zeros(grid2d)).values.any()

    @pytest.mark.parametrize("m", [2, 3])
    def test_zero_higher_dims(self, m):
        g = GridSpec((9,) * m + (7,), (0.1,) * (m + 1), (0.0,) * (m + 1))
        assert not forward_crt(ScalarField.zeros(g)).values.any()

    def test_second_order_against_oracle(self):
        errs = [oracle_error(n, math.pi / 4, 1) for n in (64, 128, 256)]
        assert errs[-1] < 1e-6
        for a, b in zip(errs, errs[1:]):
            assert 3.0 <= a / b <= 5.0

    def test_general_angle_linear_and_cubic(self):
        lin = [oracle_error(n, math.pi / 3, 1) for n in (128, 256)]
        cub = oracle_error(256, math.pi / 3, 3)
        assert 3.0 <= lin[0] / lin[1] <= 5.0
        assert cub < lin[1] / 10

    def test_shift_covariance(self):
        g = GridSpec.from_bounds((-2.0, -1.0), (2.0, 3.0), (41, 41))
        a = render_phantom(bump((0.0, 0.0), 0.5), g)
        b = render_phantom(bump((0.3, 0.4), 0.5), g)
        fa, fb = forward_crt(a).values, forward_crt(b).values
        np.testing.assert_allclose(fb[3:, 4:], fa[:-3, :-4], atol=1e-14 * np.abs(fa).max())

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, a, b):
        g = GridSpec.from_bounds((-2.0, -1.0), (2.0, 3.0), (25, 25))
        f1 = render_phantom(bump((0.0, 0.0), 0.6), g)
        f2 = render_phantom(bump((0.5, 0.8), (0.4, 0.7)), g)
        both = f1.with_values(a * f1.values + b * f2.values)
        lhs = forward_crt(both).values
        rhs = a * forward_crt(f1).values + b * forward_crt(f2).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-13 * max(1.0, np.abs(rhs).max()))

    def test_flip_reverses_orientation(self):
        g = GridSpec.from_bounds((-2.0, -3.0), (2.0, 3.0), (21, 31))
        f = render_phantom(bump((0.0, 0.0), 0.6), g)
        up = forward_crt(f)
        down = forward_crt(f.with_values(f.values[:, ::-1]), flip=True)
        np.testing.assert_allclose(down.values[:, ::-1], up.values, atol=1e-14)

    def test_surface_measure_scaling(self, grid2d):
        f = render_phantom(bump((0.0, 0.6), 0.4), grid2d)
        a = forward_crt(f).values
        b = forward_crt(f, surface_measure=True).values
        np.testing.assert_allclose(b, a * math.sqrt(2), rtol=1e-14)

    def test_support_propagation_small(self):
        g = GridSpec.from_bounds((-3.0, -1.5), (3.0, 3.0), (61, 46))
        f = render_phantom(bump((0.0, 0.0), 1.0), g)
        out = forward_crt(f)
        x, t = g.mesh()
        d = np.abs(x)
        inside = np.where(d >= 1 / math.sqrt(2), t >= d - math.sqrt(2),
                          t >= -np.sqrt(np.clip(1 - d * d, 0, None)))
        grown = inside | np.roll(inside, 1, 0) | np.roll(inside, -1, 0) | np.roll(inside, 1, 1)
        assert np.abs(out.values[~grown]).max(initial=0) <= 1e-12 * linf_norm(out)

    def test_padding_errors_name_the_fix(self):
        g = GridSpec.from_bounds((-1.0, -1.0), (1.0, 1.0), (21, 21))
        vals = np.zeros(g.shape)
        vals[10, 0] = 1.0
        with pytest.raises(PaddingError, match="prepend at least 1 t-samples"):
            forward_crt(ScalarField(g, vals))
        vals = np.zeros(g.shape)
        vals[0, 10] = 1.0
        with pytest.raises(PaddingError, match="pad that axis by at least 1 samples"):
            forward_crt(ScalarField(g, vals))
        assert forward_crt(ScalarField(g, vals), check=False).values.any()

    def test_t_padding_and_cone_reach(self, grid2d):
        f = ScalarField.zeros(grid2d)
        assert pad_t(f, 2, 3).grid.counts == (33, 46)
        assert cone_reach(grid2d, ConeParams()) == pytest.approx(2.0)
        assert cone_reach(grid2d, ConeParams(math.pi / 3)) == pytest.approx(2.0 / math.sqrt(3))

    def test_shadow_padding_keeps_dilated_support_inside(self):
        g = GridSpec.from_bounds((-1.2, -1.2, -1.2), (1.2, 1.2, 1.4), (13, 13, 14))
        f = render_phantom(bump((0.0, 0.0, 0.0), 1.0), g)
        widths = shadow_padding(f, above=2, guard=2)
        assert widths[-1] == (0, 2)
        # support starts at t = -1; the cone grows to tan(pi/4) * (t_top + 2h + 1)
        t_top = g.upper(2) + 2 * g.dt
        need = t_top + 1.0 + 1.0
        padded = pad_field(f, widths)
        assert padded.grid.origin[0] <= -need + 1e-9
        assert np.array_equal(crop_field(padded, g).values, f.values)


class TestWeighted:
    def test_rejects_one_dimension(self, grid2d):
        with pytest.raises(ConeError, match="non-integrable in one spatial dimension"):
            weighted_forward_crt(ScalarField.zeros(grid2d))

    def test_zero(self):
        g = GridSpec((9, 9, 7), (0.1,) * 3, (0.0,) * 3)
        assert not weighted_forward_crt(ScalarField.zeros(g)).values.any()

    def test_radial_symmetry(self):
        g = GridSpec.from_bounds((-1.5, -1.5, -0.2), (1.5, 1.5, 1.8), (31, 31, 21))
        f = render_phantom(bump((0.0, 0.0, 0.5), (0.6, 0.6, 0.5)), g)
        w = weighted_forward_crt(f).values
        scale = np.abs(w).max()
        for other in (w[::-1], w[:, ::-1], w.transpose(1, 0, 2)):
            assert np.abs(other - w).max() <= 1e-10 * scale

    @pytest.mark.parametrize("n, rms_ceiling", [(48, 0.06), (96, 0.04)])
    def test_relation_to_unweighted(self, n, rms_ceiling):
        # the weight sin(phi)/|y| on the pi/4 cone equals 1/(sqrt 2 (t - t_vertex)),
        # so sqrt(2) t C'[f] ~ C[f] for f concentrated at t = 0
        g = GridSpec.from_bounds((-2, -2, -0.5), (2, 2, 2.5), (n, n, int(round(n * 0.75))))
        f = render_phantom(bump((0, 0, 0), 0.15), g)
        c, w = forward_crt(f).values, weighted_forward_crt(f).values
        t = np.broadcast_to(g.mesh()[2], g.shape)
        mask = (t > 0.8) & (c > 0.05 * c.max())
        ratio = math.sqrt(2) * t[mask] * w[mask] / c[mask]
        assert np.sqrt(np.mean((ratio - 1) ** 2)) <= rms_ceiling
