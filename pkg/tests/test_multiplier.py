import numpy as np
import pytest

from elastokss.elastic import ElasticMedium
from elastokss.fields import GaussianProfile, radial_field, random_localized_field
from elastokss.grid import GridSpec, curl, divergence, radial_frames
from elastokss.hodge import hodge_decompose
from elastokss.multiplier import (
    LocalizationError,
    curl_M_cf,
    densities,
    div_M_df,
    f_eval,
    identity_residual,
    kss_ratio,
    lap_f_over_r,
    lower_bound_constant,
    multiplier_apply,
)


class TestF:
    def test_values(self):
        assert f_eval(100.0, 0.25).f == pytest.approx((100 / 101) ** 0.5, rel=1e-14)
        v = f_eval(1.0, 0.25)
        assert v.f == pytest.approx(0.5 ** 0.5, rel=1e-14)
        assert v.fp == pytest.approx(0.5 * 2 ** -1.5, rel=1e-14)

    def test_limits(self):
        assert f_eval(1e-12, 0.25).f < 1e-5
        assert f_eval(1e12, 0.25).f == pytest.approx(1.0, rel=1e-6)

    def test_derivative_finite_difference(self):
        r = np.random.default_rng(0).uniform(0.01, 50, 100)
        h = 1e-6 * r
        fd = (f_eval(r + h, 0.25).f - f_eval(r - h, 0.25).f) / (2 * h)
        assert np.max(np.abs(fd / f_eval(r, 0.25).fp - 1)) <= 1e-6

    def test_coefficients(self):
        r = np.geomspace(1e-3, 1e3, 50)
        v = f_eval(r, 0.2)
        assert np.allclose(v.angular_coef, v.f / r - v.fp / 2, rtol=1e-12)
        assert np.allclose(v.radial_coef, v.fp - v.f / r, rtol=1e-12)

    def test_laplacian_of_f_over_r(self):
        # radial Laplacian (r^2 g')' / r^2 by finite differences
        r = np.geomspace(0.05, 20, 40)
        h = 1e-4 * r
        g = lambda s: f_eval(s, 0.25).f / s
        gp = lambda s: (g(s + h) - g(s - h)) / (2 * h)
        lap = ((r + h) ** 2 * gp(r + h) - (r - h) ** 2 * gp(r - h)) / (2 * h * r * r)
        assert np.allclose(lap, lap_f_over_r(r, 0.25), rtol=1e-5)
        assert np.all(lap_f_over_r(r, 0.25) <= f_eval(r, 0.25).lap_bound)

    @pytest.mark.parametrize("r,delta", [(0.0, 0.25), (-1.0, 0.25), (1.0, 0.5), (1.0, 0.0)])
    def test_errors(self, r, delta):
        with pytest.raises(ValueError):
            f_eval(r, delta)


class TestLowerBound:
    def test_constant_positive_and_stable(self):
        c = lower_bound_constant(0.25, 2.0, 1.0)
        assert 0 < c < 1
        assert lower_bound_constant(0.25, 2.0, 1.0, (1e-6, 1e6)) == pytest.approx(c, rel=1e-3)


def _localized(grid, seed):
    # generic potentials on bumps centred at distance 4: negligible both at
    # the origin, where f/r is singular, and at the box edge
    x = grid.coords
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    c *= 4.0 / np.linalg.norm(c)
    d = x - c[:, None, None, None]
    env = np.exp(-np.sum(d * d, axis=0) / 0.5)
    a = rng.normal(size=(3, 4))
    A = np.stack([env * (a[i, 0] + a[i, 1:] @ d.reshape(3, -1)).reshape(grid.shape) for i in range(3)])
    return A, env * (1 + 0.3 * d[0] * d[1])


class TestDensities:
    def test_unperturbed_has_no_h_terms(self, grid32):
        u = random_localized_field(grid32, 0)
        d = densities(u, 0.5 * u, ElasticMedium(2.0, 1.0), grid32, 0.25)
        for q in (d.q3, d.q4, d.q5):
            assert not np.any(q)
        assert d.forcing is None

    def test_divergence_free_has_no_pressure_part(self, grid32):
        A, _ = _localized(grid32, 1)
        u = curl(A, grid32)
        d = densities(u, u, ElasticMedium(2.0, 1.0), grid32, 0.25)
        scale = np.max(np.abs(d.q2))
        assert np.max(np.abs(d.e1)) <= 1e-12 * scale
        assert np.max(np.abs(d.q1)) <= 1e-12 * scale

    @pytest.mark.parametrize("seed", range(3))
    def test_pointwise_lower_bound(self, grid32, seed):
        u = random_localized_field(grid32, seed)
        v = random_localized_field(grid32, seed + 10)
        med = ElasticMedium(2.0, 1.0)
        d = densities(u, v, med, grid32, 0.25)
        assert d.lower_bound_lhs.min() >= 0.0
        assert d.lower_bound_violations(lower_bound_constant(0.25, 2.0, 1.0)) == 0


@pytest.fixture(scope="module")
def grid96():
    return GridSpec(96, 8.0)


class TestClosedForms:
    def test_div_M_df(self, grid96):
        A, _ = _localized(grid96, 2)
        u = curl(A, grid96)
        direct = divergence(multiplier_apply(u, grid96, 0.25), grid96)
        closed = div_M_df(u, grid96, 0.25)
        assert np.linalg.norm(closed - direct) <= 1e-8 * np.linalg.norm(direct)

    def test_curl_M_cf(self, grid96):
        _, phi = _localized(grid96, 3)
        from elastokss.grid import gradient

        u = gradient(phi, grid96)
        direct = curl(multiplier_apply(u, grid96, 0.25), grid96)
        closed = curl_M_cf(u, grid96, 0.25)
        assert np.linalg.norm(closed - direct) <= 1e-8 * np.linalg.norm(direct)

    def test_multiplier_on_radial_field(self, grid32):
        # u = x phi(r) = r phi omega, so M u = f (2 phi + r phi') omega
        prof = GaussianProfile(1.0, 1.2)
        u = radial_field(prof, grid32)
        r, om = radial_frames(grid32)
        phi = np.exp(-r * r / 1.44)
        dphi = -2 * r / 1.44 * phi
        expect = f_eval(r, 0.25).f * (phi + r * dphi + phi) * om
        assert np.allclose(multiplier_apply(u, grid32, 0.25), expect, atol=1e-5 * np.abs(expect).max())


class TestIdentityResidual:
    def test_zero_run(self, grid32):
        z = np.zeros((3,) + grid32.shape)
        rep = identity_residual([(0.0, z, z, None), (0.1, z, z, None)], ElasticMedium(2.0, 1.0), grid32, 0.25)
        assert rep.residual == 0.0 and rep.normalized == 0.0

    def test_needs_two_samples(self, grid32):
        z = np.zeros((3,) + grid32.shape)
        with pytest.raises(ValueError, match="two"):
            identity_residual([(0.0, z, z, None)], ElasticMedium(2.0, 1.0), grid32, 0.25)

    def test_localization_refused(self):
        grid = GridSpec(32, 3.0)
        u = random_localized_field(grid, 0, widths=(1.5, 2.0))
        with pytest.raises(LocalizationError):
            identity_residual([(0.0, u, u, None), (0.1, u, u, None)], ElasticMedium(2.0, 1.0), grid, 0.25)


class TestKSSRatio:
    def test_zero_run_degenerate(self, grid32):
        z = np.zeros((3,) + grid32.shape)
        rep = kss_ratio([(0.0, z, z, None), (1.0, z, z, None)], grid32, 0.25)
        assert rep.degenerate and np.isnan(rep.ratio)

    def test_static_field(self, grid32):
        u = radial_field(GaussianProfile(1.0, 1.2), grid32)
        z = 0 * u
        rep = kss_ratio([(0.0, u, z, None), (1.0, u, z, None)], grid32, 0.25)
        assert not rep.degenerate
        assert rep.terms["sup_du"] == rep.terms["du0"]
        assert rep.ratio > 1.0
