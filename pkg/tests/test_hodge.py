import numpy as np
import pytest

from elastokss.fields import random_scalar_field
from elastokss.grid import ZeroModeError, curl, divergence, gradient, l2_norm
from elastokss.hodge import hodge_decompose, riesz, riesz_ratio, weighted_riesz_ratio


def smooth_potentials(grid, seed):
    x = grid.coords
    r2 = np.sum(x * x, axis=0)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=4)
    env = np.exp(-r2 / 2)
    phi = env * (a[0] + a[1] * x[0] * x[1])
    A = np.stack([env * a[2] * x[2], env * a[3] * x[0], env * (a[0] - a[3]) * x[1] ** 2])
    return phi, A


class TestHodgeDecompose:
    def test_pure_gradient(self, grid32):
        phi, _ = smooth_potentials(grid32, 0)
        u = gradient(phi, grid32)
        p = hodge_decompose(u, grid32)
        assert l2_norm(p.u_df, grid32) <= 1e-10 * l2_norm(u, grid32)

    def test_pure_curl(self, grid32):
        _, A = smooth_potentials(grid32, 1)
        u = curl(A, grid32)
        p = hodge_decompose(u, grid32)
        assert l2_norm(p.u_cf, grid32) <= 1e-10 * l2_norm(u, grid32)

    def test_parts_are_curl_and_divergence_free(self, grid32):
        phi, A = smooth_potentials(grid32, 2)
        u = gradient(phi, grid32) + curl(A, grid32)
        p = hodge_decompose(u, grid32)
        scale = np.sqrt(np.sum(gradient(u, grid32) ** 2) * grid32.cell_volume)
        assert l2_norm(curl(p.u_cf, grid32), grid32) <= 1e-10 * scale
        assert l2_norm(divergence(p.u_df, grid32), grid32) <= 1e-10 * scale
        assert l2_norm(p.u_cf + p.u_df - u, grid32) <= 1e-12 * l2_norm(u, grid32)

    def test_parseval_split(self, grid32):
        rng = np.random.default_rng(3)
        u = rng.normal(size=(3,) + grid32.shape)
        u -= u.mean(axis=(1, 2, 3), keepdims=True)
        p = hodge_decompose(u, grid32)
        n2 = l2_norm(u, grid32) ** 2
        assert abs(n2 - l2_norm(p.u_cf, grid32) ** 2 - l2_norm(p.u_df, grid32) ** 2) <= 1e-10 * n2

    def test_idempotent(self, grid32):
        phi, A = smooth_potentials(grid32, 4)
        p = hodge_decompose(gradient(phi, grid32) + curl(A, grid32), grid32)
        q = hodge_decompose(p.u_cf, grid32)
        s = hodge_decompose(p.u_df, grid32)
        assert l2_norm(q.u_df, grid32) <= 1e-10 * l2_norm(p.u_cf, grid32)
        assert l2_norm(s.u_cf, grid32) <= 1e-10 * l2_norm(p.u_df, grid32)

    def test_constant_component_rejected(self, grid32):
        u = np.ones((3,) + grid32.shape)
        with pytest.raises(ZeroModeError, match="harmonic"):
            hodge_decompose(u, grid32)


class TestRiesz:
    def test_single_mode(self, grid32):
        k0 = np.pi / grid32.L * 2
        f = np.cos(k0 * grid32.coords[0])
        assert np.abs(riesz(0, f, grid32) + np.sin(k0 * grid32.coords[0])).max() < 1e-12

    def test_sum_of_squares_is_minus_identity(self, grid32):
        # band-limited data: the Nyquist planes carry no resolvable direction
        rng = np.random.default_rng(5)
        f = np.zeros(grid32.shape)
        for _ in range(20):
            m = rng.integers(-10, 11, size=3)
            f += rng.normal() * np.cos(np.pi / grid32.L * np.einsum("i,i...->...", m, grid32.coords) + rng.uniform(0, 6))
        f -= f.mean()
        s = sum(riesz(i, riesz(i, f, grid32), grid32) for i in range(3))
        assert l2_norm(s + f, grid32) <= 1e-12 * l2_norm(f, grid32)

    def test_l2_contraction(self, grid32):
        for seed in range(100):
            f = random_scalar_field(grid32, seed)
            f -= f.mean()
            assert l2_norm(riesz(seed % 3, f, grid32), grid32) <= l2_norm(f, grid32) * (1 + 1e-12)

    def test_nyquist_plane_annihilated(self):
        from elastokss.grid import GridSpec

        g = GridSpec(16, np.pi)
        f = np.sin(8 * g.coords[0])  # the cosine vanishes on cell centres
        assert np.abs(riesz(0, f, g)).max() < 1e-12

    def test_mean_rejected(self, grid32):
        with pytest.raises(ZeroModeError):
            riesz(0, np.ones(grid32.shape) + random_scalar_field(grid32, 0), grid32)


class TestWeightedRiesz:
    def test_axis_mode_is_finite(self, grid32):
        f = np.cos(np.pi / grid32.L * grid32.coords[0])
        rho = riesz_ratio(f, grid32, 0.25, 0)
        assert np.isfinite(rho) and rho > 0

    @pytest.mark.parametrize("delta", [0.0, 0.5, -0.1])
    def test_delta_outside_range(self, grid32, delta):
        with pytest.raises(ValueError):
            weighted_riesz_ratio(delta, 2, grid32)

    def test_zero_field_rejected(self, grid32):
        with pytest.raises(ValueError, match="undefined"):
            riesz_ratio(np.zeros(grid32.shape), grid32, 0.25)

    def test_ensemble_stable_across_batches(self, grid64):
        a = weighted_riesz_ratio(0.25, range(0, 100), grid64)
        b = weighted_riesz_ratio(0.25, range(100, 200), grid64)
        assert abs(a.max - b.max) <= 0.10 * max(a.max, b.max)
        counts, edges = a.histogram(5)
        assert counts.sum() == 100
