import numpy as np
import pytest

from elastokss.elastic import ElasticMedium, PerturbationField, apply_H, default_medium
from elastokss.fields import GaussianProfile, random_localized_field
from elastokss.grid import GridSpec, gradient, read_snapshot
from elastokss.solver import (
    BlowupDetector,
    SolverConfig,
    State,
    elastic_energy,
    gradient_energy,
    radial_data,
    rhs,
    rotation_defect,
    simulate,
    step_rk4,
)
from elastokss.grid import rfft
from elastokss.hodge import hodge_hat
from elastokss.tensors import isotropic_g

MED = ElasticMedium(2.0, 1.0)


def plane_wave(grid, m, c, t, longitudinal=True):
    k = np.pi / grid.L * np.asarray(m, float)
    kn = np.linalg.norm(k)
    e = k / kn if longitudinal else np.cross(k, [0.0, 0.0, 1.0]) / kn
    om = c * kn
    ph = np.einsum("i,i...->...", k, grid.coords)
    e = e[:, None, None, None]
    return e * np.cos(ph - om * t), e * om * np.sin(ph - om * t), om


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(cfl=0.6), dict(dt=1.0), dict(T=-1.0), dict(record_every=0)])
    def test_validation(self, grid32, kw):
        base = dict(grid=grid32, medium=MED, dt=0.01, T=1.0)
        base.update(kw)
        with pytest.raises(ValueError):
            SolverConfig(**base)

    def test_from_cfl_divides_T(self, grid32):
        cfg = SolverConfig.from_cfl(grid32, MED, 1.0)
        assert cfg.steps * cfg.dt == pytest.approx(1.0, rel=1e-14)
        assert cfg.dt <= 0.5 * grid32.h / MED.c1

    def test_unknown_mode(self, grid32):
        with pytest.raises(ValueError, match="mode"):
            rhs(State(np.zeros((3,) + grid32.shape), np.zeros((3,) + grid32.shape)), MED, grid32, "bogus")

    def test_perturbed_needs_h(self, grid32):
        z = np.zeros((3,) + grid32.shape)
        with pytest.raises(ValueError, match="perturbation"):
            rhs(State(z, z), MED, grid32, "perturbed")


class TestRhs:
    @pytest.mark.parametrize("longitudinal,c", [(True, 2.0), (False, 1.0)])
    def test_eigenmode(self, grid32, longitudinal, c):
        u, v, om = plane_wave(grid32, (2, 1, 0), c, 0.0, longitudinal)
        du, dv = rhs(State(u, v), MED, grid32)
        assert np.array_equal(du, v)
        assert np.max(np.abs(dv + om * om * u)) <= 1e-12 * om * om

    def test_zero_g_is_linear_bitwise(self, grid32):
        u = random_localized_field(grid32, 0)
        s = State(u, 0 * u)
        med0 = ElasticMedium(2.0, 1.0, isotropic_g((0.0,) * 5))
        a = rhs(s, med0, grid32, "quasilinear")[1]
        b = rhs(s, MED, grid32, "linear")[1]
        assert np.array_equal(a, b)

    def test_perturbed_is_linear_minus_H(self, grid32):
        rng = np.random.default_rng(2)
        R = rng.normal(size=(3, 3, 3, 3))
        h = PerturbationField(0.01 * (R + R.transpose(1, 0, 3, 2)))
        u = random_localized_field(grid32, 1)
        s = State(u, 0 * u)
        a = rhs(s, MED, grid32, "perturbed", h=h)[1]
        b = rhs(s, MED, grid32, "linear")[1] - apply_H(u, h, grid32)
        assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(b)

    def test_forcing_added(self, grid32):
        z = np.zeros((3,) + grid32.shape)
        F = random_localized_field(grid32, 3)
        dv = rhs(State(z, z, 0.5), MED, grid32, forcing=lambda t: t * F)[1]
        assert np.allclose(dv, 0.5 * F, atol=1e-14)


class TestRK4:
    def test_one_period(self):
        # RK4 on y' = i w y has phase error z^5 / 120 per step, z = w dt, so
        # one period at dt = T/200 leaves 2 pi z^4 / 120 independent of k
        grid = GridSpec(32, np.pi)
        for m in ((1, 0, 0), (1, 1, 0)):
            u0, v0, om = plane_wave(grid, m, 2.0, 0.0)
            T = 2 * np.pi / om
            fin = simulate(SolverConfig(grid, MED, T / 200, T), (u0, v0)).final
            z = 2 * np.pi / 200
            err = np.linalg.norm(fin.u - u0) / np.linalg.norm(u0)
            assert err == pytest.approx(2 * np.pi * z ** 4 / 120, rel=1e-2)

    def test_order(self):
        grid = GridSpec(32, np.pi)
        u0, v0, om = plane_wave(grid, (1, 0, 0), 2.0, 0.0)
        T = 1.3
        ue = plane_wave(grid, (1, 0, 0), 2.0, T)[0]
        errs = []
        for steps in (40, 80):
            fin = simulate(SolverConfig(grid, MED, T / steps, T), (u0, v0)).final
            errs.append(np.linalg.norm(fin.u - ue))
        p = np.log2(errs[0] / errs[1])
        assert 3.8 <= p <= 4.2

    def test_zero_data_stays_zero(self, grid32):
        z = np.zeros((3,) + grid32.shape)
        cfg = SolverConfig.from_cfl(grid32, default_medium(), 0.5)
        fin = simulate(cfg, (z, z), "quasilinear").final
        assert not np.any(fin.u) and not np.any(fin.v)

    def test_reversible(self, grid32):
        u = random_localized_field(grid32, 4)
        cfg = SolverConfig(grid32, MED, 0.01, 0.2)
        s = State(u, 0 * u)
        for _ in range(20):
            s = step_rk4(s, cfg)
        for _ in range(20):
            s = step_rk4(s, cfg, dt=-0.01)
        assert s.t == pytest.approx(0.0, abs=1e-14)
        assert np.linalg.norm(s.u - u) <= 1e-6 * np.linalg.norm(u)

    def test_blown_up_state_is_frozen(self, grid32):
        z = np.zeros((3,) + grid32.shape)
        s = State(z, z, 0.0, True)
        assert step_rk4(s, SolverConfig(grid32, MED, 0.01, 1.0)) is s


class TestEnergy:
    def test_linear_energy_follows_rk4_amplification(self, grid32):
        # each mode's energy w^2 |U|^2 + |V|^2 is multiplied by |R(i w dt)|^2
        # per step, R the RK4 stability polynomial; the Hodge parts decouple
        u = random_localized_field(grid32, 5, widths=(1.2, 1.5))
        cfg = SolverConfig.from_cfl(grid32, MED, 1.0, dealias=False)
        rep = simulate(cfg, (u, 0 * u))
        U_cf, U_df = hodge_hat(rfft(u), grid32)
        w = grid32.rweights * grid32.k2

        def predicted(Uh, c):
            z = c * np.sqrt(grid32.k2) * cfg.dt
            amp = (1 - z ** 2 / 2 + z ** 4 / 24) ** 2 + (z - z ** 3 / 6) ** 2
            e = np.sum(np.abs(Uh) ** 2, axis=0) * w
            return np.sum(e * amp ** cfg.steps) / np.sum(e)

        e_cf, e_df = elastic_energy(u, 0 * u, MED, grid32, split=True)
        f_cf, f_df = elastic_energy(rep.final.u, rep.final.v, MED, grid32, split=True)
        assert f_cf / e_cf == pytest.approx(predicted(U_cf, MED.c1), rel=1e-9)
        assert f_df / e_df == pytest.approx(predicted(U_df, MED.c2), rel=1e-9)

    def test_linear_energy_drift_resolved(self, grid32):
        u = random_localized_field(grid32, 5, widths=(1.2, 1.5))
        rep = simulate(SolverConfig.from_cfl(grid32, MED, 1.0, cfl=0.25, dealias=False), (u, 0 * u))
        e = np.asarray(rep.elastic_energies)
        assert np.max(np.abs(e / e[0] - 1)) <= 1e-4

    def test_split_sums(self, grid32):
        u = random_localized_field(grid32, 6)
        v = random_localized_field(grid32, 7)
        a, b = elastic_energy(u, v, MED, grid32, split=True)
        assert a + b == pytest.approx(elastic_energy(u, v, MED, grid32), rel=1e-14)
        assert a > 0 and b > 0

    def test_gradient_energy(self, grid32):
        u = random_localized_field(grid32, 8)
        v = random_localized_field(grid32, 9)
        G = gradient(u, grid32)
        ref = np.sqrt((np.sum(v * v) + np.sum(G * G)) * grid32.cell_volume)
        assert gradient_energy(u, v, grid32) == pytest.approx(ref, rel=1e-6)


class TestRadialData:
    def test_zero_amplitude(self, grid32):
        u0, u1 = radial_data(grid32, 0.0)
        assert not np.any(u0) and not np.any(u1)

    def test_annihilated(self, grid64):
        u0, _ = radial_data(grid64, 0.1)
        assert rotation_defect(u0, grid64) <= 1e-8

    def test_linear_in_eps(self, grid32):
        a = radial_data(grid32, 0.1)[0]
        b = radial_data(grid32, 0.2)[0]
        ga, gb = np.linalg.norm(gradient(a, grid32)), np.linalg.norm(gradient(b, grid32))
        assert gb == pytest.approx(2 * ga, rel=1e-12)

    def test_velocity_profile(self, grid32):
        u0, u1 = radial_data(grid32, 0.1, velocity_profile=GaussianProfile(2.0, 1.0))
        assert np.allclose(u1, 2 * u0, atol=1e-15)

    def test_support_violation(self):
        grid = GridSpec(32, 3.0)
        with pytest.raises(ValueError, match="localized"):
            radial_data(grid, 0.1, GaussianProfile(1.0, 2.0))


class TestBlowup:
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nan(self, grid32):
        det = BlowupDetector(grid32)
        U = np.zeros((3, 32, 32, 17), complex)
        U[0, 0, 0, 1] = np.nan
        assert det.check(U, U) == "nan"

    def test_sup_gradient_threshold(self, grid32):
        det = BlowupDetector(grid32, threshold=10.0, use_tail=False)
        U = np.zeros((3, 32, 32, 17), complex)
        U[0, 1, 0, 0] = 1.0
        U /= det.sup_gradient(U)     # unit sup-gradient
        assert det.check(U, U) is None
        assert det.check(100 * U, U) == "sup_gradient"

    def test_spectral_tail(self, grid32):
        det = BlowupDetector(grid32, dealias=True)
        U = np.zeros((3, 32, 32, 17), complex)
        U[0, 0, 0, 1] = 1.0
        assert det.check(U, U) is None
        U[0, 0, 0, 9] = 1.0          # |m| = 9 lies in [2n/9, n/3)
        assert det.check(U, U) == "spectral_tail"

    def test_run_stops_and_reports(self, grid32):
        u = random_localized_field(grid32, 0)
        cfg = SolverConfig.from_cfl(grid32, MED, 1.0, blowup_threshold=1e-3)
        rep = simulate(cfg, (u, 0 * u))
        assert rep.blowup_time is not None and rep.blowup_kind == "sup_gradient"
        assert rep.blowup_time <= cfg.T
        assert rep.steps < cfg.steps

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_data_rejected(self, grid32):
        u = np.zeros((3,) + grid32.shape)
        u[0, 0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            simulate(SolverConfig.from_cfl(grid32, MED, 0.1), (u, 0 * u))


class TestSimulate:
    def test_records_and_observers(self, grid32, tmp_path):
        u = random_localized_field(grid32, 1)
        cfg = SolverConfig(grid32, MED, 0.01, 0.1, record_every=5)
        seen = []
        rep = simulate(cfg, (u, 0 * u), observers=[lambda t, a, b: seen.append(t)],
                       snapshot_dir=tmp_path, snapshot_every=5)
        assert rep.times == pytest.approx([0.0, 0.05, 0.1])
        assert seen == rep.times
        assert np.all(np.diff(rep.times) > 0)
        assert len(rep.snapshots) == 3
        field, g = read_snapshot(rep.snapshots[-1])
        assert g == grid32 and np.array_equal(field, rep.final.u)
        assert len(list(rep.as_rows())) == 3

    def test_max_steps(self, grid32):
        u = random_localized_field(grid32, 1)
        rep = simulate(SolverConfig(grid32, MED, 0.01, 1.0), (u, 0 * u), max_steps=3)
        assert rep.steps == 3 and rep.final.t == pytest.approx(0.03)

    def test_radial_symmetry_linear(self, grid64):
        u0, u1 = radial_data(grid64, 0.1, GaussianProfile(1.0, 1.2))
        rep = simulate(SolverConfig.from_cfl(grid64, MED, 0.5), (u0, u1))
        assert rotation_defect(rep.final.u, grid64) <= 1e-8
