import numpy as np
import pytest

from imo import ekf, sim, so3
from imo.data import load_dataset, save_dataset


class TestTracks:
    def test_lemniscate_starts_at_origin(self):
        ref = sim.generate_track("lemniscate", {"amp_x": 5.0, "amp_y": 5.0,
                                                "z0": 2.0})
        assert np.allclose(ref.position(0.0), [0, 0, 2.0])

    def test_lemniscate_periodicity(self):
        ref = sim.generate_track("lemniscate", {"omega": 1.3})
        T = ref.period
        for t in [0.0, 0.7, 2.9]:
            assert np.allclose(ref.position(t), ref.position(t + T),
                               atol=1e-12)

    def test_racetrack_passes_through_waypoints(self):
        ref = sim.generate_track("racetrack", {"lap_time": 14.0})
        knots = np.linspace(0, 14.0, len(sim.RACETRACK_WAYPOINTS) + 1)
        for t, wp in zip(knots[:-1], sim.RACETRACK_WAYPOINTS):
            assert np.linalg.norm(ref.position(t) - wp) < 1e-9

    def test_custom_requires_waypoints(self):
        with pytest.raises(ValueError):
            sim.generate_track("custom")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            sim.generate_track("bogus")


class TestSimulate:
    def test_hover_static_equilibrium(self):
        cfg = sim.SimConfig(track="hover", duration=1.0, seed=1,
                            drag=(0, 0, 0),
                            noise=sim.NoiseParams(0, 0, 0, 0, 0),
                            init_accel_bias_std=0, init_gyro_bias_std=0)
        ds = sim.simulate(cfg)
        assert np.allclose(ds.accel, [0, 0, 9.81], atol=1e-6)
        assert np.allclose(ds.gyro, 0.0, atol=1e-6)

    def test_noise_free_imu_dead_reckons_to_ground_truth(self,
                                                         ds_noisefree):
        ds = ds_noisefree
        nav = ekf.NavState(ds.gt_R[0].copy(), ds.gt_v[0].copy(),
                           ds.gt_p[0].copy(), np.zeros(3), np.zeros(3))
        for k in range(len(ds.imu_t)):
            nav = ekf.propagate_mean(nav, ds.gyro[k], ds.accel[k], ds.dt)
        assert np.linalg.norm(nav.p - ds.gt_p[-1]) < 1e-3

    def test_same_seed_is_bit_identical(self, tmp_path):
        cfg = sim.SimConfig(track="lemniscate", duration=2.0, seed=9)
        a = sim.simulate(cfg)
        b = sim.simulate(cfg)
        assert np.array_equal(a.accel, b.accel)
        assert np.array_equal(a.gt_p, b.gt_p)
        save_dataset(a, tmp_path / "a")
        save_dataset(b, tmp_path / "b")
        for name in ["imu.csv", "cmd.csv", "gt.csv"]:
            assert (tmp_path / "a" / name).read_bytes() \
                == (tmp_path / "b" / name).read_bytes()

    def test_drag_creates_commanded_vs_true_mismatch(self, ds_noisefree):
        ds = ds_noisefree
        # v_dot from ground truth vs commanded thrust alone
        mism = []
        for k in range(100, 400):
            v_dot = (ds.gt_v[k + 1] - ds.gt_v[k]) / ds.dt
            cmd = ds.gt_R[k] @ [0, 0, ds.cmd_c[k]] + sim.GRAVITY
            mism.append(np.linalg.norm(cmd - v_dot))
        assert np.median(mism) > 0.1

    def test_controller_divergence_raises(self):
        cfg = sim.SimConfig(track="lemniscate", duration=5.0, seed=1,
                            track_params={"omega": 8.0, "amp_x": 8.0,
                                          "amp_y": 8.0})
        with pytest.raises(sim.SimulationError):
            sim.simulate(cfg)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            sim.SimConfig(duration=-1.0)
        with pytest.raises(ValueError):
            sim.SimConfig(imu_rate=0.0)
        with pytest.raises(ValueError):
            sim.NoiseParams(sigma_accel=-0.1)

    def test_ground_truth_rotations_stay_orthonormal(self, ds_noisy):
        worst = max(so3.ortho_error(R) for R in ds_noisy.gt_R[::50])
        assert worst < 1e-9


class TestDatasetIO:
    def test_save_load_round_trip(self, ds_noisy, tmp_path):
        save_dataset(ds_noisy, tmp_path / "d")
        back = load_dataset(tmp_path / "d")
        assert np.allclose(back.accel, ds_noisy.accel, atol=1e-12)
        assert np.allclose(back.gt_p, ds_noisy.gt_p, atol=1e-12)
        assert np.allclose(back.gt_R, ds_noisy.gt_R, atol=1e-9)
        assert back.meta["seed"] == ds_noisy.meta["seed"]

    def test_quaternions_unit_norm_w_first(self, ds_noisy, tmp_path):
        save_dataset(ds_noisy, tmp_path / "d")
        gt = np.loadtxt(tmp_path / "d" / "gt.csv", delimiter=",",
                        skiprows=1)
        q = gt[:, 4:8]
        assert np.allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-12)
        assert np.all(q[:, 0] >= 0)


class TestDisplacementOracle:
    def test_exact_difference_without_noise(self, ds_noisefree):
        ds = ds_noisefree
        m = sim.displacement_oracle(ds, 1.0, 1.5, 0.0)
        want = ds.gt_interp_p(1.5) - ds.gt_interp_p(1.0)
        assert np.allclose(m.delta_p, want, atol=1e-12)
        assert np.allclose(m.cov, 0.0)

    def test_stationary_hover_is_zero(self):
        cfg = sim.SimConfig(track="hover", duration=2.0, seed=2,
                            drag=(0, 0, 0),
                            noise=sim.NoiseParams(0, 0, 0, 0, 0),
                            init_accel_bias_std=0, init_gyro_bias_std=0)
        ds = sim.simulate(cfg)
        m = sim.displacement_oracle(ds, 0.2, 1.7, 0.0)
        assert np.allclose(m.delta_p, 0.0, atol=1e-9)

    def test_noise_is_zero_mean(self, ds_noisefree):
        rng = np.random.default_rng(123)
        draws = np.array([
            sim.displacement_oracle(ds_noisefree, 1.0, 1.5, 0.01,
                                    rng).delta_p
            for _ in range(10_000)])
        eps = draws - draws[0] * 0 - (
            ds_noisefree.gt_interp_p(1.5) - ds_noisefree.gt_interp_p(1.0))
        assert np.all(np.abs(eps.mean(axis=0)) < 3e-4)

    def test_out_of_range_times_rejected(self, ds_noisefree):
        with pytest.raises(ValueError):
            sim.displacement_oracle(ds_noisefree, -1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            sim.displacement_oracle(ds_noisefree, 2.0, 1.0, 0.0)
