"""Trajectory/ensemble orchestration: seeding, determinism, aggregation
oracles, and failure accounting."""

import numpy as np
import pytest

import spintrack as st
from spintrack import backend as bk
from spintrack import experiment as ex

from conftest import small_mcg_config, small_oup_config


class TestSampleAtomNumber:
    def test_zero_spread(self):
        rng = np.random.default_rng(0)
        assert ex.sample_atom_number(1e13, 0.0, rng) == 1e13

    def test_statistics(self):
        rng = np.random.default_rng(1)
        draws = np.array([ex.sample_atom_number(1e13, 1e11, rng)
                          for _ in range(100_000)])
        assert draws.mean() == pytest.approx(1e13, rel=1e-2)
        assert draws.std() == pytest.approx(1e11, rel=1e-2)
        assert np.all(draws > 0)

    def test_deterministic_given_seed(self):
        a = [ex.sample_atom_number(1e13, 1e11, np.random.default_rng(7))
             for _ in range(3)]
        b = [ex.sample_atom_number(1e13, 1e11, np.random.default_rng(7))
             for _ in range(3)]
        assert a == b

    def test_rejects_nonpositive_draws(self):
        rng = np.random.default_rng(2)
        draws = [ex.sample_atom_number(1.0, 50.0, rng) for _ in range(500)]
        assert min(draws) > 0


class TestRunTrajectory:
    def test_bit_identical_repeat(self):
        cfg = small_oup_config()
        a = ex.run_trajectory(cfg, 3)
        b = ex.run_trajectory(cfg, 3)
        assert a.drawn_n == b.drawn_n
        np.testing.assert_array_equal(a.omega_est, b.omega_est)
        np.testing.assert_array_equal(a.sigma_omega, b.sigma_omega)
        np.testing.assert_array_equal(a.y_increment, b.y_increment)

    def test_distinct_indices_are_independent(self):
        cfg = small_oup_config()
        a = ex.run_trajectory(cfg, 0)
        b = ex.run_trajectory(cfg, 1)
        assert a.drawn_n != b.drawn_n
        assert not np.array_equal(a.omega_true, b.omega_true)

    def test_zero_noise_degenerate_run(self):
        # with all noise switched off and no initial offset everything sits
        # at the working point: omega stays at omega_bar and so does the
        # estimate (deviations identically zero)
        cfg = small_oup_config(horizon=2e-4, n_sigma=0.0)
        spec = ex.make_loop_spec(cfg, cfg.sensor.n_mean, 0.0)
        spec = bk.LoopSpec(**{**spec.__dict__, "q_omega": 0.0})
        zeros = np.zeros(spec.n_steps)
        for name in ("python", "compiled"):
            kernel = bk.get_backend(name)
            out, _ = kernel.run_loop(spec, zeros, zeros)
            np.testing.assert_array_equal(out["w_true"], 0.0)
            np.testing.assert_array_equal(out["w_est"], 0.0)

    def test_record_grid(self):
        cfg = small_oup_config(horizon=1e-3)
        rec = ex.run_trajectory(cfg, 0)
        assert len(rec.t) == cfg.n_steps // cfg.record_stride + 1
        assert rec.t[0] == 0.0
        assert rec.t[-1] == pytest.approx(cfg.n_steps * cfg.sensor.dt)

    def test_mcg_uses_clean_reference(self):
        cfg = small_mcg_config()
        rec = ex.run_trajectory(cfg, 0)
        # clean waveform is deterministic: same in every trajectory
        rec2 = ex.run_trajectory(cfg, 1)
        np.testing.assert_array_equal(rec.omega_true, rec2.omega_true)
        # the noisy drive is not
        assert not np.array_equal(rec.omega_noisy[1:], rec2.omega_noisy[1:])


class TestRunEnsemble:
    def test_thread_count_invariance(self):
        cfg = small_oup_config(n_trajectories=8)
        one = ex.run_ensemble(cfg, threads=1)
        four = ex.run_ensemble(cfg, threads=4)
        np.testing.assert_array_equal(one.amse, four.amse)
        np.testing.assert_array_equal(one.mean_sigma_omega, four.mean_sigma_omega)
        np.testing.assert_array_equal(one.mean_squeezing_db, four.mean_squeezing_db)
        assert one.n_used == four.n_used == 8

    def test_single_trajectory_amse_is_squared_error(self):
        cfg = small_oup_config(n_trajectories=1)
        stats = ex.run_ensemble(cfg)
        rec = ex.run_trajectory(cfg, 0)
        np.testing.assert_allclose(
            stats.amse, (rec.omega_est - rec.omega_true) ** 2, rtol=1e-12)

    def test_failure_accounting(self, monkeypatch):
        cfg = small_oup_config(n_trajectories=10)
        real = ex._raw_trajectory

        def flaky(cfg_, index, kernel):
            if index == 4:
                raise bk.TrajectoryError("synthetic failure", step=17)
            return real(cfg_, index, kernel)

        monkeypatch.setattr(ex, "_raw_trajectory", flaky)
        with pytest.raises(ex.EnsembleError):
            ex.run_ensemble(cfg)  # 10% > default 1% budget
        stats = ex.run_ensemble(cfg, max_failure_fraction=0.2)
        assert stats.n_used == 9
        assert stats.failures == [(4, "synthetic failure at step 17")]

    def test_bound_column_matches_bounds_module(self):
        cfg = small_oup_config(n_trajectories=2)
        stats = ex.run_ensemble(cfg)
        assert stats.bound[0] == pytest.approx(cfg.prior_sigma0**2)
        q = st.BoundQuery(
            t=float(stats.t[-1]), n_atoms=cfg.sensor.n_mean,
            q_omega=cfg.signal.q_omega, kappa_loc=cfg.sensor.kappa_loc,
            kappa_coll=cfg.sensor.kappa_coll, sigma0=cfg.prior_sigma0)
        assert stats.bound[-1] == pytest.approx(st.cs_bound_finite_prior(q))

    def test_mcg_bound_column_is_nan(self):
        cfg = small_mcg_config()
        stats = ex.run_ensemble(cfg)
        assert np.isnan(stats.bound).all()


class TestAmseSeries:
    def test_exact_estimate_gives_zero(self):
        cfg = small_oup_config(n_trajectories=1)
        rec = ex.run_trajectory(cfg, 0)
        rec.omega_est = rec.omega_true.copy()
        np.testing.assert_array_equal(ex.amse_series([rec]), 0.0)

    def test_symmetric_errors(self):
        cfg = small_oup_config(n_trajectories=1)
        a = ex.run_trajectory(cfg, 0)
        b = ex.run_trajectory(cfg, 0)
        a.omega_est = a.omega_true + 2.0
        b.omega_est = b.omega_true - 2.0
        np.testing.assert_allclose(ex.amse_series([a, b]), 4.0)

    def test_streaming_equals_two_pass(self):
        cfg = small_oup_config(n_trajectories=6)
        recs = [ex.run_trajectory(cfg, i) for i in range(6)]
        two_pass = ex.amse_series(recs)
        streaming = np.zeros_like(two_pass)
        for r in recs:  # single-pass accumulation, the independent route
            streaming += (r.omega_est - r.omega_true) ** 2
        streaming /= len(recs)
        np.testing.assert_allclose(streaming, two_pass, rtol=1e-12)

    def test_grid_mismatch_rejected(self):
        cfg_a = small_oup_config(horizon=1e-3)
        cfg_b = small_oup_config(horizon=2e-3)
        with pytest.raises(ValueError):
            ex.amse_series([ex.run_trajectory(cfg_a, 0),
                            ex.run_trajectory(cfg_b, 0)])


class TestEnsembleInvariants:
    def test_matched_ekf_self_consistency_on_plateau(self, fig3_matched_run):
        # matched filter: its own covariance tracks the realised error
        stats = fig3_matched_run.stats
        window = (stats.t >= 5e-3) & (stats.t <= 10e-3)
        sq_amse = np.sqrt(stats.amse[window].mean())
        sq_sigma = np.sqrt(stats.mean_sigma_omega[window].mean())
        assert abs(sq_sigma - sq_amse) / sq_amse < 0.15

    def test_bound_dominance_fig2(self, fig2_run):
        from spintrack import analysis

        assert analysis.bound_violations(fig2_run.stats, n_sigma=3.0) == 0

    def test_amse_reference_kinds(self):
        cfg = small_mcg_config()
        recs = [ex.run_trajectory(cfg, i) for i in range(2)]
        clean = ex.amse_series(recs, reference="true")
        noisy = ex.amse_series(recs, reference="noisy")
        assert not np.allclose(clean[1:], noisy[1:])
        with pytest.raises(ValueError):
            ex.amse_series(recs, reference="raw")


class TestConfigValidation:
    def test_kind_mismatch_rejected(self):
        cfg = small_oup_config()
        with pytest.raises(ValueError):
            ex.ScenarioConfig(
                sensor=cfg.sensor, signal=st.VdpParams(),
                ekf_model=cfg.ekf_model, lqr=cfg.lqr, horizon=1e-3,
                n_trajectories=1, base_seed=0)

    def test_sensor_mismatch_rejected(self):
        cfg = small_oup_config()
        other = st.SensorParams(n_mean=5e12, kappa_loc=100.0)
        with pytest.raises(ValueError):
            ex.ScenarioConfig(
                sensor=other, signal=cfg.signal, ekf_model=cfg.ekf_model,
                lqr=cfg.lqr, horizon=1e-3, n_trajectories=1, base_seed=0)

    def test_stability_guard(self):
        with pytest.raises(ValueError):
            st.SensorParams(n_mean=1e13, meas_strength=1e-3, dt=1e-7)
