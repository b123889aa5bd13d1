"""Compiled vs pure-python kernel cross-validation.

The two backends implement the same step sequence independently (composed
module operations vs hand-written C); short trajectories must agree to
float-accumulation level and report identical diagnostics.
"""

import numpy as np
import pytest

from spintrack import backend as bk
from spintrack import experiment as ex

from conftest import small_mcg_config, small_oup_config

HAVE_COMPILED = "compiled" in bk.available_backends()

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled kernel not built")


def _compare(rec_a, rec_b, rtol):
    for field in ("omega_true", "omega_noisy", "omega_est", "u", "y_increment",
                  "sigma_omega", "mean_x", "mean_y"):
        a, b = getattr(rec_a, field), getattr(rec_b, field)
        scale = np.maximum(np.abs(a), 1e-9)
        worst = np.max(np.abs(a - b) / scale)
        assert worst < rtol, f"{field}: rel diff {worst:.2e}"


@needs_compiled
class TestBackendParity:
    def test_oup_trajectory(self):
        cfg = small_oup_config(horizon=5e-4, seed=99)
        _compare(ex.run_trajectory(cfg, 0, backend="python"),
                 ex.run_trajectory(cfg, 0, backend="compiled"), rtol=1e-8)

    def test_oup_with_collective_dephasing(self):
        cfg = small_oup_config(horizon=5e-4, seed=100, kappa_coll=1e-5)
        _compare(ex.run_trajectory(cfg, 0, backend="python"),
                 ex.run_trajectory(cfg, 0, backend="compiled"), rtol=1e-8)

    def test_mcg_trajectory(self):
        cfg = small_mcg_config(horizon=5e-4)
        _compare(ex.run_trajectory(cfg, 0, backend="python"),
                 ex.run_trajectory(cfg, 0, backend="compiled"), rtol=1e-8)

    def test_partial_efficiency(self):
        cfg = small_oup_config(horizon=2e-4, seed=55, efficiency=0.7)
        _compare(ex.run_trajectory(cfg, 0, backend="python"),
                 ex.run_trajectory(cfg, 0, backend="compiled"), rtol=1e-8)

    def test_diagnostics_agree(self):
        cfg = small_oup_config(horizon=2e-4, seed=12, kappa_coll=1e-5)
        a = ex.run_trajectory(cfg, 0, backend="python")
        b = ex.run_trajectory(cfg, 0, backend="compiled")
        assert a.n_psd_floors == b.n_psd_floors
        assert a.n_cov_clamps == b.n_cov_clamps

    def test_record_keys_match(self):
        cfg = small_oup_config(horizon=1e-4)
        n_true, w0, dwm, dws = ex._draw_trajectory_inputs(cfg, 0)
        spec = ex.make_loop_spec(cfg, n_true, w0)
        out_py, _ = bk.get_backend("python").run_loop(spec, dwm, dws)
        out_cy, _ = bk.get_backend("compiled").run_loop(spec, dwm, dws)
        assert set(out_py) == set(out_cy) == set(bk.RECORD_KEYS)


class TestBackendSelection:
    def test_python_always_available(self):
        assert "python" in bk.available_backends()
        assert bk.get_backend("python").name == "python"

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            bk.get_backend("fortran")

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("SPINTRACK_BACKEND", "python")
        assert bk.get_backend().name == "python"

    def test_per_backend_determinism(self):
        cfg = small_oup_config(horizon=2e-4)
        for name in bk.available_backends():
            a = ex.run_trajectory(cfg, 0, backend=name)
            b = ex.run_trajectory(cfg, 0, backend=name)
            np.testing.assert_array_equal(a.omega_est, b.omega_est)


class TestLoopSpecValidation:
    def test_bad_mode(self):
        with pytest.raises(ValueError):
            bk.LoopSpec(mode=7, n_steps=100, record_stride=10, dt=1e-7,
                        meas_strength=1e-8, efficiency=1.0, kappa_loc=100.0,
                        kappa_coll=0.0, n_true=1e13, n_bar=1e13)

    def test_stride_divides_steps(self):
        with pytest.raises(ValueError):
            bk.LoopSpec(mode=0, n_steps=105, record_stride=10, dt=1e-7,
                        meas_strength=1e-8, efficiency=1.0, kappa_loc=100.0,
                        kappa_coll=0.0, n_true=1e13, n_bar=1e13)

    def test_noise_length_checked(self):
        cfg = small_oup_config(horizon=1e-4)
        spec = ex.make_loop_spec(cfg, 1e13, 0.0)
        with pytest.raises(ValueError):
            bk.get_backend("python").run_loop(spec, np.zeros(3), np.zeros(3))
