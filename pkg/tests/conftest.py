"""Shared fixtures: the full-scale scenarios are expensive, so the
ensemble runs are session-scoped and shared between the acceptance module
and the invariant tests."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pytest

import spintrack as st
from spintrack import presets
from spintrack.experiment import EnsembleStats, ScenarioConfig, TrajectoryRecord, run_ensemble, run_trajectory

ACCEPTANCE_TRAJECTORIES = 200


@dataclass
class ScenarioRun:
    cfg: ScenarioConfig
    stats: EnsembleStats
    sample: TrajectoryRecord
    runtime_s: float


def _run(cfg) -> ScenarioRun:
    started = time.time()
    stats = run_ensemble(cfg)
    sample = run_trajectory(cfg, 0)
    return ScenarioRun(cfg, stats, sample, time.time() - started)


@pytest.fixture(scope="session")
def fig2_run():
    return _run(presets.fig2(n_trajectories=ACCEPTANCE_TRAJECTORIES))


@pytest.fixture(scope="session")
def fig3_matched_run():
    return _run(presets.fig3_matched(n_trajectories=ACCEPTANCE_TRAJECTORIES))


@pytest.fixture(scope="session")
def fig3_mismatched_run():
    return _run(presets.fig3_mismatched(n_trajectories=ACCEPTANCE_TRAJECTORIES))


@pytest.fixture(scope="session")
def fig4_run():
    return _run(presets.fig4(n_trajectories=ACCEPTANCE_TRAJECTORIES))


def small_oup_config(horizon=1e-3, n_trajectories=4, seed=123, **sensor_overrides):
    sensor_kw = dict(
        n_mean=1e13, n_sigma=1e11, meas_strength=1e-8, efficiency=1.0,
        kappa_loc=100.0, kappa_coll=0.0, dt=1e-7,
    )
    sensor_kw.update(sensor_overrides)
    sensor = st.SensorParams(**sensor_kw)
    signal = st.OupParams(chi=1.0, q_omega=1e6, omega_bar=sensor.omega_bar)
    model = st.OupEkfModel(sensor, chi_k=1.0, q_k=1e6)
    return st.ScenarioConfig(
        sensor=sensor, signal=signal, ekf_model=model, lqr=st.LqrParams(1.0),
        horizon=horizon, n_trajectories=n_trajectories, base_seed=seed,
        record_stride=100,
    )


def small_mcg_config(horizon=2e-3, n_trajectories=2, seed=321):
    sensor = st.SensorParams(
        n_mean=1e13, n_sigma=1e11, meas_strength=1e-8, efficiency=1.0,
        kappa_loc=100.0, kappa_coll=0.0, dt=1e-7,
    )
    signal = st.VdpParams(noise_density=2.5e-7)
    model = st.VdpEkfModel(sensor, q_k=4e-5)
    return st.ScenarioConfig(
        sensor=sensor, signal=signal, ekf_model=model, lqr=st.LqrParams(1.0),
        horizon=horizon, n_trajectories=n_trajectories, base_seed=seed,
        record_stride=100,
    )


def random_moments(rng: np.random.Generator) -> st.AtomicMoments:
    """A physically plausible random moment vector (PSD transverse block)."""
    vx = rng.uniform(1e-4, 0.5)
    vy = rng.uniform(1e-4, 0.5)
    rho = rng.uniform(-0.95, 0.95)
    return st.AtomicMoments(
        mean_x=rng.uniform(1e4, 2e6),
        mean_y=rng.uniform(-100.0, 100.0),
        var_x=vx,
        var_y=vy,
        var_z=rng.uniform(1e-4, 10.0),
        cov_xy=rho * np.sqrt(vx * vy),
    )
