"""Ready-made scenario configurations for the headline experiments.

All presets share the warm-rubidium operating point: 1e13 atoms with 1%
shot-to-shot spread, T2 = 10 ms of local dephasing, perfect detection,
measurement strength 1e-8 Hz (backaction timescale 0.01 ms) and a nominal
Larmor frequency of 2 pi x 30 kHz.

fig2            OUP tracking without collective dephasing: the squeezing
                showcase (reaches about -13 dB near 0.5 ms, error floor
                about 1 rad/s).
fig3-matched    adds kappa_coll = 10 uHz, which kills squeezing but lets
                the tracking error reach the dephasing-dictated quantum
                bound (~1.78 rad/s); EKF matched to the true field.
fig3-mismatched same, but the EKF expects half-strength, 10x-faster field
                fluctuations; its covariance then underestimates the error.
fig4            noisy cardiac-like waveform (filtered Van der Pol) tracking.
larger-m        strong-measurement scenario with M = 1 mHz: deep squeezing
                develops within microseconds.  The Euler stability guard
                forces dt <= 0.1/(M*N) = 1e-11 s, so the preset covers a
                2 us horizon rather than a full coherence time.
"""

from __future__ import annotations

import math

from .control import LqrParams
from .ekf import OupEkfModel, VdpEkfModel
from .experiment import ScenarioConfig
from .sensor import SensorParams
from .signals import OupParams, VdpParams

OMEGA_BAR = 2.0 * math.pi * 30e3
CHI = 1.0
Q_OMEGA = 1e6
MCG_NOISE_DENSITY = 2.5e-7
# EKF innovation bandwidth for the waveform task.  The drive-noise density
# alone makes the filter too sluggish to follow the QRS upstroke within a
# few cycles; this value reproduces the reference third-cycle R-wave error
# (~2.6 rad/s) and is exposed in configs for retuning.
MCG_Q_K = 4e-5

DEFAULT_SEED = 20240831
DEFAULT_TRAJECTORIES = 200


def _sensor(kappa_coll: float = 0.0, meas_strength: float = 1e-8,
            dt: float = 1e-7) -> SensorParams:
    return SensorParams(
        n_mean=1e13,
        n_sigma=1e11,
        meas_strength=meas_strength,
        efficiency=1.0,
        kappa_loc=100.0,
        kappa_coll=kappa_coll,
        omega_bar=OMEGA_BAR,
        dt=dt,
    )


def _oup_scenario(sensor: SensorParams, chi_k: float, q_k: float,
                  horizon: float, n_trajectories: int, seed: int) -> ScenarioConfig:
    return ScenarioConfig(
        sensor=sensor,
        signal=OupParams(chi=CHI, q_omega=Q_OMEGA, omega_bar=sensor.omega_bar),
        ekf_model=OupEkfModel(sensor, chi_k=chi_k, q_k=q_k),
        lqr=LqrParams(1.0),
        horizon=horizon,
        n_trajectories=n_trajectories,
        base_seed=seed,
        record_stride=100,
        prior_sigma0=10.0,
    )


def fig2(n_trajectories: int = DEFAULT_TRAJECTORIES, seed: int = DEFAULT_SEED) -> ScenarioConfig:
    return _oup_scenario(_sensor(0.0), CHI, Q_OMEGA, 1e-2, n_trajectories, seed)


def fig3_matched(n_trajectories: int = DEFAULT_TRAJECTORIES, seed: int = DEFAULT_SEED) -> ScenarioConfig:
    return _oup_scenario(_sensor(1e-5), CHI, Q_OMEGA, 1e-2, n_trajectories, seed)


def fig3_mismatched(n_trajectories: int = DEFAULT_TRAJECTORIES, seed: int = DEFAULT_SEED) -> ScenarioConfig:
    return _oup_scenario(_sensor(1e-5), 10.0 * CHI, Q_OMEGA / 2.0, 1e-2,
                         n_trajectories, seed)


def fig4(n_trajectories: int = DEFAULT_TRAJECTORIES, seed: int = DEFAULT_SEED) -> ScenarioConfig:
    sensor = _sensor(0.0)
    return ScenarioConfig(
        sensor=sensor,
        signal=VdpParams(noise_density=MCG_NOISE_DENSITY),
        ekf_model=VdpEkfModel(sensor, q_k=MCG_Q_K),
        lqr=LqrParams(1.0),
        horizon=0.07,
        n_trajectories=n_trajectories,
        base_seed=seed,
        record_stride=100,
        prior_sigma0=10.0,
    )


def larger_m(n_trajectories: int = 50, seed: int = DEFAULT_SEED) -> ScenarioConfig:
    sensor = _sensor(kappa_coll=1e-9, meas_strength=1e-3, dt=1e-11)
    return _oup_scenario(sensor, CHI, Q_OMEGA, 2e-6, n_trajectories, seed)


PRESETS = {
    "fig2": fig2,
    "fig3-matched": fig3_matched,
    "fig3-mismatched": fig3_mismatched,
    "fig4": fig4,
    "larger-m": larger_m,
}

PRESET_NOTES = {
    "fig2": "OUP tracking, kappa_coll=0: squeezing to ~-13 dB, error ~1 rad/s",
    "fig3-matched": "OUP + kappa_coll=10 uHz, matched EKF: error at the ~1.78 rad/s bound",
    "fig3-mismatched": "same field, EKF with q_K=q/2, chi_K=10chi: covariance underestimates",
    "fig4": "noisy cardiac-like (VdP) waveform tracking, q_n=2.5e-7 rad^2/s",
    "larger-m": "M=1 mHz strong-measurement scenario (microsecond horizon)",
}


def get_preset(name: str, n_trajectories: int | None = None,
               seed: int | None = None) -> ScenarioConfig:
    if name not in PRESETS:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    kwargs = {}
    if n_trajectories is not None:
        kwargs["n_trajectories"] = n_trajectories
    if seed is not None:
        kwargs["seed"] = seed
    return PRESETS[name](**kwargs)
