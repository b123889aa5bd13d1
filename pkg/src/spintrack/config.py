"""Scenario configuration files: YAML with unit-suffixed keys.

Unit bugs dominate the failure modes in this parameter regime (rates span
1e-11 .. 1e6 Hz), so every dimensionful key carries its unit in the name
(kappa_loc_hz, q_omega_rad2_s3, horizon_s, ...).  A ScenarioConfig
round-trips exactly through ``scenario_to_dict`` / ``scenario_from_dict``;
the CLI writes the echoed dict into the run manifest.
"""

from __future__ import annotations

from typing import Any

import yaml

from .control import LqrParams
from .ekf import OupEkfModel, VdpEkfModel
from .experiment import ScenarioConfig
from .sensor import SensorParams
from .signals import OupParams, VdpParams


class ConfigError(ValueError):
    """Configuration file failed to parse or validate."""


def _section(data: dict, name: str) -> dict:
    try:
        sec = data[name]
    except KeyError:
        raise ConfigError(f"missing section {name!r}") from None
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return sec


def _get(sec: dict, path: str, key: str, default=None, required: bool = False):
    if key in sec:
        return sec[key]
    if required:
        raise ConfigError(f"missing key {path}.{key}")
    return default


def _num(sec: dict, path: str, key: str, default=None, required: bool = False) -> float:
    val = _get(sec, path, key, default, required)
    if val is None:
        return None
    try:
        return float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key} must be a number, got {val!r}") from None


def scenario_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("top-level configuration must be a mapping")
    sen = _section(data, "sensor")
    sig = _section(data, "signal")
    ekf = _section(data, "ekf")
    lqr = data.get("lqr", {})
    if not isinstance(lqr, dict):
        raise ConfigError("section 'lqr' must be a mapping")
    run = _section(data, "run")

    try:
        sensor = SensorParams(
            n_mean=_num(sen, "sensor", "n_mean", required=True),
            n_sigma=_num(sen, "sensor", "n_sigma", 0.0),
            meas_strength=_num(sen, "sensor", "meas_strength_hz", required=True),
            efficiency=_num(sen, "sensor", "efficiency", 1.0),
            kappa_loc=_num(sen, "sensor", "kappa_loc_hz", required=True),
            kappa_coll=_num(sen, "sensor", "kappa_coll_hz", 0.0),
            omega_bar=_num(sen, "sensor", "omega_bar_rad_s", required=True),
            dt=_num(sen, "sensor", "dt_s", required=True),
        )
    except ValueError as exc:
        raise ConfigError(f"sensor: {exc}") from None

    kind = _get(sig, "signal", "kind", required=True)
    try:
        if kind == "oup":
            signal = OupParams(
                chi=_num(sig, "signal", "chi_per_s", required=True),
                q_omega=_num(sig, "signal", "q_omega_rad2_s3", required=True),
                omega_bar=sensor.omega_bar,
            )
            model = OupEkfModel(
                sensor,
                chi_k=_num(ekf, "ekf", "chi_k_per_s", required=True),
                q_k=_num(ekf, "ekf", "q_k_rad2_s3", required=True),
            )
        elif kind == "vdp":
            init = _get(sig, "signal", "init", [0.0045, 0.0045, 0.0045])
            signal = VdpParams(
                p=_num(sig, "signal", "p", 1e3),
                k=_num(sig, "signal", "k", 1.0),
                m=_num(sig, "signal", "m", 0.00098),
                c=_num(sig, "signal", "c", 1.0),
                t_filter=_num(sig, "signal", "t_filter_s", 0.003),
                init=tuple(float(v) for v in init),
                noise_density=_num(sig, "signal", "noise_density_rad2_s", 0.0),
            )
            est0 = _get(ekf, "ekf", "init_estimate", [3.0045, 3.0045, 3.0045])
            model = VdpEkfModel(
                sensor,
                p_k=_num(ekf, "ekf", "p_k", signal.p),
                k_k=_num(ekf, "ekf", "k_k", signal.k),
                m_k=_num(ekf, "ekf", "m_k", signal.m),
                c_k=_num(ekf, "ekf", "c_k", signal.c),
                t_k=_num(ekf, "ekf", "t_k_s", signal.t_filter),
                q_k=_num(ekf, "ekf", "q_k_rad2_s3", required=True),
                init_estimate=tuple(float(v) for v in est0),
            )
        else:
            raise ConfigError(f"signal.kind must be 'oup' or 'vdp', got {kind!r}")
    except ValueError as exc:
        raise ConfigError(f"signal/ekf: {exc}") from None

    try:
        return ScenarioConfig(
            sensor=sensor,
            signal=signal,
            ekf_model=model,
            lqr=LqrParams(_num(lqr, "lqr", "lambda_gain", 1.0)),
            horizon=_num(run, "run", "horizon_s", required=True),
            n_trajectories=int(_get(run, "run", "trajectories", required=True)),
            base_seed=int(_get(run, "run", "seed", required=True)),
            record_stride=int(_get(run, "run", "record_stride", 100)),
            prior_sigma0=_num(run, "run", "prior_sigma0_rad_s", 10.0),
        )
    except ValueError as exc:
        raise ConfigError(f"run: {exc}") from None


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    s = cfg.sensor
    out: dict[str, Any] = {
        "sensor": {
            "n_mean": s.n_mean,
            "n_sigma": s.n_sigma,
            "meas_strength_hz": s.meas_strength,
            "efficiency": s.efficiency,
            "kappa_loc_hz": s.kappa_loc,
            "kappa_coll_hz": s.kappa_coll,
            "omega_bar_rad_s": s.omega_bar,
            "dt_s": s.dt,
        },
        "lqr": {"lambda_gain": cfg.lqr.lambda_gain},
        "run": {
            "horizon_s": cfg.horizon,
            "trajectories": cfg.n_trajectories,
            "seed": cfg.base_seed,
            "record_stride": cfg.record_stride,
            "prior_sigma0_rad_s": cfg.prior_sigma0,
        },
    }
    if cfg.kind == "oup":
        sig: OupParams = cfg.signal
        mdl: OupEkfModel = cfg.ekf_model
        out["signal"] = {
            "kind": "oup",
            "chi_per_s": sig.chi,
            "q_omega_rad2_s3": sig.q_omega,
        }
        out["ekf"] = {"chi_k_per_s": mdl.chi_k, "q_k_rad2_s3": mdl.q_k}
    else:
        sig: VdpParams = cfg.signal
        mdl: VdpEkfModel = cfg.ekf_model
        out["signal"] = {
            "kind": "vdp",
            "p": sig.p,
            "k": sig.k,
            "m": sig.m,
            "c": sig.c,
            "t_filter_s": sig.t_filter,
            "init": list(sig.init),
            "noise_density_rad2_s": sig.noise_density,
        }
        out["ekf"] = {
            "p_k": mdl.p_k,
            "k_k": mdl.k_k,
            "m_k": mdl.m_k,
            "c_k": mdl.c_k,
            "t_k_s": mdl.t_k,
            "q_k_rad2_s3": mdl.q_k,
            "init_estimate": list(mdl.init_estimate),
        }
    return out


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(data)
