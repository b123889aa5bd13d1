"""Closed-loop trajectories and Monte Carlo ensembles.

A trajectory couples four pieces per simulation step: the truth moments
(Euler-Maruyama with the drawn atom number), the photocurrent (same Wiener
increment as the truth kick), the EKF (always using the nominal atom
number), and the LQR control applied with one step of latency.  Each
trajectory is a deterministic function of (config, base_seed, index): the
per-trajectory generator is PCG64 seeded with
SeedSequence(base_seed, spawn_key=(index,)), and draws happen in a fixed
order (atom number, initial field deviation, measurement increments,
signal increments).  Ensemble aggregation sums per-trajectory series in
index order, so results are independent of worker count and scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend as bk
from .bounds import BoundQuery, cs_bound_finite_prior
from .control import LqrParams
from .ekf import EkfModel, OupEkfModel, VdpEkfModel
from .sensor import SensorParams
from .signals import OupParams, VdpParams


class EnsembleError(RuntimeError):
    """Too many trajectories failed for the ensemble statistics to stand."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce an ensemble bit-for-bit."""

    sensor: SensorParams
    signal: OupParams | VdpParams
    ekf_model: EkfModel
    lqr: LqrParams
    horizon: float
    n_trajectories: int
    base_seed: int
    record_stride: int = 100
    prior_sigma0: float = 10.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not self.prior_sigma0 > 0:
            raise ValueError("prior_sigma0 must be positive")
        is_oup = isinstance(self.signal, OupParams)
        if is_oup != isinstance(self.ekf_model, OupEkfModel):
            raise ValueError("signal kind and EKF model kind must match")
        if self.ekf_model.sensor != self.sensor:
            raise ValueError("ekf_model must reference the scenario's SensorParams")

    @property
    def kind(self) -> str:
        return "oup" if isinstance(self.signal, OupParams) else "vdp"

    @property
    def n_steps(self) -> int:
        n = int(round(self.horizon / self.sensor.dt))
        return max(n - n % self.record_stride, self.record_stride)

    def time_grid(self) -> np.ndarray:
        stride_t = self.record_stride * self.sensor.dt
        return np.arange(self.n_steps // self.record_stride + 1) * stride_t


@dataclass
class TrajectoryRecord:
    """Strided time series of one closed-loop run."""

    t: np.ndarray
    omega_true: np.ndarray      # signal deviation from omega_bar, rad/s
    omega_noisy: np.ndarray     # drive deviation at the record bandwidth
    omega_est: np.ndarray
    u: np.ndarray               # full control field, rad/s
    y_increment: np.ndarray     # photocurrent accumulated per record window
    squeezing_db: np.ndarray
    squeezing_est_db: np.ndarray
    sigma_omega: np.ndarray     # filter variance of omega, rad^2/s^2
    mean_x: np.ndarray
    mean_y: np.ndarray
    drawn_n: float
    index: int
    n_cov_clamps: int = 0
    n_psd_floors: int = 0


@dataclass
class EnsembleStats:
    """Time-gridded ensemble averages plus the matching quantum bound."""

    t: np.ndarray
    amse: np.ndarray
    amse_stderr: np.ndarray
    mean_sigma_omega: np.ndarray
    mean_squeezing_db: np.ndarray
    mean_squeezing_est_db: np.ndarray
    bound: np.ndarray
    n_used: int
    failures: list[tuple[int, str]] = field(default_factory=list)
    total_cov_clamps: int = 0
    total_psd_floors: int = 0


def sample_atom_number(n_mean: float, n_sigma: float, rng: np.random.Generator) -> float:
    """Gaussian atom-number draw, rejecting non-positive values."""
    if n_sigma < 0:
        raise ValueError("n_sigma must be >= 0")
    if n_sigma == 0.0:
        return n_mean
    while True:
        n = rng.normal(n_mean, n_sigma)
        if n > 0:
            return n


def trajectory_rng(base_seed: int, index: int) -> np.random.Generator:
    """Index-addressable, independent stream for one trajectory."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))
    )


def make_loop_spec(cfg: ScenarioConfig, n_true: float, w0_dev: float) -> bk.LoopSpec:
    s = cfg.sensor
    common = dict(
        n_steps=cfg.n_steps,
        record_stride=cfg.record_stride,
        dt=s.dt,
        meas_strength=s.meas_strength,
        efficiency=s.efficiency,
        kappa_loc=s.kappa_loc,
        kappa_coll=s.kappa_coll,
        n_true=n_true,
        n_bar=s.n_mean,
        sigma0=cfg.prior_sigma0,
        lam=cfg.lqr.lambda_gain,
        w0_dev=w0_dev,
    )
    if cfg.kind == "oup":
        sig: OupParams = cfg.signal
        mdl: OupEkfModel = cfg.ekf_model
        return bk.LoopSpec(
            mode=bk.MODE_OUP,
            chi=sig.chi,
            q_omega=sig.q_omega,
            chi_k=mdl.chi_k,
            q_k=mdl.q_k,
            **common,
        )
    sig: VdpParams = cfg.signal
    mdl: VdpEkfModel = cfg.ekf_model
    return bk.LoopSpec(
        mode=bk.MODE_VDP,
        vdp_p=sig.p,
        vdp_k=sig.k,
        vdp_m=sig.m,
        vdp_c=sig.c,
        vdp_t=sig.t_filter,
        nu0=sig.init[0],
        ups0=sig.init[2],
        q_drive=sig.noise_density,
        ekf_p=mdl.p_k,
        ekf_k=mdl.k_k,
        ekf_m=mdl.m_k,
        ekf_c=mdl.c_k,
        ekf_t=mdl.t_k,
        q_k=mdl.q_k,
        est0_nu=mdl.init_estimate[0],
        est0_w=mdl.init_estimate[1],
        est0_ups=mdl.init_estimate[2],
        **common,
    )


def _draw_trajectory_inputs(cfg: ScenarioConfig, index: int):
    """Fixed draw order: N, initial deviation, measurement noise, signal noise."""
    rng = trajectory_rng(cfg.base_seed, index)
    n_true = sample_atom_number(cfg.sensor.n_mean, cfg.sensor.n_sigma, rng)
    if cfg.kind == "oup":
        w0_dev = cfg.prior_sigma0 * rng.standard_normal()
    else:
        w0_dev = cfg.signal.init[1]
    sdt = math.sqrt(cfg.sensor.dt)
    dw_meas = rng.normal(0.0, sdt, cfg.n_steps)
    dw_sig = rng.normal(0.0, sdt, cfg.n_steps)
    return n_true, w0_dev, dw_meas, dw_sig


def run_trajectory(
    cfg: ScenarioConfig, index: int, backend: str | None = None
) -> TrajectoryRecord:
    """Run one closed-loop trajectory; deterministic in (cfg, index)."""
    n_true, w0_dev, dw_meas, dw_sig = _draw_trajectory_inputs(cfg, index)
    kernel = bk.get_backend(backend)
    spec = make_loop_spec(cfg, n_true, w0_dev)
    out, diag = kernel.run_loop(spec, dw_meas, dw_sig)
    with np.errstate(divide="ignore"):
        sq_db = 10.0 * np.log10(out["xi2_true"])
        sq_est_db = 10.0 * np.log10(out["xi2_est"])
    return TrajectoryRecord(
        t=cfg.time_grid(),
        omega_true=out["w_true"],
        omega_noisy=out["w_noisy"],
        omega_est=out["w_est"],
        u=out["u_eff"] - cfg.sensor.omega_bar,
        y_increment=out["y_window"],
        squeezing_db=sq_db,
        squeezing_est_db=sq_est_db,
        sigma_omega=out["sigma_w"],
        mean_x=out["x_true"],
        mean_y=out["y_mean_true"],
        drawn_n=n_true,
        index=index,
        n_cov_clamps=diag["n_cov_clamps"],
        n_psd_floors=diag["n_psd_floors"],
    )


def _raw_trajectory(cfg: ScenarioConfig, index: int, kernel):
    n_true, w0_dev, dw_meas, dw_sig = _draw_trajectory_inputs(cfg, index)
    spec = make_loop_spec(cfg, n_true, w0_dev)
    return kernel.run_loop(spec, dw_meas, dw_sig)


def bound_series(cfg: ScenarioConfig, t: np.ndarray) -> np.ndarray:
    """Finite-prior quantum bound on the recorded grid (NaN for waveform
    scenarios, where no closed-form limit is implemented)."""
    if cfg.kind != "oup":
        return np.full(len(t), np.nan)
    s = cfg.sensor
    out = np.empty(len(t))
    for i, ti in enumerate(t):
        if ti <= 0.0:
            out[i] = cfg.prior_sigma0**2
        else:
            out[i] = cs_bound_finite_prior(
                BoundQuery(
                    t=float(ti),
                    n_atoms=s.n_mean,
                    q_omega=cfg.signal.q_omega,
                    kappa_loc=s.kappa_loc,
                    kappa_coll=s.kappa_coll,
                    sigma0=cfg.prior_sigma0,
                )
            )
    return out


def run_ensemble(
    cfg: ScenarioConfig,
    threads: int | None = None,
    backend: str | None = None,
    max_failure_fraction: float = 0.01,
) -> EnsembleStats:
    """Monte Carlo ensemble of independent trajectories.

    Trajectories run concurrently (the compiled kernel drops the GIL);
    failed trajectories are recorded and skipped, and the whole ensemble
    errors out if more than ``max_failure_fraction`` of them failed.
    """
    kernel = bk.get_backend(backend)
    threads = threads or os.cpu_count() or 1
    n_rec = cfg.n_steps // cfg.record_stride + 1

    sums = {
        k: np.zeros(n_rec)
        for k in ("err2", "err4", "sigma_w", "xi2_true", "xi2_est")
    }
    failures: list[tuple[int, str]] = []
    n_used = 0
    clamps = 0
    floors = 0

    def one(index: int):
        return _raw_trajectory(cfg, index, kernel)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(one, i) for i in range(cfg.n_trajectories)]
        for i, fut in enumerate(futures):
            try:
                out, diag = fut.result()
            except bk.TrajectoryError as exc:
                failures.append((i, str(exc)))
                continue
            err2 = (out["w_est"] - out["w_true"]) ** 2
            sums["err2"] += err2
            sums["err4"] += err2**2
            sums["sigma_w"] += out["sigma_w"]
            sums["xi2_true"] += out["xi2_true"]
            sums["xi2_est"] += out["xi2_est"]
            clamps += diag["n_cov_clamps"]
            floors += diag["n_psd_floors"]
            n_used += 1

    if len(failures) > max_failure_fraction * cfg.n_trajectories:
        raise EnsembleError(
            f"{len(failures)}/{cfg.n_trajectories} trajectories failed: "
            f"{failures[:3]}..."
        )
    if n_used == 0:
        raise EnsembleError("no trajectories succeeded")

    t = cfg.time_grid()
    amse = sums["err2"] / n_used
    if n_used > 1:
        var_err2 = (sums["err4"] / n_used - amse**2) * n_used / (n_used - 1)
        stderr = np.sqrt(np.maximum(var_err2, 0.0) / n_used)
    else:
        stderr = np.zeros(n_rec)
    with np.errstate(divide="ignore"):
        sq_db = 10.0 * np.log10(sums["xi2_true"] / n_used)
        sq_est_db = 10.0 * np.log10(sums["xi2_est"] / n_used)
    return EnsembleStats(
        t=t,
        amse=amse,
        amse_stderr=stderr,
        mean_sigma_omega=sums["sigma_w"] / n_used,
        mean_squeezing_db=sq_db,
        mean_squeezing_est_db=sq_est_db,
        bound=bound_series(cfg, t),
        n_used=n_used,
        failures=failures,
        total_cov_clamps=clamps,
        total_psd_floors=floors,
    )


def amse_series(records: list[TrajectoryRecord], reference: str = "true") -> np.ndarray:
    """Pointwise mean squared estimation error across trajectory records.

    ``reference`` picks the truth series: "true" (the clean signal, also the
    right choice for waveform scenarios) or "noisy" (the record-bandwidth
    drive, for diagnostics).
    """
    if not records:
        raise ValueError("need at least one record")
    if reference not in ("true", "noisy"):
        raise ValueError(f"unknown reference {reference!r}")
    t0 = records[0].t
    for r in records[1:]:
        if len(r.t) != len(t0) or not np.array_equal(r.t, t0):
            raise ValueError("trajectory records share no common time grid")
    attr = "omega_true" if reference == "true" else "omega_noisy"
    errs = np.stack([(r.omega_est - getattr(r, attr)) ** 2 for r in records])
    return errs.mean(axis=0)
