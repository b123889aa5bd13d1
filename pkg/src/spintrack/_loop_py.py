"""Pure-python closed-loop trajectory kernel.

Reference implementation: composes the public module operations
(step_truth, photocurrent_sample, oup_step/vdp_step, ekf_step,
lqr_control) one simulation step at a time.  The compiled kernel in
``_loop_cy`` re-implements exactly this sequence in C; the two are held
together by cross-validation tests.

Everything runs in the frame co-rotating at the nominal Larmor frequency:
signals are deviations and the control is u_eff = u + omega_bar.  The
moment equations only couple through omega + u, so this is exactly the
full-field simulation with the nominal value subtracted once.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend as bk
from .control import LqrParams, lqr_control
from .ekf import (
    EkfState,
    FilterDivergenceError,
    NoiseModel,
    OupEkfModel,
    VdpEkfModel,
    ekf_step,
    init_ekf,
)
from .sensor import (
    IntegrationInstabilityError,
    SensorParams,
    StepDiagnostics,
    css_initial_state,
    photocurrent_sample,
    step_truth,
)
from .signals import OupParams, OupState, VdpParams, VdpState, oup_step, vdp_step

name = "python"


def run_loop(
    spec: bk.LoopSpec, dw_meas: np.ndarray, dw_sig: np.ndarray
) -> tuple[dict[str, np.ndarray], dict[str, int]]:
    bk._check_noise(spec, dw_meas, dw_sig)
    dt = spec.dt
    p_sim = SensorParams(
        n_mean=spec.n_bar,
        n_sigma=0.0,
        meas_strength=spec.meas_strength,
        efficiency=spec.efficiency,
        kappa_loc=spec.kappa_loc,
        kappa_coll=spec.kappa_coll,
        omega_bar=0.0,
        dt=dt,
    )
    lqr = LqrParams(spec.lam)

    atoms = css_initial_state(spec.n_true)
    if spec.mode == bk.MODE_OUP:
        oup = OupParams(spec.chi, spec.q_omega, omega_bar=0.0)
        sig_state = OupState(spec.w0_dev)
        model = OupEkfModel(p_sim, spec.chi_k, spec.q_k)
        w_slot = 6
    else:
        vdp = VdpParams(spec.vdp_p, spec.vdp_k, spec.vdp_m, spec.vdp_c, spec.vdp_t)
        sig_state = VdpState(spec.nu0, spec.w0_dev, spec.ups0)
        model = VdpEkfModel(
            p_sim,
            spec.ekf_p,
            spec.ekf_k,
            spec.ekf_m,
            spec.ekf_c,
            spec.ekf_t,
            spec.q_k,
            init_estimate=(spec.est0_nu, spec.est0_w, spec.est0_ups),
        )
        w_slot = 7
    est = init_ekf(model, spec.sigma0, p_sim)
    noise = NoiseModel.for_model(model)
    sqn = math.sqrt(spec.q_drive)

    out = bk.allocate_outputs(spec)
    diag = StepDiagnostics()
    u_eff = lqr_control(est.estimate[w_slot], est.estimate[1], lqr)
    y_acc = 0.0
    wn_acc = 0.0
    rec = 0
    window_t = spec.record_stride * dt

    def record(idx: int, first: bool):
        nonlocal y_acc, wn_acc
        w_true = sig_state.omega
        out["w_true"][idx] = w_true
        out["w_noisy"][idx] = w_true if first else wn_acc / window_t
        out["w_est"][idx] = est.estimate[w_slot]
        out["u_eff"][idx] = u_eff
        out["y_window"][idx] = y_acc
        out["x_true"][idx] = atoms.mean_x
        out["y_mean_true"][idx] = atoms.mean_y
        out["xi2_true"][idx] = _xi2(spec.n_true, atoms.var_y, atoms.mean_x)
        out["xi2_est"][idx] = _xi2(spec.n_bar, est.estimate[3], est.estimate[0])
        out["sigma_w"][idx] = est.covariance[w_slot, w_slot]
        y_acc = 0.0
        wn_acc = 0.0

    try:
        for k in range(spec.n_steps):
            if k % spec.record_stride == 0:
                record(rec, first=(k == 0))
                rec += 1
            dw = float(dw_meas[k])
            dn = float(dw_sig[k])

            y_dt = photocurrent_sample(atoms, dw, p_sim, spec.n_true)
            w_now = sig_state.omega
            if spec.mode == bk.MODE_VDP and sqn > 0.0:
                drive_omega = w_now + sqn * dn / dt
            else:
                drive_omega = w_now
            atoms = step_truth(atoms, drive_omega, u_eff, dw, p_sim, spec.n_true, diag)
            if spec.mode == bk.MODE_OUP:
                sig_state = oup_step(sig_state, dn, dt, oup)
            else:
                sig_state = vdp_step(sig_state, dt, vdp)
            est = ekf_step(est, y_dt, u_eff, dt, model, noise)
            u_eff = lqr_control(est.estimate[w_slot], est.estimate[1], lqr)

            y_acc += y_dt
            wn_acc += drive_omega * dt
        record(rec, first=False)
    except (FilterDivergenceError, IntegrationInstabilityError) as exc:
        raise bk.TrajectoryError(str(exc), step=k) from exc

    return out, {"n_cov_clamps": diag.cov_clamps, "n_psd_floors": est.psd_floor_count}


def _xi2(n_atoms: float, var_y: float, mean_x: float) -> float:
    if mean_x == 0.0:
        return math.inf
    return n_atoms * var_y / (mean_x * mean_x)
