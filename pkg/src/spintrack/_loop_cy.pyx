# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled closed-loop trajectory kernel.

C re-implementation of the step sequence in ``spintrack._loop_py`` (truth
Euler-Maruyama -> photocurrent -> EKF update/Riccati -> LQR with one-step
latency), operating in the frame co-rotating at the nominal Larmor
frequency.  State dimension is 7 (OUP) or 9 (VdP); matrix work runs on
fixed 9x9 scratch buffers, the covariance spectrum is policed by a
shifted-Cholesky test with an eigenvalue-floor fallback, exactly like the
reference path.
"""

import numpy as np

from libc.math cimport INFINITY, copysign, fabs, sqrt
from scipy.linalg.cython_lapack cimport dpotrf, dsyev

name = "compiled"

cdef double PSD_FLOOR_BAND = 1e-9
cdef double DIVERGENCE_BAND = 0.5
cdef double COV_REPAIR_BAND = 1e-9
cdef double COV_REPAIR_REL = 1e-4

cdef enum:
    ERR_NONE = 0
    ERR_MOMENTS = 1
    ERR_DIVERGENCE = 2
    ERR_NONFINITE = 3


cdef struct Params:
    int mode            # 0 OUP, 1 VDP
    int n_steps
    int stride
    int dim             # 7 or 9
    int wslot           # 6 or 7
    double dt
    double m_s, eta, kl, kc
    double n_true, n_bar
    double chi, q_omega
    double vp, vk, vm, vc, vt      # truth VdP constants
    double nu0, w0, ups0           # truth signal initial state
    double sqn                     # sqrt(drive noise density)
    double chi_k, q_k
    double ep, ek, em, ec, et      # filter VdP constants
    double lam


cdef inline double _xi2(double n_atoms, double var_y, double mean_x) nogil:
    if mean_x == 0.0:
        return INFINITY
    return n_atoms * var_y / (mean_x * mean_x)


cdef inline void _atomic_drift(Params* pp, double* a, double owe, double n,
                               double* out) nogil:
    # a = (X, Y, VX, VY, VZ, CXY); out gets per-second rates
    cdef double kl = pp.kl, kc = pp.kc, m_s = pp.m_s
    cdef double emn = pp.eta * m_s * n
    out[0] = -owe * a[1] - 0.5 * (kc + 2.0 * kl + m_s) * a[0]
    out[1] = owe * a[0] - 0.5 * (kc + 2.0 * kl) * a[1]
    out[2] = (-2.0 * owe * a[5] + kc * (a[3] + a[1] * a[1] - a[2])
              + kl * (0.5 - 2.0 * a[2]) + m_s * (a[4] - a[2])
              - 4.0 * emn * a[5] * a[5])
    out[3] = (2.0 * owe * a[5] + kc * (a[2] + a[0] * a[0] - a[3])
              + kl * (0.5 - 2.0 * a[3]) - 4.0 * emn * a[3] * a[3])
    out[4] = m_s * (a[2] + a[0] * a[0] - a[4])
    out[5] = (owe * (a[2] - a[3]) - kc * (2.0 * a[5] + a[0] * a[1])
              - 2.0 * kl * a[5] - 0.5 * m_s * a[5] - 4.0 * emn * a[5] * a[3])


cdef inline void _vdp_deriv(double p, double k, double m, double c, double t,
                            double* s, double* out) nogil:
    out[0] = -p * s[1]
    out[1] = (k / m) * s[0] + 2.0 * (c / m) * (1.0 - s[2]) * s[1]
    out[2] = (fabs(s[0]) - s[0]) / (2.0 * t) - s[2] / t


cdef inline int _truth_step(Params* pp, double* a, double drive_omega,
                            double u_eff, double dw, int* clamps) nogil:
    cdef double d[6]
    cdef double owe = drive_omega + u_eff
    cdef double root = 2.0 * sqrt(pp.eta * pp.m_s * pp.n_true)
    cdef double gx = root * a[5]
    cdef double gy = root * a[3]
    cdef double dt = pp.dt
    cdef double c2, bound
    _atomic_drift(pp, a, owe, pp.n_true, d)
    a[0] += d[0] * dt + gx * dw
    a[1] += d[1] * dt + gy * dw
    a[2] += d[2] * dt
    a[3] += d[3] * dt
    a[4] += d[4] * dt
    a[5] += d[5] * dt
    if a[2] < 0.0 or a[3] < 0.0:
        if a[2] < -COV_REPAIR_BAND or a[3] < -COV_REPAIR_BAND:
            return ERR_MOMENTS
        if a[2] < 0.0:
            a[2] = 0.0
        if a[3] < 0.0:
            a[3] = 0.0
    c2 = a[5] * a[5]
    bound = a[2] * a[3]
    if c2 > bound:
        if c2 > bound + COV_REPAIR_BAND + COV_REPAIR_REL * (bound + 0.0625):
            return ERR_MOMENTS
        clamps[0] += 1
        a[5] = copysign(sqrt(bound), a[5])
    return ERR_NONE


cdef inline void _ekf_drift(Params* pp, double* x, double u_eff, double* out) nogil:
    cdef double owe
    cdef double s[3]
    if pp.mode == 0:
        owe = x[6] + u_eff
    else:
        owe = x[7] + u_eff
    _atomic_drift(pp, x, owe, pp.n_bar, out)
    if pp.mode == 0:
        out[6] = -pp.chi_k * x[6]
    else:
        s[0] = x[6]; s[1] = x[7]; s[2] = x[8]
        _vdp_deriv(pp.ep, pp.ek, pp.em, pp.ec, pp.et, s, out + 6)


cdef void _jacobian(Params* pp, double* x, double u_eff, double* f) nogil:
    # drift Jacobian (dim x dim, row-major) at the current estimate
    cdef int n = pp.dim
    cdef int w = pp.wslot
    cdef double kl = pp.kl, kc = pp.kc, m_s = pp.m_s
    cdef double emn = pp.eta * m_s * pp.n_bar
    cdef double owe, sign_nu
    cdef int i
    if pp.mode == 0:
        owe = x[6] + u_eff
    else:
        owe = x[7] + u_eff
    for i in range(n * n):
        f[i] = 0.0
    f[0 * n + 0] = -(0.5 * m_s + kl + 0.5 * kc)
    f[0 * n + 1] = -owe
    f[0 * n + w] = -x[1]
    f[1 * n + 0] = owe
    f[1 * n + 1] = -0.5 * (kc + 2.0 * kl)
    f[1 * n + w] = x[0]
    f[2 * n + 1] = 2.0 * kc * x[1]
    f[2 * n + 2] = -(m_s + 2.0 * kl + kc)
    f[2 * n + 3] = kc
    f[2 * n + 4] = m_s
    f[2 * n + 5] = -(8.0 * emn * x[5] + 2.0 * owe)
    f[2 * n + w] = -2.0 * x[5]
    f[3 * n + 0] = 2.0 * kc * x[0]
    f[3 * n + 2] = kc
    f[3 * n + 3] = -(kc + 2.0 * kl + 8.0 * emn * x[3])
    f[3 * n + 5] = 2.0 * owe
    f[3 * n + w] = 2.0 * x[5]
    f[4 * n + 0] = 2.0 * m_s * x[0]
    f[4 * n + 2] = m_s
    f[4 * n + 4] = -m_s
    f[5 * n + 0] = -kc * x[1]
    f[5 * n + 1] = -kc * x[0]
    f[5 * n + 2] = owe
    f[5 * n + 3] = -(owe + 4.0 * emn * x[5])
    f[5 * n + 5] = -(0.5 * m_s + 2.0 * kc + 2.0 * kl + 4.0 * emn * x[3])
    f[5 * n + w] = x[2] - x[3]
    if pp.mode == 0:
        f[6 * n + 6] = -pp.chi_k
    else:
        f[6 * n + 7] = -pp.ep
        f[7 * n + 6] = pp.ek / pp.em
        f[7 * n + 7] = 2.0 * pp.ec * (1.0 - x[8]) / pp.em
        f[7 * n + 8] = -2.0 * pp.ec * x[7] / pp.em
        if x[6] == 0.0:
            sign_nu = 0.0
        else:
            sign_nu = copysign(1.0, x[6])
        f[8 * n + 6] = (sign_nu - 1.0) / (2.0 * pp.et)
        f[8 * n + 8] = -1.0 / pp.et


cdef int _psd_enforce(double* sig, int n, int* floors) nogil:
    # shifted-Cholesky screen + eigenvalue floor fallback
    cdef double buf[81]
    cdef double evecs[81]
    cdef double w[9]
    cdef double work[64]
    cdef int i, j, k, info, lwork
    cdef double tr = 0.0, shift, lam, val
    for i in range(n * n):
        val = sig[i]
        if not (val == val and val - val == 0.0):
            return ERR_NONFINITE
    for i in range(n):
        tr += sig[i * n + i]
    shift = PSD_FLOOR_BAND * fabs(tr)
    if shift == 0.0:
        shift = 1e-300
    for i in range(n * n):
        buf[i] = sig[i]
    for i in range(n):
        buf[i * n + i] += shift
    info = 0
    dpotrf("U", &n, buf, &n, &info)
    if info == 0:
        return ERR_NONE
    for i in range(n * n):
        evecs[i] = sig[i]
    lwork = 64
    dsyev("V", "U", &n, evecs, &n, w, work, &lwork, &info)
    if info != 0:
        return ERR_NONFINITE
    if w[0] < -DIVERGENCE_BAND * fabs(tr):
        return ERR_DIVERGENCE
    if w[0] >= -PSD_FLOOR_BAND * fabs(tr):
        return ERR_NONE
    floors[0] += 1
    # sig = V max(w, 0) V^T; eigenvector k is column k, fortran order
    for i in range(n * n):
        sig[i] = 0.0
    for k in range(n):
        lam = w[k]
        if lam <= 0.0:
            continue
        for i in range(n):
            for j in range(n):
                sig[i * n + j] += lam * evecs[k * n + i] * evecs[k * n + j]
    for i in range(n):
        for j in range(i):
            lam = 0.5 * (sig[i * n + j] + sig[j * n + i])
            sig[i * n + j] = lam
            sig[j * n + i] = lam
    return ERR_NONE


cdef int _core(Params* pp, double* dw_meas, double* dw_sig,
               double* a, double* x, double* sig,
               double* o_wtrue, double* o_wnoisy, double* o_west,
               double* o_ueff, double* o_ywin, double* o_xtrue,
               double* o_ymean, double* o_xi2t, double* o_xi2e,
               double* o_sigw, int* clamps, int* floors,
               int* err_step) nogil:
    cdef int n = pp.dim
    cdef int w = pp.wslot
    cdef double dt = pp.dt
    cdef double h1 = 2.0 * pp.eta * sqrt(pp.m_s * pp.n_bar)
    cdef double r = pp.eta
    cdef double sq_eta = sqrt(pp.eta)
    cdef double root_bar = 2.0 * sqrt(pp.eta * pp.m_s * pp.n_bar)
    cdef double root_true = 2.0 * pp.eta * sqrt(pp.m_s * pp.n_true)
    cdef double sqw = sqrt(pp.q_omega)

    cdef double f[81]
    cdef double amat[81]
    cdef double tmp[81]
    cdef double news[81]
    cdef double v[9]
    cdef double gs[9]
    cdef double gain[9]
    cdef double drift[9]
    cdef double svdp[3]
    cdef double k1[3]
    cdef double k2[3]
    cdef double smid[3]

    cdef double wsig, u_eff, y_acc, wn_acc, y_dt, w_now, drive_omega, dw, dn
    cdef double innov, acc
    cdef int k, i, j, l, rec, code

    wsig = pp.w0
    svdp[0] = pp.nu0; svdp[1] = pp.w0; svdp[2] = pp.ups0

    u_eff = -x[w] - pp.lam * x[1]
    y_acc = 0.0
    wn_acc = 0.0
    rec = 0

    for k in range(pp.n_steps):
        if k % pp.stride == 0:
            w_now = wsig if pp.mode == 0 else svdp[1]
            o_wtrue[rec] = w_now
            o_wnoisy[rec] = w_now if k == 0 else wn_acc / (pp.stride * dt)
            o_west[rec] = x[w]
            o_ueff[rec] = u_eff
            o_ywin[rec] = y_acc
            o_xtrue[rec] = a[0]
            o_ymean[rec] = a[1]
            o_xi2t[rec] = _xi2(pp.n_true, a[3], a[0])
            o_xi2e[rec] = _xi2(pp.n_bar, x[3], x[0])
            o_sigw[rec] = sig[w * n + w]
            y_acc = 0.0
            wn_acc = 0.0
            rec += 1

        dw = dw_meas[k]
        dn = dw_sig[k]

        # photocurrent from the pre-step state, same increment as the kick
        y_dt = root_true * a[1] * dt + sq_eta * dw

        if pp.mode == 0:
            w_now = wsig
            drive_omega = w_now
        else:
            w_now = svdp[1]
            if pp.sqn > 0.0:
                drive_omega = w_now + pp.sqn * dn / dt
            else:
                drive_omega = w_now

        code = _truth_step(pp, a, drive_omega, u_eff, dw, clamps)
        if code != ERR_NONE:
            err_step[0] = k
            return code

        if pp.mode == 0:
            wsig = wsig - pp.chi * wsig * dt + sqw * dn
        else:
            _vdp_deriv(pp.vp, pp.vk, pp.vm, pp.vc, pp.vt, svdp, k1)
            smid[0] = svdp[0] + 0.5 * dt * k1[0]
            smid[1] = svdp[1] + 0.5 * dt * k1[1]
            smid[2] = svdp[2] + 0.5 * dt * k1[2]
            _vdp_deriv(pp.vp, pp.vk, pp.vm, pp.vc, pp.vt, smid, k2)
            svdp[0] += dt * k2[0]
            svdp[1] += dt * k2[1]
            svdp[2] += dt * k2[2]

        # ---- EKF ----
        _jacobian(pp, x, u_eff, f)
        for i in range(n):
            gs[i] = 0.0
        gs[0] = sq_eta * root_bar * x[5]
        gs[1] = sq_eta * root_bar * x[3]
        for i in range(n * n):
            amat[i] = f[i]
        amat[0 * n + 1] -= gs[0] * h1 / r
        amat[1 * n + 1] -= gs[1] * h1 / r
        for i in range(n):
            v[i] = sig[i * n + 1] * h1
            gain[i] = (v[i] + gs[i]) / r
        innov = y_dt - h1 * x[1] * dt
        _ekf_drift(pp, x, u_eff, drift)

        # tmp = A Sigma
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += amat[i * n + l] * sig[l * n + j]
                tmp[i * n + j] = acc
        for i in range(n):
            for j in range(n):
                news[i * n + j] = sig[i * n + j] + dt * (
                    tmp[i * n + j] + tmp[j * n + i] - v[i] * v[j] / r)
        news[w * n + w] += dt * pp.q_k  # (G Qt G^T) has this single entry
        for i in range(n):
            for j in range(i + 1):
                acc = 0.5 * (news[i * n + j] + news[j * n + i])
                sig[i * n + j] = acc
                sig[j * n + i] = acc
        for i in range(n):
            x[i] += drift[i] * dt + gain[i] * innov

        code = _psd_enforce(sig, n, floors)
        if code != ERR_NONE:
            err_step[0] = k
            return code

        u_eff = -x[w] - pp.lam * x[1]
        y_acc += y_dt
        wn_acc += drive_omega * dt

    w_now = wsig if pp.mode == 0 else svdp[1]
    o_wtrue[rec] = w_now
    o_wnoisy[rec] = wn_acc / (pp.stride * dt)
    o_west[rec] = x[w]
    o_ueff[rec] = u_eff
    o_ywin[rec] = y_acc
    o_xtrue[rec] = a[0]
    o_ymean[rec] = a[1]
    o_xi2t[rec] = _xi2(pp.n_true, a[3], a[0])
    o_xi2e[rec] = _xi2(pp.n_bar, x[3], x[0])
    o_sigw[rec] = sig[w * n + w]
    return ERR_NONE


def run_loop(spec, dw_meas, dw_sig):
    """Compiled counterpart of ``spintrack._loop_py.run_loop``."""
    from . import backend as bk

    bk._check_noise(spec, dw_meas, dw_sig)

    cdef Params pp
    cdef double a[6]
    cdef double x[9]
    cdef double sig[81]
    cdef int i, n
    cdef int clamps = 0, floors = 0, err_step = -1, code

    pp.mode = spec.mode
    pp.n_steps = spec.n_steps
    pp.stride = spec.record_stride
    pp.dim = 7 if spec.mode == 0 else 9
    pp.wslot = 6 if spec.mode == 0 else 7
    pp.dt = spec.dt
    pp.m_s = spec.meas_strength
    pp.eta = spec.efficiency
    pp.kl = spec.kappa_loc
    pp.kc = spec.kappa_coll
    pp.n_true = spec.n_true
    pp.n_bar = spec.n_bar
    pp.chi = spec.chi
    pp.q_omega = spec.q_omega
    pp.vp = spec.vdp_p
    pp.vk = spec.vdp_k
    pp.vm = spec.vdp_m
    pp.vc = spec.vdp_c
    pp.vt = spec.vdp_t
    pp.nu0 = spec.nu0
    pp.w0 = spec.w0_dev
    pp.ups0 = spec.ups0
    pp.sqn = sqrt(spec.q_drive)
    pp.chi_k = spec.chi_k
    pp.q_k = spec.q_k
    pp.ep = spec.ekf_p
    pp.ek = spec.ekf_k
    pp.em = spec.ekf_m
    pp.ec = spec.ekf_c
    pp.et = spec.ekf_t
    pp.lam = spec.lam
    n = pp.dim

    a[0] = sqrt(pp.n_true) / 2.0
    a[1] = 0.0; a[2] = 0.0; a[3] = 0.25; a[4] = 0.25; a[5] = 0.0
    x[0] = sqrt(pp.n_bar) / 2.0
    x[1] = 0.0; x[2] = 0.0; x[3] = 0.25; x[4] = 0.25; x[5] = 0.0
    for i in range(81):
        sig[i] = 0.0
    if pp.mode == 0:
        x[6] = 0.0
        sig[6 * n + 6] = spec.sigma0 ** 2
    else:
        x[6] = spec.est0_nu; x[7] = spec.est0_w; x[8] = spec.est0_ups
        for i in range(6, 9):
            sig[i * n + i] = spec.sigma0 ** 2

    out = {key: np.empty(spec.n_records) for key in bk.RECORD_KEYS}
    cdef double[::1] dwm = np.ascontiguousarray(dw_meas, dtype=np.float64)
    cdef double[::1] dws = np.ascontiguousarray(dw_sig, dtype=np.float64)
    cdef double[::1] o_wtrue = out["w_true"]
    cdef double[::1] o_wnoisy = out["w_noisy"]
    cdef double[::1] o_west = out["w_est"]
    cdef double[::1] o_ueff = out["u_eff"]
    cdef double[::1] o_ywin = out["y_window"]
    cdef double[::1] o_xtrue = out["x_true"]
    cdef double[::1] o_ymean = out["y_mean_true"]
    cdef double[::1] o_xi2t = out["xi2_true"]
    cdef double[::1] o_xi2e = out["xi2_est"]
    cdef double[::1] o_sigw = out["sigma_w"]

    with nogil:
        code = _core(&pp, &dwm[0], &dws[0], a, x, sig,
                     &o_wtrue[0], &o_wnoisy[0], &o_west[0], &o_ueff[0],
                     &o_ywin[0], &o_xtrue[0], &o_ymean[0], &o_xi2t[0],
                     &o_xi2e[0], &o_sigw[0], &clamps, &floors, &err_step)

    if code == ERR_MOMENTS:
        raise bk.TrajectoryError(
            "transverse moment covariance lost PSD beyond tolerance; reduce dt",
            err_step)
    if code == ERR_DIVERGENCE:
        raise bk.TrajectoryError("covariance eigenvalue below divergence band",
                                 err_step)
    if code == ERR_NONFINITE:
        raise bk.TrajectoryError("covariance contains non-finite entries",
                                 err_step)

    return out, {"n_cov_clamps": clamps, "n_psd_floors": floors}
