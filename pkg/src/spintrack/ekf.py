"""Extended Kalman filter for the joint atomic + field state.

The filter propagates an estimate of the stacked state

    OUP variant (dim 7):  [<X>, <Y>, V_X, V_Y, V_Z, C_XY, omega]
    VdP variant (dim 9):  [<X>, <Y>, V_X, V_Y, V_Z, C_XY, nu, omega, upsilon]

from the photocurrent record.  The measurement noise and the process noise
on the conditional means come from the *same* Wiener increment, so this is
a correlated-noise Kalman problem: with R = eta, S = (sqrt(eta), 0)^T and
Q = diag(1, q_K), the gain is K = (Sigma H^T - G S) / R and the Riccati
drift uses the de-correlated pair (F - G S R^-1 H, Q - S R^-1 S^T).

Conventions
-----------
* The OUP variant carries the full Larmor frequency in its last slot
  (initialised at the nominal omega_bar); the VdP variant carries the
  waveform coordinates (nu, omega, upsilon) with omega the *deviation*
  from omega_bar, matching how the cardiac signal is specified.
* All filter-side atomic terms use the nominal atom number n_mean -- the
  experimenter never knows the per-shot draw.
* Jacobians are re-evaluated at the current estimate every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sensor import SensorParams, css_initial_state
from .signals import VdpParams, VdpState, vdp_derivative

# Sigma eigenvalue bands, relative to trace(Sigma): within PSD_FLOOR_BAND a
# negative eigenvalue is floored at 0 (counted); beyond DIVERGENCE_BAND the
# filter is declared lost.  Euler integration of the Riccati equation from a
# rank-deficient prior transiently leaves the PSD cone by up to ~0.1*trace
# during lock-on (a handful of floors in the first few steps keeps it
# stable), so divergence is only declared for order-of-trace violations.
PSD_FLOOR_BAND = 1e-9
DIVERGENCE_BAND = 0.5


class FilterDivergenceError(RuntimeError):
    """Covariance lost positive semidefiniteness beyond tolerance."""


@dataclass(frozen=True)
class OupEkfModel:
    """Filter-side model of an OUP field: decay chi_k (1/s) and diffusion
    strength q_k (rad^2/s^3), possibly mismatched from the true field."""

    sensor: SensorParams
    chi_k: float
    q_k: float

    def __post_init__(self):
        if not self.q_k > 0:
            raise ValueError("q_k must be positive")
        if not self.chi_k > 0:
            raise ValueError("chi_k must be positive")

    @property
    def dim(self) -> int:
        return 7


@dataclass(frozen=True)
class VdpEkfModel:
    """Filter-side copy of the Van der Pol waveform constants, plus the
    innovation-bandwidth q_k of the white-noise channel on omega."""

    sensor: SensorParams
    p_k: float = 1e3
    k_k: float = 1.0
    m_k: float = 0.00098
    c_k: float = 1.0
    t_k: float = 0.003
    q_k: float = 2.5e-7
    init_estimate: tuple[float, float, float] = (3.0045, 3.0045, 3.0045)

    def __post_init__(self):
        if min(self.p_k, self.k_k, self.m_k, self.c_k, self.t_k) <= 0:
            raise ValueError("VdP filter constants must be positive")
        if not self.q_k > 0:
            raise ValueError("q_k must be positive")

    @property
    def dim(self) -> int:
        return 9


EkfModel = OupEkfModel | VdpEkfModel


@dataclass
class EkfState:
    """Estimate vector, covariance, and a cumulative count of eigenvalue
    floors applied to keep the covariance PSD."""

    estimate: np.ndarray
    covariance: np.ndarray
    psd_floor_count: int = 0

    def __post_init__(self):
        self.estimate = np.asarray(self.estimate, dtype=float)
        self.covariance = np.asarray(self.covariance, dtype=float)


@dataclass(frozen=True)
class NoiseModel:
    """Process/measurement noise covariances Q, R and their correlation S."""

    q_matrix: np.ndarray
    r_scalar: float
    s_vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q_matrix", np.asarray(self.q_matrix, dtype=float))
        object.__setattr__(self, "s_vector", np.asarray(self.s_vector, dtype=float))
        if not self.r_scalar > 0:
            raise ValueError("r_scalar must be positive")
        qt = self.decorrelated_q()
        if np.linalg.eigvalsh(qt).min() < -1e-12 * max(1.0, np.trace(qt)):
            raise ValueError("Q - S R^-1 S^T must be positive semidefinite")

    def decorrelated_q(self) -> np.ndarray:
        s = self.s_vector
        return self.q_matrix - np.outer(s, s) / self.r_scalar

    @staticmethod
    def for_model(model: EkfModel) -> "NoiseModel":
        eta = model.sensor.efficiency
        return NoiseModel(
            q_matrix=np.diag([1.0, model.q_k]),
            r_scalar=eta,
            s_vector=np.array([math.sqrt(eta), 0.0]),
        )


def _vec(est) -> np.ndarray:
    return est.estimate if isinstance(est, EkfState) else np.asarray(est, dtype=float)


def _atomic_jacobian(out: np.ndarray, x: np.ndarray, owe: float, p: SensorParams, wcol: int):
    """Fill the 6 atomic rows of the drift Jacobian.

    ``owe`` is omega + u evaluated at the estimate; ``wcol`` is the column
    index of the omega component (6 for OUP, 7 for VdP).
    """
    kl, kc, m_s = p.kappa_loc, p.kappa_coll, p.meas_strength
    emn = p.efficiency * m_s * p.n_mean
    xh, yh = x[0], x[1]
    vxh, vyh, cxyh = x[2], x[3], x[5]

    out[0, 0] = -(0.5 * m_s + kl + 0.5 * kc)
    out[0, 1] = -owe
    out[0, wcol] = -yh
    out[1, 0] = owe
    out[1, 1] = -0.5 * (kc + 2.0 * kl)
    out[1, wcol] = xh
    out[2, 1] = 2.0 * kc * yh
    out[2, 2] = -(m_s + 2.0 * kl + kc)
    out[2, 3] = kc
    out[2, 4] = m_s
    out[2, 5] = -(8.0 * emn * cxyh + 2.0 * owe)
    out[2, wcol] = -2.0 * cxyh
    out[3, 0] = 2.0 * kc * xh
    out[3, 2] = kc
    out[3, 3] = -(kc + 2.0 * kl + 8.0 * emn * vyh)
    out[3, 5] = 2.0 * owe
    out[3, wcol] = 2.0 * cxyh
    out[4, 0] = 2.0 * m_s * xh
    out[4, 2] = m_s
    out[4, 4] = -m_s
    out[5, 0] = -kc * yh
    out[5, 1] = -kc * xh
    out[5, 2] = owe
    out[5, 3] = -(owe + 4.0 * emn * cxyh)
    out[5, 5] = -(0.5 * m_s + 2.0 * kc + 2.0 * kl + 4.0 * emn * vyh)
    out[5, wcol] = vxh - vyh


def jacobian_f_oup(est, u: float, model: OupEkfModel) -> np.ndarray:
    """Drift Jacobian F = grad_x f at the estimate, OUP variant (7x7)."""
    x = _vec(est)
    f = np.zeros((7, 7))
    _atomic_jacobian(f, x, x[6] + u, model.sensor, wcol=6)
    f[6, 6] = -model.chi_k
    return f


def jacobian_f_vdp(est, u: float, model: VdpEkfModel) -> np.ndarray:
    """Drift Jacobian F, VdP variant (9x9).

    The waveform block is the derivative of the filtered VdP system at the
    current signal estimate; the |nu| kink uses sign(0) = 0, i.e. the
    subgradient midpoint at nu = 0.
    """
    x = _vec(est)
    f = np.zeros((9, 9))
    owe = model.sensor.omega_bar + x[7] + u
    _atomic_jacobian(f, x, owe, model.sensor, wcol=7)
    nuh, wh, uph = x[6], x[7], x[8]
    f[6, 7] = -model.p_k
    f[7, 6] = model.k_k / model.m_k
    f[7, 7] = 2.0 * model.c_k * (1.0 - uph) / model.m_k
    f[7, 8] = -2.0 * model.c_k * wh / model.m_k
    sign_nu = 0.0 if nuh == 0.0 else math.copysign(1.0, nuh)
    f[8, 6] = (sign_nu - 1.0) / (2.0 * model.t_k)
    f[8, 8] = -1.0 / model.t_k
    return f


def jacobian_g(est, model: EkfModel) -> np.ndarray:
    """Noise Jacobian G = grad_xi f at the estimate (state-dim x 2).

    Column 0 couples the measurement noise into the conditional means;
    column 1 is the unit entry on the field-noise channel (the omega slot).
    """
    x = _vec(est)
    p = model.sensor
    g = np.zeros((model.dim, 2))
    root = 2.0 * math.sqrt(p.efficiency * p.meas_strength * p.n_mean)
    g[0, 0] = root * x[5]
    g[1, 0] = root * x[3]
    g[6 if model.dim == 7 else 7, 1] = 1.0
    return g


def measurement_row(p: SensorParams, dim: int = 7) -> np.ndarray:
    """Measurement Jacobian H: 2 eta sqrt(M n_mean) on the <Y> slot."""
    h = np.zeros(dim)
    h[1] = 2.0 * p.efficiency * math.sqrt(p.meas_strength * p.n_mean)
    return h


def kalman_gain(
    sigma: np.ndarray, h: np.ndarray, noise: NoiseModel, g: np.ndarray
) -> np.ndarray:
    """Correlated-noise Kalman gain K = (Sigma H^T + G S) R^-1.

    The + on the correlation term is what the Riccati drift in
    :func:`ekf_step` implies: completing the square in
    (F Sig + Sig F^T + G Q G^T - K R K^T ...) with
    K = (Sig H^T + G S) R^-1 reproduces exactly the
    (F - G S R^-1 H, Q - S R^-1 S^T) de-correlated form.  It is also what
    the physics demands: the innovation must move the conditional means
    *with* the measurement-backaction kick (same Wiener increment), not
    against it -- with the opposite sign the <Y> channel anti-tracks its
    own backaction and the closed loop destabilises once the conditional
    variance V_Y is large (collective-dephasing regime).
    """
    return (sigma @ h + g @ noise.s_vector) / noise.r_scalar


def ekf_drift(est, u: float, model: EkfModel) -> np.ndarray:
    """Noise-free state function f(x, u, 0) evaluated at the estimate."""
    x = _vec(est)
    p = model.sensor
    kl, kc, m_s = p.kappa_loc, p.kappa_coll, p.meas_strength
    emn = p.efficiency * m_s * p.n_mean
    xh, yh = x[0], x[1]
    vxh, vyh, vzh, cxyh = x[2], x[3], x[4], x[5]
    if model.dim == 7:
        owe = x[6] + u
    else:
        owe = p.omega_bar + x[7] + u

    out = np.empty(model.dim)
    out[0] = -owe * yh - 0.5 * (kc + 2.0 * kl + m_s) * xh
    out[1] = owe * xh - 0.5 * (kc + 2.0 * kl) * yh
    out[2] = (
        -2.0 * owe * cxyh
        + kc * (vyh + yh * yh - vxh)
        + kl * (0.5 - 2.0 * vxh)
        + m_s * (vzh - vxh)
        - 4.0 * emn * cxyh * cxyh
    )
    out[3] = (
        2.0 * owe * cxyh
        + kc * (vxh + xh * xh - vyh)
        + kl * (0.5 - 2.0 * vyh)
        - 4.0 * emn * vyh * vyh
    )
    out[4] = m_s * (vxh + xh * xh - vzh)
    out[5] = (
        owe * (vxh - vyh)
        - kc * (2.0 * cxyh + xh * yh)
        - 2.0 * kl * cxyh
        - 0.5 * m_s * cxyh
        - 4.0 * emn * cxyh * vyh
    )
    if model.dim == 7:
        out[6] = -model.chi_k * (x[6] - p.omega_bar)
    else:
        prm = VdpParams(model.p_k, model.k_k, model.m_k, model.c_k, model.t_k)
        out[6], out[7], out[8] = vdp_derivative(VdpState(x[6], x[7], x[8]), prm)
    return out


def jacobian_f(est, u: float, model: EkfModel) -> np.ndarray:
    if model.dim == 7:
        return jacobian_f_oup(est, u, model)
    return jacobian_f_vdp(est, u, model)


def init_ekf(model: EkfModel, prior_sigma0: float, p: SensorParams) -> EkfState:
    """Initial estimate and covariance from the assumed prior.

    Atomic slots start at the CSS for n_mean with zero covariance (state
    preparation assumed known); the signal block starts at omega_bar (OUP)
    or at the configured offset estimates (VdP) with variance
    prior_sigma0^2 per signal component.
    """
    if not prior_sigma0 > 0:
        raise ValueError("prior_sigma0 must be positive")
    css = css_initial_state(p.n_mean).as_array()
    x = np.zeros(model.dim)
    x[:6] = css
    sigma = np.zeros((model.dim, model.dim))
    if model.dim == 7:
        x[6] = p.omega_bar
        sigma[6, 6] = prior_sigma0**2
    else:
        x[6:9] = model.init_estimate
        sigma[6:9, 6:9] = prior_sigma0**2 * np.eye(3)
    return EkfState(x, sigma)


def ekf_step(
    state: EkfState,
    y_increment: float,
    u: float,
    dt: float,
    model: EkfModel,
    noise: NoiseModel,
) -> EkfState:
    """One Euler step of the coupled estimate / Riccati equations.

    The estimate advances by f(x, u, 0) dt plus the gain times the
    innovation y dt - H x dt; the covariance advances by the correlated
    -noise Riccati right-hand side and is re-symmetrised.  Raises
    :class:`FilterDivergenceError` if the covariance leaves the PSD cone
    beyond tolerance.
    """
    x, sigma = state.estimate, state.covariance
    f_mat = jacobian_f(x, u, model)
    g = jacobian_g(x, model)
    h = measurement_row(model.sensor, model.dim)
    r = noise.r_scalar
    gs = g @ noise.s_vector

    a = f_mat - np.outer(gs, h) / r
    sh = sigma @ h
    gain = (sh + gs) / r
    innovation = y_increment - h @ x * dt

    x_new = x + ekf_drift(x, u, model) * dt + gain * innovation
    sigma_new = sigma + dt * (
        a @ sigma
        + sigma @ a.T
        + g @ noise.decorrelated_q() @ g.T
        - np.outer(sh, sh) / r
    )
    sigma_new = 0.5 * (sigma_new + sigma_new.T)

    floors = state.psd_floor_count
    sigma_new, floors = enforce_psd(sigma_new, floors)
    return EkfState(x_new, sigma_new, floors)


def enforce_psd(sigma: np.ndarray, floor_count: int) -> tuple[np.ndarray, int]:
    """Check/repair the covariance spectrum.

    Eigenvalues above -PSD_FLOOR_BAND * trace are left alone; mildly
    negative ones are floored at zero (counted); anything below
    -DIVERGENCE_BAND * trace aborts with a divergence error.
    """
    if not np.isfinite(sigma).all():
        raise FilterDivergenceError("covariance contains non-finite entries")
    tr = float(np.trace(sigma))
    scale = max(abs(tr), 1e-300)
    evals, evecs = np.linalg.eigh(sigma)
    if evals[0] >= -PSD_FLOOR_BAND * scale:
        return sigma, floor_count
    if evals[0] < -DIVERGENCE_BAND * scale:
        raise FilterDivergenceError(
            f"covariance eigenvalue {evals[0]:.3e} below divergence band "
            f"({-DIVERGENCE_BAND * scale:.3e})"
        )
    repaired = (evecs * np.maximum(evals, 0.0)) @ evecs.T
    return 0.5 * (repaired + repaired.T), floor_count + 1
