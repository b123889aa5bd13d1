"""Conditional-moment model of a continuously probed atomic spin ensemble.

The sensor is an ensemble of N spin-1/2 atoms pumped into a coherent spin
state (CSS) along x and precessing around z at the Larmor frequency set by
the magnetic field.  A far-detuned probe reads out the y-component of the
collective spin (Faraday rotation), producing a homodyne-like photocurrent

    y(t) dt = 2 eta sqrt(M N) <Y> dt + sqrt(eta) dW,

where Y = J_y / sqrt(N), eta is the detection efficiency and M the
measurement strength.  For large N the conditional state stays Gaussian in
a co-moving frame, so the full dynamics closes on six numbers: the two
transverse means <X>, <Y> and the second moments V_X, V_Y, V_Z, C_XY
(all normalised by N).  This module owns those six numbers and their
equations of motion:

 * deterministic drift: precession at omega + u, local/collective
   dephasing (rates kappa_loc, kappa_coll), and measurement backaction,
   including the variance-squeezing term -4 eta M N V_Y^2;
 * stochastic kick: the *same* Wiener increment dW that appears in the
   photocurrent also drives the conditional means through
   2 sqrt(eta M N) (C_XY, V_Y) -- measurement noise and backaction are
   perfectly correlated, which is what a Kalman filter later exploits.

Everything here is a pure function; trajectory loops (see
``spintrack.backend``) just compose these operations step by step.

Typical magnitudes (rubidium vapour-cell conditions): N ~ 1e13,
M ~ 1e-8 Hz, so the backaction timescale 1/(M N) is ~0.01 ms while
T2 = 1/(kappa_coll/2 + kappa_loc) is ~10 ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Transverse-covariance repair band.  With collective dephasing the moment
# flow legitimately presses cov_xy against the PSD boundary during lock-on
# (the kappa_coll <X><Y> term outruns the variance growth), so the clamp
# slides along the boundary with a per-step overshoot proportional to dt.
# The overshoot is tolerated while small against the CSS variance scale
# (1/4)^2; anything larger indicates a genuinely unstable step size.
PSD_REPAIR_BAND = 1e-9
PSD_REPAIR_REL = 1e-4


def _cov_repair_band(vx: float, vy: float) -> float:
    return PSD_REPAIR_BAND + PSD_REPAIR_REL * (vx * vy + 0.0625)

_HBAR = 1.054571817e-34  # J s
_C_LIGHT = 2.99792458e8  # m/s
_R_E_CM = 2.8179403262e-13  # classical electron radius, cm


class IntegrationInstabilityError(RuntimeError):
    """Raised when a truth step violates the moment invariants badly enough
    that only a smaller dt can fix it."""


@dataclass
class StepDiagnostics:
    """Mutable tally of in-band invariant repairs applied while stepping."""

    cov_clamps: int = 0


@dataclass(frozen=True)
class SensorParams:
    """Physical constants of the ensemble and probe.

    n_mean / n_sigma: mean and shot-to-shot std of the atom number.
    meas_strength: M in Hz (light-atom coupling over photon shot noise).
    efficiency: photodetection efficiency eta in [0, 1].
    kappa_loc / kappa_coll: local and collective dephasing rates in Hz.
    omega_bar: nominal Larmor angular frequency in rad/s.
    dt: integration step in seconds.
    """

    n_mean: float
    n_sigma: float = 0.0
    meas_strength: float = 1e-8
    efficiency: float = 1.0
    kappa_loc: float = 100.0
    kappa_coll: float = 0.0
    omega_bar: float = 2.0 * math.pi * 30e3
    dt: float = 1e-7

    def __post_init__(self):
        if not self.n_mean > 0:
            raise ValueError(f"n_mean must be positive, got {self.n_mean}")
        if self.n_sigma < 0:
            raise ValueError(f"n_sigma must be >= 0, got {self.n_sigma}")
        if self.meas_strength < 0:
            raise ValueError("meas_strength must be >= 0")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.kappa_loc < 0 or self.kappa_coll < 0:
            raise ValueError("dephasing rates must be >= 0")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        guard = self.dt * self.meas_strength * self.n_mean
        if guard > 0.1:
            raise ValueError(
                f"dt*M*N = {guard:.3g} exceeds the Euler stability guard 0.1; "
                "reduce dt below 0.1/(M*N)"
            )


@dataclass(frozen=True)
class AtomicMoments:
    """First and second conditional moments of the normalised collective spin.

    mean_x, mean_y are <X>, <Y> with X = J_x/sqrt(N); var_* and cov_xy are
    the matching (co)variances.  A CSS polarised along x has
    (sqrt(N)/2, 0, 0, 1/4, 1/4, 0).
    """

    mean_x: float
    mean_y: float
    var_x: float
    var_y: float
    var_z: float
    cov_xy: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mean_x, self.mean_y, self.var_x, self.var_y, self.var_z, self.cov_xy]
        )

    @staticmethod
    def from_array(a) -> "AtomicMoments":
        return AtomicMoments(*(float(v) for v in a))


def css_initial_state(n_atoms: float) -> AtomicMoments:
    """Moments of the coherent spin state along x for ``n_atoms`` spins."""
    if not n_atoms > 0:
        raise ValueError(f"n_atoms must be positive, got {n_atoms}")
    return AtomicMoments(math.sqrt(n_atoms) / 2.0, 0.0, 0.0, 0.25, 0.25, 0.0)


def atomic_drift(
    state: AtomicMoments,
    omega_eff: float,
    p: SensorParams,
    n_atoms: float | None = None,
) -> AtomicMoments:
    """Deterministic part of the moment equations, as per-second rates.

    ``omega_eff`` is the total precession rate omega(t) + u(t) seen by the
    atoms.  ``n_atoms`` defaults to ``p.n_mean``; the truth simulation passes
    the per-shot draw instead.
    """
    n = p.n_mean if n_atoms is None else n_atoms
    kl, kc, m_s, eta = p.kappa_loc, p.kappa_coll, p.meas_strength, p.efficiency
    x, y = state.mean_x, state.mean_y
    vx, vy, vz, cxy = state.var_x, state.var_y, state.var_z, state.cov_xy
    emn = eta * m_s * n

    dx = -omega_eff * y - 0.5 * (kc + 2.0 * kl + m_s) * x
    dy = omega_eff * x - 0.5 * (kc + 2.0 * kl) * y
    dvx = (
        -2.0 * omega_eff * cxy
        + kc * (vy + y * y - vx)
        + kl * (0.5 - 2.0 * vx)
        + m_s * (vz - vx)
        - 4.0 * emn * cxy * cxy
    )
    dvy = (
        2.0 * omega_eff * cxy
        + kc * (vx + x * x - vy)
        + kl * (0.5 - 2.0 * vy)
        - 4.0 * emn * vy * vy
    )
    dvz = m_s * (vx + x * x - vz)
    dcxy = (
        omega_eff * (vx - vy)
        - kc * (2.0 * cxy + x * y)
        - 2.0 * kl * cxy
        - 0.5 * m_s * cxy
        - 4.0 * emn * cxy * vy
    )
    return AtomicMoments(dx, dy, dvx, dvy, dvz, dcxy)


def atomic_diffusion(
    state: AtomicMoments, p: SensorParams, n_atoms: float | None = None
) -> tuple[float, float]:
    """Coefficients multiplying dW in the mean_x / mean_y equations.

    Only the two conditional means feel the measurement noise; the second
    moments are noise-free (their stochastic parts cancel in the co-moving
    Gaussian reduction).
    """
    n = p.n_mean if n_atoms is None else n_atoms
    root = 2.0 * math.sqrt(p.efficiency * p.meas_strength * n)
    return (root * state.cov_xy, root * state.var_y)


def step_truth(
    state: AtomicMoments,
    omega_drive: float,
    u: float,
    dW: float,
    p: SensorParams,
    n_atoms: float | None = None,
    diag: StepDiagnostics | None = None,
) -> AtomicMoments:
    """One Euler-Maruyama step of the conditional moments.

    ``dW`` must be the same Wiener increment later fed to
    :func:`photocurrent_sample` for this step -- the measurement record and
    the backaction kick share their noise.
    """
    if not math.isfinite(dW):
        raise ValueError("dW must be finite")
    d = atomic_drift(state, omega_drive + u, p, n_atoms)
    gx, gy = atomic_diffusion(state, p, n_atoms)
    dt = p.dt
    new = AtomicMoments(
        state.mean_x + d.mean_x * dt + gx * dW,
        state.mean_y + d.mean_y * dt + gy * dW,
        state.var_x + d.var_x * dt,
        state.var_y + d.var_y * dt,
        state.var_z + d.var_z * dt,
        state.cov_xy + d.cov_xy * dt,
    )
    return repair_transverse_psd(new, diag)


def repair_transverse_psd(
    state: AtomicMoments, diag: StepDiagnostics | None = None
) -> AtomicMoments:
    """Project the transverse covariance block back onto PSD if a step
    nudged it out, or raise if it is too far gone for a projection.

    The repair is a multiplicative clamp of cov_xy onto the boundary
    cov_xy^2 = var_x var_y, the cheapest projection that keeps signs.
    """
    vx, vy = state.var_x, state.var_y
    if vx < 0.0 or vy < 0.0:
        if vx < -PSD_REPAIR_BAND or vy < -PSD_REPAIR_BAND:
            raise IntegrationInstabilityError(
                f"negative variance after step (var_x={vx:.3e}, var_y={vy:.3e}); "
                "reduce dt"
            )
        vx, vy = max(vx, 0.0), max(vy, 0.0)
        state = AtomicMoments(state.mean_x, state.mean_y, vx, vy, state.var_z, state.cov_xy)
    c2, bound = state.cov_xy**2, vx * vy
    if c2 <= bound:
        return state
    if c2 > bound + _cov_repair_band(vx, vy):
        raise IntegrationInstabilityError(
            f"transverse covariance lost PSD (cov^2-bound={c2 - bound:.3e}); reduce dt"
        )
    if diag is not None:
        diag.cov_clamps += 1
    clamped = math.copysign(math.sqrt(bound), state.cov_xy)
    return AtomicMoments(state.mean_x, state.mean_y, vx, vy, state.var_z, clamped)


def photocurrent_sample(
    state: AtomicMoments, dW: float, p: SensorParams, n_atoms: float | None = None
) -> float:
    """Photocurrent increment y(t) dt for the current state and noise draw."""
    n = p.n_mean if n_atoms is None else n_atoms
    eta = p.efficiency
    return (
        2.0 * eta * math.sqrt(p.meas_strength * n) * state.mean_y * p.dt
        + math.sqrt(eta) * dW
    )


def t2_time(p: SensorParams) -> float:
    """Transverse coherence time 1/(kappa_coll/2 + kappa_loc)."""
    rate = 0.5 * p.kappa_coll + p.kappa_loc
    if rate <= 0.0:
        raise ValueError("T2 undefined: both dephasing rates are zero")
    return 1.0 / rate


def squeezing_db(state: AtomicMoments, n_atoms: float) -> float:
    """Spin-squeezing parameter in decibels, CSS-anchored.

    xi^2 = N var_y / mean_x^2 in normalised moments, which equals the
    Wineland ratio N Var(J_y)/<J_x>^2 and is exactly 1 (0 dB) for the CSS.
    Negative dB certifies metrologically useful squeezing.
    """
    if state.mean_x == 0.0:
        raise ValueError("squeezing undefined at mean_x = 0")
    xi2 = n_atoms * state.var_y / state.mean_x**2
    return 10.0 * math.log10(xi2)


def measurement_strength_from_probe(
    probe_power: float,
    detuning: float,
    beam_area: float,
    oscillator_strength: float,
    wavelength: float,
) -> float:
    """Measurement strength M (Hz) from probe-beam parameters.

    M = g^2 Ndot / 4 with coupling g = c r_e f_osc / (A_eff dnu) and photon
    flux Ndot = P / (2 pi hbar nu).  ``probe_power`` in W, ``detuning`` in
    Hz, ``beam_area`` in cm^2, ``wavelength`` in m.
    """
    if detuning == 0.0:
        raise ZeroDivisionError("measurement strength diverges at zero detuning")
    if min(probe_power, beam_area, oscillator_strength, wavelength) <= 0:
        raise ValueError("probe parameters must be positive")
    g = (_C_LIGHT * 100.0) * _R_E_CM * oscillator_strength / (beam_area * detuning)
    nu = _C_LIGHT / wavelength
    ndot = probe_power / (2.0 * math.pi * _HBAR * nu)
    return g * g * ndot / 4.0
