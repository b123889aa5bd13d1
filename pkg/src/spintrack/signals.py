"""True-field generators: Ornstein-Uhlenbeck fluctuations and a cardiac-like
waveform built from a filtered Van der Pol oscillator.

The OUP models broadband field noise reverting to the nominal Larmor
frequency.  The filtered VdP system

    d nu      = -p omega dt
    d omega   = (k/m) nu dt + 2 (c/m) (1 - upsilon) omega dt
    d upsilon = [(|nu| - nu) / (2 T) - upsilon / T] dt

settles on a limit cycle whose omega component looks like a
magnetocardiogram (P/QRS/T morphology, ~20 ms period at the default
coefficients).  omega is read directly in rad/s as the deviation of the
Larmor frequency from its nominal value.

For noisy-MCG scenarios the waveform is additionally corrupted by white
frequency noise of density ``noise_density`` before it drives the atoms;
the clean waveform remains the estimation target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class OupParams:
    """Mean-reverting field noise: decay rate chi (1/s), diffusion strength
    q_omega (rad^2/s^3), equilibrium angular frequency omega_bar (rad/s)."""

    chi: float
    q_omega: float
    omega_bar: float = 0.0

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError(f"chi must be positive, got {self.chi}")
        if self.q_omega < 0:
            raise ValueError(f"q_omega must be >= 0, got {self.q_omega}")


@dataclass(frozen=True)
class VdpParams:
    """Filtered Van der Pol coefficients plus the drive-noise density."""

    p: float = 1e3
    k: float = 1.0
    m: float = 0.00098
    c: float = 1.0
    t_filter: float = 0.003
    init: tuple[float, float, float] = (0.0045, 0.0045, 0.0045)
    noise_density: float = 0.0  # rad^2/s, white frequency noise on the drive

    def __post_init__(self):
        if min(self.p, self.k, self.m, self.c, self.t_filter) <= 0:
            raise ValueError("VdP coefficients p, k, m, c, t_filter must be positive")
        if self.noise_density < 0:
            raise ValueError("noise_density must be >= 0")


@dataclass(frozen=True)
class OupState:
    omega: float  # rad/s


@dataclass(frozen=True)
class VdpState:
    nu: float
    omega: float
    upsilon: float


def oup_step(s: OupState, dW_omega: float, dt: float, prm: OupParams) -> OupState:
    """Euler-Maruyama step of d omega = -chi (omega - omega_bar) dt + sqrt(q) dW."""
    return OupState(
        s.omega
        - prm.chi * (s.omega - prm.omega_bar) * dt
        + math.sqrt(prm.q_omega) * dW_omega
    )


def oup_stationary_variance(prm: OupParams) -> float:
    """Long-run variance q_omega / (2 chi) of the OUP."""
    return prm.q_omega / (2.0 * prm.chi)


def vdp_derivative(s: VdpState, prm: VdpParams) -> tuple[float, float, float]:
    """Right-hand side of the filtered VdP system."""
    dnu = -prm.p * s.omega
    domega = (prm.k / prm.m) * s.nu + 2.0 * (prm.c / prm.m) * (1.0 - s.upsilon) * s.omega
    dups = (abs(s.nu) - s.nu) / (2.0 * prm.t_filter) - s.upsilon / prm.t_filter
    return dnu, domega, dups


def vdp_step(s: VdpState, dt: float, prm: VdpParams) -> VdpState:
    """Explicit-midpoint (RK2) step of the filtered VdP system.

    The system is non-stiff at the default coefficients; RK2 keeps the
    limit-cycle extrema stable against the step size so regression values
    frozen at one dt survive refinement.
    """
    k1 = vdp_derivative(s, prm)
    mid = VdpState(
        s.nu + 0.5 * dt * k1[0],
        s.omega + 0.5 * dt * k1[1],
        s.upsilon + 0.5 * dt * k1[2],
    )
    k2 = vdp_derivative(mid, prm)
    return VdpState(s.nu + dt * k2[0], s.omega + dt * k2[1], s.upsilon + dt * k2[2])


def vdp_initial_state(prm: VdpParams) -> VdpState:
    return VdpState(*prm.init)


def noisy_drive_increment(
    omega_clean: float, dW_n: float, dt: float, prm: VdpParams
) -> float:
    """Phase increment of the corrupted drive over one step.

    Returns omega_clean * dt + sqrt(noise_density) * dW_n; the noise term is
    phase diffusion (white frequency noise), so the corruption is filtered
    out by the estimator rather than tracked.
    """
    return omega_clean * dt + math.sqrt(prm.noise_density) * dW_n
