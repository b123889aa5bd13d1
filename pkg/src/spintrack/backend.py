"""Kernel selection: compiled trajectory loop with pure-python fallback.

The closed-loop step (truth SDE + photocurrent + EKF + LQR) runs ~1e5
times per trajectory, so the inner loop is compiled (Cython) when the
extension built; a pure-python loop composing the public module
operations is the reference implementation and the fallback.  Both
consume an identical :class:`LoopSpec` and pre-drawn noise arrays and
emit identical record dictionaries, which is what the cross-validation
tests compare.

Selection: ``get_backend()`` prefers the compiled kernel; set
``SPINTRACK_BACKEND=python`` (or pass ``name="python"``) to force the
fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

MODE_OUP = 0
MODE_VDP = 1


class TrajectoryError(RuntimeError):
    """A trajectory aborted (filter divergence or integrator instability)."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} at step {step}")
        self.step = step


@dataclass(frozen=True)
class LoopSpec:
    """Flat, backend-agnostic description of one closed-loop trajectory.

    All omega-like quantities are deviations from the nominal Larmor
    frequency; the nominal value cancels exactly between the field and the
    compensating control, so it never enters the loop arithmetic.
    """

    mode: int
    n_steps: int
    record_stride: int
    dt: float
    # sensor
    meas_strength: float
    efficiency: float
    kappa_loc: float
    kappa_coll: float
    n_true: float
    n_bar: float
    # true signal
    chi: float = 0.0
    q_omega: float = 0.0
    w0_dev: float = 0.0
    vdp_p: float = 0.0
    vdp_k: float = 0.0
    vdp_m: float = 0.0
    vdp_c: float = 0.0
    vdp_t: float = 0.0
    nu0: float = 0.0
    ups0: float = 0.0
    q_drive: float = 0.0
    # filter model
    chi_k: float = 0.0
    q_k: float = 0.0
    ekf_p: float = 0.0
    ekf_k: float = 0.0
    ekf_m: float = 0.0
    ekf_c: float = 0.0
    ekf_t: float = 0.0
    est0_nu: float = 0.0
    est0_w: float = 0.0
    est0_ups: float = 0.0
    sigma0: float = 10.0
    # control
    lam: float = 1.0

    def __post_init__(self):
        if self.mode not in (MODE_OUP, MODE_VDP):
            raise ValueError(f"unknown mode {self.mode}")
        if self.n_steps <= 0 or self.record_stride <= 0:
            raise ValueError("n_steps and record_stride must be positive")
        if self.n_steps % self.record_stride != 0:
            raise ValueError("n_steps must be a multiple of record_stride")

    @property
    def n_records(self) -> int:
        return self.n_steps // self.record_stride + 1


RECORD_KEYS = (
    "w_true",     # clean signal deviation, rad/s
    "w_noisy",    # drive deviation binned over the record window (== w_true for OUP)
    "w_est",      # filter estimate of the deviation
    "u_eff",      # control in the deviation frame (u + omega_bar)
    "y_window",   # photocurrent increment accumulated over the window
    "x_true",     # true <X>
    "y_mean_true",  # true <Y>
    "xi2_true",   # spin-squeezing parameter, linear
    "xi2_est",    # filter-side squeezing prediction, linear
    "sigma_w",    # filter variance of the omega slot, rad^2/s^2
)


def allocate_outputs(spec: LoopSpec) -> dict[str, np.ndarray]:
    return {k: np.empty(spec.n_records) for k in RECORD_KEYS}


def _check_noise(spec: LoopSpec, dw_meas: np.ndarray, dw_sig: np.ndarray):
    if len(dw_meas) != spec.n_steps or len(dw_sig) != spec.n_steps:
        raise ValueError("noise arrays must have length n_steps")


def get_backend(name: str | None = None):
    """Return the kernel module to use: 'compiled' or 'python'."""
    name = name or os.environ.get("SPINTRACK_BACKEND", "auto")
    if name in ("auto", "compiled"):
        try:
            from . import _loop_cy

            return _loop_cy
        except ImportError:
            if name == "compiled":
                raise RuntimeError(
                    "compiled backend requested but spintrack._loop_cy is not built"
                )
    if name not in ("auto", "python"):
        raise ValueError(f"unknown backend {name!r}")
    from . import _loop_py

    return _loop_py


def available_backends() -> list[str]:
    names = []
    try:
        from . import _loop_cy  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    names.append("python")
    return names
