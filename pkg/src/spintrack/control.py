"""LQR feedback that cancels the Larmor precession in real time."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class LqrParams:
    """Gauge gain lambda of the steady-state LQR law."""

    lambda_gain: float = 1.0

    def __post_init__(self):
        if self.lambda_gain < 0:
            raise ValueError("lambda_gain must be >= 0")


def lqr_control(omega_est: float, y_mean_est: float, prm: LqrParams) -> float:
    """Control field u = -omega_est - lambda * y_mean_est (rad/s).

    Cancelling the estimated precession keeps the spin pinned along x,
    which is where the measurement is most informative about the field.
    """
    if not (math.isfinite(omega_est) and math.isfinite(y_mean_est)):
        raise ValueError("control inputs must be finite")
    return -omega_est - prm.lambda_gain * y_mean_est
