"""Post-run statistics shared by the CLI summaries and the test suite."""

from __future__ import annotations

import math

import numpy as np

from .experiment import EnsembleStats

# Rb-87 ground-state gyromagnetic ratio (F=2, g_F ~ 1/2): omega = gamma B.
GAMMA_RB87 = 4.3970497e10  # rad s^-1 T^-1


def rad_s_to_pt(omega: np.ndarray | float):
    """Angular frequency (rad/s) to magnetic field (pT) at the Rb-87 ratio."""
    return omega / GAMMA_RB87 * 1e12


def rad_s_to_hz(omega: np.ndarray | float):
    return omega / (2.0 * math.pi)


def window_mean(t: np.ndarray, series: np.ndarray, t_lo: float, t_hi: float) -> float:
    mask = (t >= t_lo) & (t <= t_hi)
    if not mask.any():
        raise ValueError(f"no samples in window [{t_lo}, {t_hi}]")
    return float(series[mask].mean())


def plateau_stats(stats: EnsembleStats, t_lo: float, t_hi: float) -> dict:
    """Window averages of the error, EKF prediction and bound (all sqrt)."""
    out = {
        "window_s": [t_lo, t_hi],
        "sqrt_amse_rad_s": window_mean(stats.t, np.sqrt(stats.amse), t_lo, t_hi),
        "sqrt_ekf_var_rad_s": window_mean(
            stats.t, np.sqrt(stats.mean_sigma_omega), t_lo, t_hi
        ),
    }
    if np.isfinite(stats.bound).all():
        out["sqrt_bound_rad_s"] = window_mean(
            stats.t, np.sqrt(stats.bound), t_lo, t_hi
        )
    return out


def squeezing_summary(stats: EnsembleStats) -> dict:
    """Minimum of the mean squeezing curve and the first negative-dB time."""
    sq = stats.mean_squeezing_db
    i_min = int(np.argmin(sq))
    neg = np.nonzero(sq < 0.0)[0]
    return {
        "min_db": float(sq[i_min]),
        "t_min_s": float(stats.t[i_min]),
        "onset_s": float(stats.t[neg[0]]) if len(neg) else None,
    }


def bound_violations(stats: EnsembleStats, n_sigma: float = 3.0) -> int:
    """Grid points where the empirical aMSE undercuts the bound by more than
    the statistical error allows.  Zero for a true lower bound."""
    if not np.isfinite(stats.bound).all():
        return 0
    return int((stats.amse < stats.bound - n_sigma * stats.amse_stderr).sum())


def find_r_peaks(t: np.ndarray, waveform: np.ndarray, frac: float = 0.5) -> np.ndarray:
    """Indices of R-wave peaks: local maxima above ``frac`` of the global max."""
    w = np.asarray(waveform)
    if len(w) < 3 or w.max() <= 0:
        return np.array([], dtype=int)
    thr = frac * w.max()
    inner = (w[1:-1] > w[:-2]) & (w[1:-1] >= w[2:]) & (w[1:-1] > thr)
    return np.nonzero(inner)[0] + 1


def mcg_cycle_stats(stats: EnsembleStats, clean: np.ndarray, cycle: int = 3) -> dict:
    """Error at the ``cycle``-th R-wave and over the cycle leading up to it."""
    peaks = find_r_peaks(stats.t, clean)
    if len(peaks) < cycle:
        raise ValueError(f"waveform has {len(peaks)} R-peaks, need {cycle}")
    sq = np.sqrt(stats.amse)
    p_now = peaks[cycle - 1]
    p_prev = peaks[cycle - 2] if cycle >= 2 else 0
    window = slice(p_prev, p_now + 1)
    return {
        "cycle": cycle,
        "r_peak_t_s": float(stats.t[p_now]),
        "r_wave_sqrt_amse_rad_s": float(sq[window].max()),
        "cycle_mean_sqrt_amse_rad_s": float(sq[window].mean()),
        "r_peak_times_s": [float(stats.t[p]) for p in peaks],
    }
