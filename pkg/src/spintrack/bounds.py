"""Decoherence-dictated lower bounds on the field-tracking error.

Any strategy that estimates a fluctuating Larmor frequency from continuous
measurement plus feedback is limited by dephasing.  For an
Ornstein-Uhlenbeck field of diffusion strength q_omega and an ensemble
with effective dephasing rate

    kappa(N) = kappa_coll + 2 kappa_loc / N,

the achievable average mean squared error obeys, in continuous time,

    aMSE(t) >= V_inf(t)  = sqrt(q_omega kappa) coth(t sqrt(q_omega/kappa)),

the flat-prior limit, and more generally the finite-prior curve
V_sigma0(t) that starts at the prior variance sigma0^2 and relaxes onto
V_inf.  Both arise as the continuous-time limit of a discrete Gaussian
variance recursion

    V_k = V_P + V_Q V_{k-1} / (V_Q + V_{k-1}),     V_0 = sigma0^2,

with per-step prior variance V_P = (q_omega/2chi)(1 - e^{-2 chi dt}) and
per-step dephasing variance V_Q = kappa/dt.  The recursion has a closed
form in terms of the roots V_+/- of its Moebius iteration, implemented
here with an overflow-safe ratio trick.  When q_omega -> 0 the bound
degrades gracefully to the standard quantum limit kappa(N)/t.

Shot-to-shot atom-number fluctuations only help the adversary: V_inf is
convex in N, so by Jensen the bound evaluated at the mean atom number
still lower-bounds the N-averaged error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundQuery:
    """Parameter bundle for the bound evaluations.

    t in s; n_atoms is the (mean) atom count; q_omega in rad^2/s^3;
    rates in Hz; sigma0 is the prior std in rad/s; chi (1/s) only enters
    the discrete forms through V_P.
    """

    t: float
    n_atoms: float
    q_omega: float
    kappa_loc: float
    kappa_coll: float
    sigma0: float = math.inf
    chi: float = 1.0
    n_sigma: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.n_atoms > 0:
            raise ValueError("n_atoms must be positive")
        if self.q_omega < 0 or self.kappa_loc < 0 or self.kappa_coll < 0:
            raise ValueError("q_omega and dephasing rates must be >= 0")
        if self.kappa_loc == 0 and self.kappa_coll == 0:
            raise ValueError("at least one dephasing rate must be positive")
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be >= 0")


def effective_dephasing(n: float, kappa_loc: float, kappa_coll: float) -> float:
    """kappa(N) = kappa_coll + 2 kappa_loc / N."""
    if not n > 0:
        raise ValueError("atom number must be positive")
    return kappa_coll + 2.0 * kappa_loc / n


def cs_bound_amse(q: BoundQuery) -> float:
    """Flat-prior bound sqrt(q kappa) coth(t sqrt(q/kappa)) in rad^2/s^2.

    Requires q_omega > 0; the q_omega = 0 case is the SQL
    (see :func:`sql_bound`).
    """
    if q.q_omega == 0.0:
        raise ValueError("cs_bound_amse needs q_omega > 0; use sql_bound instead")
    kappa = effective_dephasing(q.n_atoms, q.kappa_loc, q.kappa_coll)
    x = q.t * math.sqrt(q.q_omega / kappa)
    # tanh is overflow-safe for any argument; coth = 1/tanh.
    return math.sqrt(q.q_omega * kappa) / math.tanh(x)


def cs_bound_finite_prior(q: BoundQuery) -> float:
    """Finite-prior bound V_sigma0(t); converges to cs_bound_amse as
    sigma0 -> inf and to sigma0^2 as t -> 0.

    Evaluated via tanh to stay finite for arguments beyond the cosh/sinh
    overflow point (x ~ 710).
    """
    if q.q_omega == 0.0:
        raise ValueError("cs_bound_finite_prior needs q_omega > 0")
    kappa = effective_dephasing(q.n_atoms, q.kappa_loc, q.kappa_coll)
    s02 = q.sigma0**2
    root = math.sqrt(q.q_omega * kappa)
    if math.isinf(s02):
        return cs_bound_amse(q)
    x = q.t * math.sqrt(q.q_omega / kappa)
    th = math.tanh(x)
    return (root * s02 + q.q_omega * kappa * th) / (root + s02 * th)


def discrete_step_variances(
    q_omega: float, chi: float, kappa: float, delta_t: float
) -> tuple[float, float]:
    """Per-step variances (V_P, V_Q) of the discrete recursion."""
    v_p = q_omega / (2.0 * chi) * (-math.expm1(-2.0 * chi * delta_t))
    v_q = kappa / delta_t
    return v_p, v_q


def variance_recursion(v_p, v_q, sigma0_sq, k: int, checkpoints=None):
    """k-fold iterate of V <- V_P + V_Q V / (V_Q + V).

    Inputs may be scalars or broadcastable numpy arrays.  If
    ``checkpoints`` is given (sorted iterable of step counts <= k), returns
    a dict mapping each checkpoint to the iterate there instead of the
    final value only.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    v_p = np.asarray(v_p, dtype=float)
    v_q = np.asarray(v_q, dtype=float)
    v = np.broadcast_arrays(np.asarray(sigma0_sq, dtype=float), v_p, v_q)[0].copy()
    want = dict.fromkeys(checkpoints) if checkpoints is not None else None
    if want is not None and 0 in want:
        want[0] = v.copy()
    for step in range(1, k + 1):
        v = v_p + v_q * v / (v_q + v)
        if want is not None and step in want:
            want[step] = v.copy()
    if want is not None:
        return {s: (float(x) if x.ndim == 0 else x) for s, x in want.items()}
    return float(v) if v.ndim == 0 else v


def variance_closed_form(v_p, v_q, sigma0_sq, k: int):
    """Closed form of the recursion via the Moebius roots.

    V_k = (W+ V+^k + W- V-^k) / (U- V-^k + U+ V+^k) with
    V+- = 2 V_Q + V_P +- sqrt(V_P (4 V_Q + V_P)); evaluated with the ratio
    (V-/V+)^k so large k cannot overflow.  Degenerates to the harmonic
    form V_Q s0^2 / (V_Q + k s0^2) when V_P = 0 (repeated root).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    v_p = np.asarray(v_p, dtype=float)
    v_q = np.asarray(v_q, dtype=float)
    s02 = np.asarray(sigma0_sq, dtype=float)
    v_p, v_q, s02 = np.broadcast_arrays(v_p, v_q, s02)

    disc = np.sqrt(v_p * (4.0 * v_q + v_p))
    w_plus = 2.0 * v_p * v_q + s02 * v_p + s02 * disc
    w_minus = -2.0 * v_p * v_q - s02 * v_p + s02 * disc
    u_plus = -v_p + 2.0 * s02 + disc
    u_minus = v_p - 2.0 * s02 + disc
    v_plus = 2.0 * v_q + v_p + disc

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (2.0 * v_q + v_p - disc) / v_plus  # (V-/V+)^1 in [0, 1)
        rk = ratio**k
        out = (w_plus + w_minus * rk) / (u_plus + u_minus * rk)
        harmonic = v_q * s02 / (v_q + k * s02)
    out = np.where(v_p == 0.0, harmonic, out)
    return float(out) if out.ndim == 0 else out


def sql_bound(t: float, n: float, kappa_loc: float, kappa_coll: float) -> float:
    """Standard quantum limit kappa(N)/t, the q_omega -> 0 bound."""
    if not t > 0:
        raise ValueError("t must be positive")
    return effective_dephasing(n, kappa_loc, kappa_coll) / t


def n_averaged_bound(
    q: BoundQuery, mc_draws: int = 0, rng: np.random.Generator | None = None
) -> tuple[float, float | None]:
    """Bound under shot-to-shot atom-number fluctuations.

    Returns ``(headline, jensen_mc)``: the reportable lower bound is
    V_inf(t, n_atoms) at the mean atom number (valid by convexity of
    V_inf in N); ``jensen_mc`` is a Monte Carlo estimate of
    E_N[V_inf(t, N)] over ``mc_draws`` Gaussian draws (None if 0), which
    must dominate the headline.
    """
    headline = cs_bound_amse(q)
    if mc_draws <= 0:
        return headline, None
    rng = np.random.default_rng(0) if rng is None else rng
    draws = rng.normal(q.n_atoms, q.n_sigma, size=mc_draws)
    draws = draws[draws > 0]
    kappa = q.kappa_coll + 2.0 * q.kappa_loc / draws
    x = q.t * np.sqrt(q.q_omega / kappa)
    vals = np.sqrt(q.q_omega * kappa) / np.tanh(x)
    return headline, float(vals.mean())
