"""Quantum-bound tests: closed forms against the discrete recursion,
asymptotics, and the atom-number averaging inequality."""

import math

import numpy as np
import pytest

import spintrack as st
from spintrack.bounds import BoundQuery, discrete_step_variances

REF = dict(n_atoms=1e13, q_omega=1e6, kappa_loc=100.0, kappa_coll=1e-5)


class TestEffectiveDephasing:
    def test_reference_point(self):
        assert st.effective_dephasing(1e13, 100.0, 0.0) == pytest.approx(2e-11)

    def test_no_local(self):
        assert st.effective_dephasing(1e13, 0.0, 7e-6) == 7e-6

    def test_large_n_limit(self):
        assert st.effective_dephasing(1e30, 100.0, 3e-6) == pytest.approx(
            3e-6, rel=1e-12)


class TestFlatPriorBound:
    def test_reference_anchor(self):
        q = BoundQuery(t=0.010, **REF)
        assert math.sqrt(st.cs_bound_amse(q)) == pytest.approx(1.78, abs=0.01)

    def test_long_time_asymptote(self):
        q = BoundQuery(t=1e6, **REF)
        kappa = st.effective_dephasing(1e13, 100.0, 1e-5)
        assert st.cs_bound_amse(q) == pytest.approx(
            math.sqrt(1e6 * kappa), rel=1e-12)

    def test_local_only_point(self):
        q = BoundQuery(t=0.010, n_atoms=1e13, q_omega=1e6, kappa_loc=100.0,
                       kappa_coll=0.0)
        val = st.cs_bound_amse(q)
        assert val == pytest.approx(4.4721e-3, rel=1e-4)
        assert math.sqrt(val) == pytest.approx(0.0669, abs=5e-4)

    def test_monotone_decreasing_in_t(self):
        # strictly decreasing while the coth argument is resolvable, and
        # never increasing once it saturates at the asymptote
        early = [st.cs_bound_amse(BoundQuery(t=t, **REF))
                 for t in np.geomspace(1e-6, 2e-5, 30)]
        assert all(b < a for a, b in zip(early, early[1:]))
        late = [st.cs_bound_amse(BoundQuery(t=t, **REF))
                for t in np.geomspace(1e-5, 1.0, 30)]
        assert all(b <= a for a, b in zip(late, late[1:]))

    def test_monotone_in_kappa_and_q(self):
        base = st.cs_bound_amse(BoundQuery(t=1e-3, **REF))
        more_kappa = st.cs_bound_amse(BoundQuery(
            t=1e-3, n_atoms=1e13, q_omega=1e6, kappa_loc=100.0, kappa_coll=1e-4))
        more_q = st.cs_bound_amse(BoundQuery(
            t=1e-3, n_atoms=1e13, q_omega=1e7, kappa_loc=100.0, kappa_coll=1e-5))
        assert more_kappa > base
        assert more_q > base

    def test_overflow_safe(self):
        q = BoundQuery(t=1e9, **REF)  # tanh argument far beyond 710
        assert math.isfinite(st.cs_bound_amse(q))

    def test_rejects_zero_q(self):
        with pytest.raises(ValueError):
            st.cs_bound_amse(BoundQuery(t=1e-3, n_atoms=1e13, q_omega=0.0,
                                        kappa_loc=100.0, kappa_coll=0.0))


class TestFinitePriorBound:
    def test_self_consistent_prior_is_fixed(self):
        kappa = st.effective_dephasing(REF["n_atoms"], REF["kappa_loc"],
                                       REF["kappa_coll"])
        s0 = (REF["q_omega"] * kappa) ** 0.25
        for t in (1e-5, 1e-3, 1e-1):
            q = BoundQuery(t=t, sigma0=s0, **REF)
            assert st.cs_bound_finite_prior(q) == pytest.approx(s0**2, rel=1e-12)

    def test_short_time_recovers_prior(self):
        q = BoundQuery(t=1e-12, sigma0=10.0, **REF)
        assert st.cs_bound_finite_prior(q) == pytest.approx(100.0, rel=1e-3)

    def test_wide_prior_recovers_flat_bound(self):
        q = BoundQuery(t=1e-3, sigma0=1e9, **REF)
        flat = st.cs_bound_amse(BoundQuery(t=1e-3, **REF))
        assert st.cs_bound_finite_prior(q) == pytest.approx(flat, rel=1e-6)
        q_inf = BoundQuery(t=1e-3, sigma0=math.inf, **REF)
        assert st.cs_bound_finite_prior(q_inf) == flat

    def test_ordering_below_prior_and_flat_maximum(self):
        for t in np.geomspace(1e-6, 1e-1, 20):
            q = BoundQuery(t=t, sigma0=10.0, **REF)
            v = st.cs_bound_finite_prior(q)
            flat = st.cs_bound_amse(BoundQuery(t=t, **REF))
            assert v <= max(100.0, flat) * (1 + 1e-12)

    def test_matches_discrete_recursion(self):
        # the discrete bound carries an O(delta_t) offset (V_P/2 minus a
        # chi-proportional piece), so the comparison Richardson-extrapolates
        # two step sizes of the discrete closed form
        kappa = st.effective_dephasing(1e13, 100.0, 1e-5)
        for t_ms in (1, 5, 10):
            t = t_ms * 1e-3
            vals = []
            for delta_t in (2e-8, 1e-8):
                v_p, v_q = discrete_step_variances(1e6, 1.0, kappa, delta_t)
                vals.append(st.variance_closed_form(
                    v_p, v_q, 100.0, int(round(t / delta_t))))
            extrap = 2 * vals[1] - vals[0]
            q = BoundQuery(t=t, sigma0=10.0, chi=1.0, **REF)
            assert st.cs_bound_finite_prior(q) == pytest.approx(extrap, rel=1e-5)


class TestVarianceRecursion:
    def test_zero_steps(self):
        assert st.variance_recursion(0.1, 5.0, 42.0, 0) == 42.0

    def test_large_vq_is_additive(self):
        got = st.variance_recursion(0.5, 1e18, 3.0, 1000)
        assert got == pytest.approx(3.0 + 1000 * 0.5, rel=1e-9)

    def test_checkpoint_api(self):
        out = st.variance_recursion(0.1, 5.0, 42.0, 100, checkpoints=[0, 10, 100])
        assert out[0] == 42.0
        assert out[100] == st.variance_recursion(0.1, 5.0, 42.0, 100)

    def test_matches_closed_form_random(self):
        rng = np.random.default_rng(13)
        v_p = 10.0 ** rng.uniform(-8, 2, 200)
        v_q = 10.0 ** rng.uniform(-4, 6, 200)
        s0 = 10.0 ** rng.uniform(-4, 4, 200)
        for k in (1, 10, 1000):
            rec = st.variance_recursion(v_p, v_q, s0, k)
            clo = st.variance_closed_form(v_p, v_q, s0, k)
            np.testing.assert_allclose(rec, clo, rtol=1e-9)


class TestVarianceClosedForm:
    def test_zero_steps_identity(self):
        # algebraically (W+ + W-)/(U+ + U-) = sigma0^2; numerically the sum
        # U+ + U- cancels to ~1e-8 relative when V_P, V_Q << sigma0^2
        rng = np.random.default_rng(14)
        for _ in range(50):
            v_p, v_q, s0 = 10.0 ** rng.uniform(-6, 4, 3)
            assert st.variance_closed_form(v_p, v_q, s0, 0) == pytest.approx(
                s0, rel=1e-7)

    def test_dominant_root_limit(self):
        v_p, v_q, s0 = 0.3, 7.0, 2.0
        disc = math.sqrt(v_p * (4 * v_q + v_p))
        w_plus = 2 * v_p * v_q + s0 * v_p + s0 * disc
        u_plus = -v_p + 2 * s0 + disc
        assert st.variance_closed_form(v_p, v_q, s0, 10**7) == pytest.approx(
            w_plus / u_plus, rel=1e-12)

    def test_degenerate_no_process_noise(self):
        # V_P = 0 collapses to the harmonic information accumulation
        v_q, s0, k = 5.0, 2.0, 1000
        want = v_q * s0 / (v_q + k * s0)
        assert st.variance_closed_form(0.0, v_q, s0, k) == pytest.approx(
            want, rel=1e-12)
        assert st.variance_recursion(0.0, v_q, s0, k) == pytest.approx(
            want, rel=1e-9)

    def test_no_overflow_at_huge_k(self):
        assert math.isfinite(st.variance_closed_form(1e-2, 1e3, 100.0, 10**6))


class TestSqlBound:
    def test_reference_point(self):
        assert st.sql_bound(0.010, 1e13, 100.0, 0.0) == pytest.approx(2e-9)

    def test_inverse_time(self):
        a = st.sql_bound(1e-3, 1e13, 100.0, 1e-5)
        b = st.sql_bound(2e-3, 1e13, 100.0, 1e-5)
        assert a == pytest.approx(2 * b, rel=1e-12)

    def test_q_to_zero_limit_chain(self):
        # flat-prior bound falls onto the SQL as q_omega -> 0
        t, n, kl, kc = 0.01, 1e13, 100.0, 0.0
        sql = st.sql_bound(t, n, kl, kc)
        rels = []
        for q_w in np.geomspace(1e-6, 1e-13, 8):
            v = st.cs_bound_amse(BoundQuery(t=t, n_atoms=n, q_omega=q_w,
                                            kappa_loc=kl, kappa_coll=kc))
            rels.append(abs(v - sql) / sql)
        assert rels[-1] < 1e-6
        assert all(b <= a for a, b in zip(rels, rels[1:]))


class TestNAveragedBound:
    def test_zero_spread_is_identity(self):
        q = BoundQuery(t=0.01, sigma0=10.0, n_sigma=0.0, **REF)
        headline, mc = st.n_averaged_bound(q, mc_draws=1000)
        assert mc == pytest.approx(headline, rel=1e-12)

    def test_jensen_inequality(self):
        q = BoundQuery(t=0.01, sigma0=10.0, n_sigma=1e11, n_atoms=1e13,
                       q_omega=1e6, kappa_loc=100.0, kappa_coll=0.0)
        rng = np.random.default_rng(15)
        headline, mc = st.n_averaged_bound(q, mc_draws=100_000, rng=rng)
        assert mc >= headline

    def test_convex_in_n(self):
        # second divided differences positive over the fig-5 grid
        ns = np.geomspace(1e6, 1e14, 33)
        for t in (1e-4, 1e-2, 1.0):
            vals = np.array([
                st.cs_bound_amse(BoundQuery(t=t, n_atoms=n, q_omega=1e6,
                                            kappa_loc=100.0, kappa_coll=0.0))
                for n in ns
            ])
            d1 = np.diff(vals) / np.diff(ns)
            assert np.all(np.diff(d1) > 0)
            assert np.all(np.diff(vals) < 0)  # decreasing in N


class TestQueryValidation:
    def test_negative_time(self):
        with pytest.raises(ValueError):
            BoundQuery(t=-1.0, **REF)

    def test_no_dephasing(self):
        with pytest.raises(ValueError):
            BoundQuery(t=1.0, n_atoms=1e13, q_omega=1e6, kappa_loc=0.0,
                       kappa_coll=0.0)
