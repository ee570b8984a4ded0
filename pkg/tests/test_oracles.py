import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ebsplines as e
from ebsplines.errors import EbsplinesError


class TestKappa:
    def test_closed_forms(self):
        # reflection-formula identities at half-integer Gamma arguments
        assert e.kappa(1.0, 0, 1) == pytest.approx(0.5, abs=1e-12)
        assert e.kappa(1.0, 0, 2) == pytest.approx(0.25, abs=1e-12)
        assert e.kappa(2.0, 0, 1) == pytest.approx(0.35355339, abs=1e-8)

    @pytest.mark.parametrize("q", [0.75, 1.0, 1.5, 2.0, 3.0, 6.0])
    def test_reflection_identity(self, q):
        # kappa_q(0,1) = 1 / (2 q sin(pi/(2q))) via Gamma(x) Gamma(1-x)
        assert e.kappa(q, 0, 1) == pytest.approx(
            1.0 / (2.0 * q * math.sin(math.pi / (2.0 * q))), rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(EbsplinesError):
            e.kappa(1.0, 0, 0)
        with pytest.raises(EbsplinesError):
            e.kappa(1.0, -1, 2)
        with pytest.raises(EbsplinesError):
            e.kappa(0.4, 0, 1)

    def test_table(self):
        t = e.kappa_table(2.0, max_m=2, max_l=3)
        assert t[(0, 1)] == e.kappa(2.0, 0, 1)
        assert all(v > 0 and math.isfinite(v) for v in t.entries.values())


class TestTraceApproximation:
    @pytest.mark.parametrize("q,lam", [(1.0, 1e-4), (2.0, 1e-6), (3.0, 1e-8)])
    @pytest.mark.parametrize("m,l", [(1, 2), (2, 2)])
    def test_positive_power_pairs_are_sharp(self, q, lam, m, l):
        # for m >= 1 the summand vanishes at the origin and the Riemann sum
        # matches the Gamma-constant integral almost exactly
        tc = e.trace_approx_check(q, lam, 10 ** 5, m, l)
        assert abs(tc.rel_err) < 0.02

    def test_pure_smoother_traces_converge_deep(self):
        # m = 0 pairs carry the null space plus a half-spacing offset of
        # relative size ~ (q - 1/2) / (lam^(-1/(2q)) kappa); they need much
        # smaller lambda to reach 2%
        errs = [abs(e.trace_approx_check(2.0, lam, 10 ** 5, 0, 1).rel_err)
                for lam in (1e-6, 1e-9, 1e-12)]
        assert errs[2] < errs[1] < errs[0]
        assert errs[2] < 0.02

    def test_known_offset_at_moderate_lambda(self):
        # frozen measured value: + (q - 1/2) / (lam^(-1/4) kappa_2(0,1)) at
        # q = 2, lam = 1e-6 puts the error near +13%
        tc = e.trace_approx_check(2.0, 1e-6, 10 ** 5, 0, 1)
        assert tc.rel_err == pytest.approx(0.134, abs=0.01)

    def test_exact_sum_monotone_in_lambda_for_m0(self):
        vals = [e.trace_approx_check(1.0, lam, 2000, 0, 1).exact_sum
                for lam in np.logspace(-6, 0, 10)]
        assert np.all(np.diff(vals) < 0)
        # approximation degrades toward lambda = 1
        errs = [abs(e.trace_approx_check(1.0, lam, 2000, 0, 1).rel_err)
                for lam in (1e-5, 1e-2, 1.0)]
        assert errs[0] < errs[1] < errs[2]

    def test_log_power_variant(self):
        # Lemma-2 form gains log(1/lam)^r; its 1/log(1/lam) corrections decay
        # slowly, so only deep lambdas are sharp
        tc = e.trace_approx_check(2.0, 1e-14, 10 ** 5, 1, 1, r=1)
        assert abs(tc.rel_err) < 0.10


class TestExpectedEquations:
    def test_noise_only_is_negative(self):
        spec = e.SignalSpectrum(B=np.zeros(500))
        for lam in (1e-6, 1e-3, 1.0):
            assert e.expected_t_lambda(spec, 1.0, lam, 2.0) < 0

    def test_signal_only_is_positive(self):
        B = np.zeros(500)
        B[5:] = 1.0 / np.arange(6, 501) ** 2
        spec = e.SignalSpectrum(B=B)
        for lam in (1e-6, 1e-3, 1.0):
            assert e.expected_t_lambda(spec, 0.0, lam, 2.0) > 0

    def test_sign_structure_in_signal_and_noise(self, f1_spectrum):
        lam = 1e-10
        base = e.expected_t_lambda(f1_spectrum, 1e-4, lam, 3.0)
        stronger = e.SignalSpectrum(B=2.0 * f1_spectrum.B)
        assert e.expected_t_lambda(stronger, 1e-4, lam, 3.0) > base
        assert e.expected_t_lambda(f1_spectrum, 4e-4, lam, 3.0) < base

    def test_null_space_signal_with_zero_noise_vanishes(self):
        B = np.zeros(200)
        B[:2] = 3.0  # polynomial content only
        spec = e.SignalSpectrum(B=B)
        for lam in (1e-8, 1e-3, 0.5):
            assert e.expected_t_q(spec, 0.0, lam, 2.0) == 0.0

    def test_reduces_to_quadratic_term_at_oracle_root(self, f1_spectrum):
        q, s2 = 3.0, 1e-4
        lam = e.oracle_lambda(f1_spectrum, s2, q, "numeric-root").lambda_q
        full = e.expected_t_q(f1_spectrum, s2, lam, q)
        eig = e.eigenvalues(q, f1_spectrum.n)
        u = lam * eig.tail
        b2 = f1_spectrum.B[eig.null_dim:] ** 2
        quad = float(b2 @ (u * np.log(u) / (1 + u) ** 2)) / f1_spectrum.n
        # E T_lam is ~0 at its root, so the log(1/lam) correction is tiny
        assert full == pytest.approx(quad, rel=1e-4)

    def test_negative_below_the_smoothness_bound(self, f1_spectrum):
        # coefficients decay like i^-3 so orders 2 and 3 look smooth
        for q in (2.0, 3.0):
            lam = e.oracle_lambda(f1_spectrum, 1e-4, q, "numeric-root").lambda_q
            assert e.expected_t_q(f1_spectrum, 1e-4, lam, q) < 0


class TestOracleLambda:
    def test_polynomial_signal_gives_infinity(self):
        B = np.zeros(100)
        B[0] = 4.0
        spec = e.SignalSpectrum(B=B)
        assert math.isinf(e.oracle_lambda(spec, 1.0, 1.0, "closed-form").lambda_q)
        assert math.isinf(e.oracle_lambda(spec, 1.0, 1.0, "numeric-root").lambda_q)

    def test_noise_scaling_of_closed_form(self, f1_spectrum):
        q = 3.0
        l1 = e.oracle_lambda(f1_spectrum, 1e-4, q).lambda_q
        l2 = e.oracle_lambda(f1_spectrum, 2e-4, q).lambda_q
        assert l2 / l1 == pytest.approx(2.0 ** (2 * q / (2 * q + 1)), rel=1e-10)

    def test_closed_form_vs_numeric_root_on_log_scale(self, f1_spectrum):
        lc = e.oracle_lambda(f1_spectrum, 1e-4, 3.0, "closed-form").lambda_q
        ln = e.oracle_lambda(f1_spectrum, 1e-4, 3.0, "numeric-root").lambda_q
        assert abs(math.log(lc) / math.log(ln) - 1.0) <= 0.15

    def test_unknown_method(self, f1_spectrum):
        with pytest.raises(EbsplinesError):
            e.oracle_lambda(f1_spectrum, 1e-4, 3.0, "guess")


class TestPolishedTail:
    def test_truncated_sequence_holds(self):
        B = np.zeros(256)
        B[:8] = np.random.default_rng(0).standard_normal(8)
        res = e.polished_tail_check(B, L=2.0, N=10, rho=2.0)
        assert res.holds and res.worst_ratio == 0.0

    def test_square_decay_holds(self):
        B = np.arange(1, 1025.0) ** -2.0
        res = e.polished_tail_check(B, L=2.0, N=10, rho=2.0)
        assert res.holds
        # geometric tail mass dominated by the first dyadic block:
        # ratio -> 1/(1 - 2^-3) ~ 1.14
        assert res.worst_ratio == pytest.approx(1.14, abs=0.05)

    def test_terminal_spike_fails_for_any_L(self):
        B = np.zeros(1024)
        B[-1] = 1.0
        res = e.polished_tail_check(B, L=1e12, N=10, rho=2.0)
        assert not res.holds
        assert math.isinf(res.worst_ratio)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(1e-6, 1e6), st.integers(0, 2 ** 31 - 1))
    def test_scale_invariance(self, c, seed):
        B = np.random.default_rng(seed).standard_normal(128)
        r1 = e.polished_tail_check(B, L=2.0, N=5, rho=2.0)
        r2 = e.polished_tail_check(c * B, L=2.0, N=5, rho=2.0)
        assert r1.holds == r2.holds and r1.worst_j == r2.worst_j
        assert r1.worst_ratio == pytest.approx(r2.worst_ratio, rel=1e-9)

    def test_rho_and_N_validation(self):
        with pytest.raises(EbsplinesError):
            e.polished_tail_check(np.ones(64), rho=1.5)
        with pytest.raises(EbsplinesError):
            e.polished_tail_check(np.ones(64), N=60, rho=2.0)


class TestSelectorVariances:
    def test_exact_rational_values_at_first_order(self):
        # hand evaluation with half-integer Gamma values gives eb = 4/9 and
        # gcv = 28/25 at q = 1
        v = e.asymptotic_variances(1.0)
        assert v.eb == pytest.approx(4.0 / 9.0, rel=1e-12)
        assert v.gcv == pytest.approx(28.0 / 25.0, rel=1e-12)
        assert v.ratio == pytest.approx(63.0 / 25.0, rel=1e-12)

    def test_gcv_variance_dominates(self):
        assert e.asymptotic_variances(2.0).ratio > 1.0

    @pytest.mark.parametrize("q", [1.0, 3.0])
    def test_finite_positive(self, q):
        v = e.asymptotic_variances(q)
        assert v.eb > 0 and v.gcv > 0 and math.isfinite(v.ratio)

    def test_smooth_in_q(self):
        qs = np.linspace(1.0, 6.0, 21)
        ratios = np.array([e.asymptotic_variances(q).ratio for q in qs])
        assert np.all(np.diff(ratios) > 0)  # monotone over this range
        assert np.all(np.abs(np.diff(np.log(ratios))) < 0.5)


def test_signal_spectrum_energy(f1_spectrum):
    # smooth-order energy is finite and the generator's nominal-order energy
    # reflects the i^-3 coefficient decay
    e2 = f1_spectrum.derivative_energy(2.0)
    assert math.isfinite(e2) and e2 > 0


def test_signal_spectrum_radius_bound_checked(f1_spectrum):
    e2 = f1_spectrum.derivative_energy(2.0)
    ok = e.SignalSpectrum(B=f1_spectrum.B, beta_nominal=2.0,
                          sobolev_radius=2.0 * math.sqrt(e2))
    assert ok.sobolev_radius is not None
    with pytest.raises(EbsplinesError):
        e.SignalSpectrum(B=f1_spectrum.B, beta_nominal=2.0,
                         sobolev_radius=0.5 * math.sqrt(e2))
