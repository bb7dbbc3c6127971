"""Special functions against independent oracles: math.lgamma, exact
rational arithmetic for the terminating hypergeometric sum, explicit
low-order Hermite closed forms, and brute numeric integration."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpsts import specfun
from mpsts.distributions import ModelParams, compound_poisson_pmf, convolved_pmf
from mpsts.specfun import DomainError, LogValue


def hyp2f1_exact(K: int, b: Fraction, c: Fraction, x: Fraction) -> Fraction:
    """Exact rational evaluation of the terminating series."""
    total = Fraction(1)
    term = Fraction(1)
    for j in range(K):
        term *= Fraction(j - K) * (b + j)
        term /= (c + j) * (j + 1)
        term *= x
        total += term
    return total


class TestLnGamma:
    def test_trivial_values(self):
        assert specfun.ln_gamma(1.0) == pytest.approx(0.0, abs=1e-14)
        assert specfun.ln_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)
        assert specfun.ln_gamma(0.5) == pytest.approx(
            0.5 * math.log(math.pi), rel=1e-14
        )

    def test_matches_libm_over_wide_range(self):
        xs = np.concatenate(
            [
                np.geomspace(1e-3, 0.5, 200),
                np.linspace(0.5, 50.0, 500),
                np.geomspace(50.0, 1e6, 300),
            ]
        )
        for x in xs:
            ref = math.lgamma(x)
            err = abs(specfun.ln_gamma(float(x)) - ref) / max(1.0, abs(ref))
            assert err <= 1e-14, f"x={x}: err={err}"

    def test_functional_equation(self):
        for x in np.linspace(0.1, 100.0, 777):
            lhs = specfun.ln_gamma(x + 1.0)
            rhs = specfun.ln_gamma(float(x)) + math.log(x)
            assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(lhs))

    def test_domain_error(self):
        with pytest.raises(DomainError):
            specfun.ln_gamma(0.0)
        with pytest.raises(DomainError):
            specfun.ln_gamma(-3.2)


class TestHyp2F1Terminating:
    def test_k0_is_one(self):
        assert specfun.hyp2f1_terminating(0, 2.7, -1.3, 0.9) == 1.0

    def test_k1_closed_form(self):
        assert specfun.hyp2f1_terminating(1, 2.0, 4.0, 0.5) == pytest.approx(
            0.75, rel=1e-15
        )

    def test_matches_exact_rational_small_cases(self):
        cases = [
            (2, Fraction(3, 2), Fraction(5, 2), Fraction(1, 3)),
            (3, Fraction(7, 3), Fraction(-9, 2), Fraction(4, 5)),
            (4, Fraction(1, 4), Fraction(13, 3), Fraction(9, 10)),
            (5, Fraction(11, 2), Fraction(-17, 3), Fraction(2, 7)),
            (5, Fraction(6), Fraction(7), Fraction(99, 100)),
        ]
        for K, b, c, x in cases:
            exact = float(hyp2f1_exact(K, b, c, x))
            got = specfun.hyp2f1_terminating(K, float(b), float(c), float(x))
            assert got == pytest.approx(exact, rel=1e-13)

    def test_working_point_value_against_convolution_oracle(self):
        # The closed-form pmf divides into prefactor * 2F1; solve for the 2F1
        # from the independent Polya/compound mixture and compare.
        params = ModelParams(0.264, 2, 3, 3)
        x = 1.0 / 1.264
        conv = convolved_pmf(params, n_max=60)
        for N in (0, 1, 2, 5, 10, 30, 60):
            ln_pref = (
                N * math.log(0.264)
                - (N + 2) * math.log1p(0.264)
                + specfun.ln_gamma(N + 2.0)
                - specfun.ln_gamma(2.0)
                - specfun.ln_gamma(N + 1.0)
                + specfun.ln_gamma(3.0)
                - specfun.ln_gamma(1.0)
                + specfun.ln_gamma(4.0)
                - specfun.ln_gamma(6.0)
            )
            implied = conv.probabilities[N] / math.exp(ln_pref)
            got = specfun.hyp2f1_terminating(3, N + 2.0, -3.0, x)
            assert got == pytest.approx(implied, rel=1e-12)

    def test_vanishing_pochhammer_raises(self):
        with pytest.raises(DomainError):
            specfun.hyp2f1_terminating(4, 1.5, -2.0, 0.3)


class TestHermitePhi:
    def test_ground_state_at_origin(self):
        assert specfun.hermite_phi(0, 0.0) == pytest.approx(
            math.pi ** -0.25, rel=1e-15
        )

    def test_odd_function_vanishes_at_origin(self):
        assert specfun.hermite_phi(1, 0.0) == 0.0

    def test_low_order_closed_forms(self):
        def phi_explicit(n, q):
            hermites = {
                0: 1.0,
                1: 2.0 * q,
                2: 4.0 * q**2 - 2.0,
                3: 8.0 * q**3 - 12.0 * q,
                4: 16.0 * q**4 - 48.0 * q**2 + 12.0,
            }
            norm = math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
            return hermites[n] * math.exp(-0.5 * q * q) / norm

        for n in range(5):
            for q in (-3.0, -1.0, 0.0, 1.0, 3.0):
                assert specfun.hermite_phi(n, q) == pytest.approx(
                    phi_explicit(n, q), abs=1e-12, rel=1e-12
                )

    def test_orthonormality_to_n50(self):
        q = np.linspace(-40.0, 40.0, 16001)
        table = specfun.hermite_phi_table(50, q)
        gram = (table * (q[1] - q[0])) @ table.T
        assert np.max(np.abs(gram - np.eye(51))) <= 1e-8

    def test_no_overflow_at_extremes(self):
        q = np.asarray([-60.0, -35.0, 0.0, 35.0, 60.0])
        table = specfun.hermite_phi_table(512, q)
        assert np.all(np.isfinite(table))


class TestLnBinomial:
    def test_trivial_values(self):
        assert specfun.ln_binomial(4.0, 2) == pytest.approx(math.log(6.0), rel=1e-14)
        assert specfun.ln_binomial(5.0, 0) == pytest.approx(0.0, abs=1e-14)
        assert specfun.ln_binomial(7.0, 7) == pytest.approx(0.0, abs=1e-13)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            specfun.ln_binomial(3.0, 5)  # Gamma(n - k + 1) argument <= 0


class TestLogValue:
    def test_zero_sign_convention(self):
        zero = LogValue.from_value(0.0)
        assert zero.sign == 0 and zero.value() == 0.0

    @given(
        st.floats(min_value=-1e150, max_value=1e150).filter(lambda v: abs(v) > 1e-150),
        st.floats(min_value=-1e150, max_value=1e150).filter(lambda v: abs(v) > 1e-150),
    )
    @settings(max_examples=200)
    def test_product_composition(self, a, b):
        prod = LogValue.from_value(a) * LogValue.from_value(b)
        assert prod.sign == (1 if a * b > 0 else -1)
        assert prod.value() == pytest.approx(a * b, rel=1e-12)

    def test_zero_absorbs(self):
        out = LogValue.from_value(5.0) * LogValue.from_value(0.0)
        assert out.sign == 0 and out.value() == 0.0

    def test_survives_float_underflow(self):
        # products far below the double range keep magnitude and sign
        tiny = LogValue.from_value(1e-250)
        prod = tiny * tiny * tiny
        assert prod.sign == 1
        assert prod.log_magnitude == pytest.approx(3 * math.log(1e-250), rel=1e-15)


def test_compound_poisson_pmf_single_mode_check():
    # plain thermal state: P(0) = 1/(1 + mu0)
    assert compound_poisson_pmf(0, 0.264, 1.0) == pytest.approx(
        1.0 / 1.264, rel=1e-14
    )
