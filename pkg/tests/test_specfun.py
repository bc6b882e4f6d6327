"""Tests for the complex special-function kernel."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from three_halves import specfun
from three_halves.errors import (
    PrecisionLossError,
    SpecfunDomainError,
)

mp.mp.dps = 40


def rel_err(got, want):
    want = complex(want)
    if want == 0:
        return abs(complex(got))
    return abs(complex(got) - want) / abs(want)


class TestLogGamma:
    def test_gamma_one(self):
        assert abs(specfun.log_gamma(1.0)) < 1e-14

    def test_factorial(self):
        assert rel_err(specfun.log_gamma(5.0), math.log(24.0)) < 1e-14

    def test_complex_point_frozen_oracle(self):
        # mpmath (40 dps) oracle computed ahead of the build:
        want = complex(-1.8760787864309293412, 0.12964631630978831138)
        assert rel_err(specfun.log_gamma(1 + 2j), want) < 1e-12

    def test_pole_raises(self):
        for z in (0.0, -1.0, -7.0):
            with pytest.raises(SpecfunDomainError):
                specfun.log_gamma(z)

    def test_recurrence_grid(self):
        # Gamma(z+1) = z Gamma(z) on a reproducible random grid.
        rng = np.random.default_rng(20260809)
        re = rng.uniform(0.5, 10.0, size=100)
        im = rng.uniform(-10.0, 10.0, size=100)
        for zr, zi in zip(re, im):
            z = complex(zr, zi)
            lhs = specfun.log_gamma(z + 1)
            rhs = specfun.log_gamma(z) + np.log(z)
            # branches may differ by 2*pi*i; compare through exp
            assert rel_err(np.exp(lhs), np.exp(rhs)) < 1e-12

    def test_left_half_plane_reflection(self):
        for z in (-0.5 + 0.3j, -2.2 - 1.7j, -5.1 + 4.0j):
            got = np.exp(specfun.log_gamma(z))
            want = mp.gamma(mp.mpc(z.real, z.imag))
            assert rel_err(got, complex(want)) < 1e-11

    def test_matches_mpmath_on_right_half_plane(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            z = complex(rng.uniform(0.05, 30), rng.uniform(-30, 30))
            want = mp.loggamma(mp.mpc(z.real, z.imag))
            assert rel_err(specfun.log_gamma(z), complex(want)) < 1e-12


class TestBesselI:
    def test_zero_argument(self):
        assert specfun.bessel_i(0.0, 0.0) == 1.0
        assert specfun.bessel_i(2.5, 0.0) == 0.0
        with pytest.raises(SpecfunDomainError):
            specfun.bessel_i(-0.5, 0.0)

    def test_half_integer_closed_form(self):
        want = math.sqrt(2.0 / (math.pi * 2.0)) * math.sinh(2.0)
        assert rel_err(specfun.bessel_i(0.5, 2.0), want) < 1e-13

    def test_complex_order_frozen_oracle(self):
        # Brute-force 300-term extended-precision partial sum (mpmath, 40 dps):
        want = complex(4.0125767613721858133, -9.2495463541737218248)
        got = specfun.bessel_i(1.3 + 0.7j, 4 - 1j)
        assert rel_err(got, want) < 1e-10

    def test_real_order_real_argument_is_real(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            nu = rng.uniform(0.0, 8.0)
            z = rng.uniform(1e-3, 25.0)
            val = specfun.bessel_i(nu, z)
            assert val.real > 0.0
            assert abs(val.imag) <= 1e-12 * abs(val.real)

    def test_scaled_matches_unscaled(self):
        for nu, z in [(0.7, 3.0), (1.2 + 0.5j, 10.0), (2.0, 25.0 + 4.0j)]:
            plain = specfun.bessel_i(nu, z)
            scaled = specfun.bessel_i(nu, z, scaled=True)
            assert rel_err(scaled * np.exp(complex(z).real), plain) < 1e-12

    def test_scaled_finite_for_huge_argument(self):
        val = specfun.bessel_i(1.62, 5000.0, scaled=True)
        want = mp.besseli(mp.mpf("1.62"), 5000, derivative=0) * mp.e ** (-5000)
        assert rel_err(val, complex(want)) < 1e-11

    @pytest.mark.parametrize("z", [0.5, 3.0, 20.0, 80.0, 400.0, 3000.0])
    def test_real_axis_against_mpmath(self, z):
        for nu in (0.0, 1.6234, 4.5, 1.5 + 2.0j, 6.0 - 3.0j):
            got = np.exp(specfun.log_bessel_i(nu, z) - z)
            want = mp.besseli(mp.mpc(complex(nu).real, complex(nu).imag), z) * mp.e ** (
                -z
            )
            assert rel_err(got, complex(want)) < 1e-10


class TestBesselRegimes:
    """Accuracy study around the series/asymptotic switch.

    BESSEL_ASYMPTOTIC_MIN_Z = 30 is the documented threshold; the branch map
    additionally requires |z| >= |nu|^2 + 25 and a sector away from the
    imaginary axis.  This test sweeps both sides of every gate.
    """

    def test_switch_continuity_real_axis(self):
        for nu in (0.8, 1.6234, 3.0 + 1.0j):
            for z in np.linspace(25.0, 40.0, 16):
                got = np.exp(specfun.log_bessel_i(nu, z) - z)
                want = mp.besseli(
                    mp.mpc(complex(nu).real, complex(nu).imag), mp.mpf(z)
                ) * mp.e ** (-mp.mpf(z))
                assert rel_err(got, complex(want)) < 5e-11, (nu, z)

    def test_moderate_order_large_argument(self):
        # |nu|^2 comparable to z: must stay on the series branch and stay
        # accurate.
        for nu in (6.0, 8.0 + 2.0j, 12.0):
            for z in (40.0, 90.0, 160.0):
                got = np.exp(specfun.log_bessel_i(nu, z) - z)
                want = mp.besseli(
                    mp.mpc(complex(nu).real, complex(nu).imag), mp.mpf(z)
                ) * mp.e ** (-mp.mpf(z))
                assert rel_err(got, complex(want)) < 1e-9, (nu, z)

    def test_complex_argument_sector(self):
        # Arguments off the real axis but inside the asymptotic sector.
        for z in (60.0 + 30.0j, 120.0 - 60.0j, 45.0 + 10.0j):
            for nu in (1.0, 2.5 + 1.5j):
                got = specfun.bessel_i(nu, z, scaled=True)
                want = mp.besseli(
                    mp.mpc(complex(nu).real, complex(nu).imag),
                    mp.mpc(complex(z).real, complex(z).imag),
                ) * mp.e ** (-complex(z).real)
                assert rel_err(got, complex(want)) < 1e-9, (nu, z)

    def test_negative_real_part_reflection(self):
        for z in (-4.0 + 1.0j, -12.0 - 3.0j):
            got = specfun.bessel_i(1.2 + 0.4j, z)
            want = mp.besseli(mp.mpc(1.2, 0.4), mp.mpc(complex(z).real, complex(z).imag))
            assert rel_err(got, complex(want)) < 1e-9


class TestKummerM:
    def test_z_zero(self):
        assert specfun.kummer_m(0.77 - 3j, 2 + 1j, 0.0) == 1.0

    def test_a_equals_b_is_exp(self):
        got = specfun.kummer_m(1.5 - 0.2j, 1.5 - 0.2j, 3.0)
        assert rel_err(got, math.exp(3.0)) < 1e-13

    def test_transform_identity_paper_example(self):
        a, b, z = 0.8 + 0.1j, 2.3, -5.0
        lhs = specfun.kummer_m(a, b, z, transform="never")
        rhs = np.exp(z) * specfun.kummer_m(b - a, b, -z, transform="never")
        assert rel_err(lhs, rhs) <= 1e-10
        # frozen mpmath oracle for the same point
        want = complex(0.32711129485162253713, -0.050725074183882724294)
        assert rel_err(specfun.kummer_m(a, b, z), want) < 1e-12

    def test_b_pole_raises(self):
        with pytest.raises(SpecfunDomainError):
            specfun.kummer_m(1.0, 0.0, 1.0)
        with pytest.raises(SpecfunDomainError):
            specfun.kummer_m(1.0, -3.0, 0.5)

    def test_against_mpmath_grid(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            a = complex(rng.uniform(-2, 3), rng.uniform(-2, 2))
            b = complex(rng.uniform(0.5, 4), rng.uniform(-2, 2))
            z = complex(rng.uniform(-12, 12), rng.uniform(-6, 6))
            got = specfun.kummer_m(a, b, z)
            want = mp.hyp1f1(mp.mpc(a.real, a.imag), mp.mpc(b.real, b.imag),
                             mp.mpc(z.real, z.imag))
            assert rel_err(got, complex(want)) < 1e-10, (a, b, z)

    def test_large_positive_argument(self):
        got = specfun.kummer_m(1.3 + 0.3j, 3.1, 300.0)
        want = mp.hyp1f1(mp.mpc(1.3, 0.3), mp.mpf(3.1), mp.mpf(300))
        assert rel_err(got, complex(want)) < 1e-10

    def test_raw_series_cancellation_guard(self):
        with pytest.raises(PrecisionLossError):
            specfun.kummer_m(0.8, 2.3, -80.0, transform="never")

    def test_asymptotic_negative_branch(self):
        # internal branch used by the joint CF for tiny time steps
        a = np.array([0.9 + 0.4j])
        b = np.array([2.6 + 0.8j])
        for x in (80.0, 400.0, 2000.0):
            got = np.exp(specfun._log_kummer_asym_neg(a, b, np.array([x])))[0]
            want = mp.hyp1f1(mp.mpc(0.9, 0.4), mp.mpc(2.6, 0.8), mp.mpf(-x))
            assert rel_err(got, complex(want)) < 1e-10, x


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.5, 6.0),
    st.floats(-3.0, 3.0),
    st.floats(0.6, 5.0),
    st.floats(-2.0, 2.0),
    st.floats(-6.0, 6.0),
    st.floats(-4.0, 4.0),
)
def test_kummer_transform_property(ar, ai, br, bi, zr, zi):
    """Kummer transformation holds on random complex triples (rel 1e-9)."""
    a = complex(ar, ai)
    b = complex(br, bi)
    z = complex(zr, zi)
    lhs = specfun.kummer_m(a, b, z, transform="never")
    rhs = np.exp(z) * specfun.kummer_m(b - a, b, -z, transform="never")
    assert rel_err(lhs, rhs) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 6.0), st.floats(0.1, 28.0))
def test_bessel_recurrence_property(nu, z):
    """I_{nu-1}(z) - I_{nu+1}(z) = (2 nu / z) I_nu(z)."""
    lhs = specfun.bessel_i(nu - 1, z) - specfun.bessel_i(nu + 1, z)
    rhs = 2 * nu / z * specfun.bessel_i(nu, z)
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(rhs))
