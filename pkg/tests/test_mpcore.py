"""Unit tests for the precision-context and special-function layer.

Expected values here are either textbook identities asserted directly or
cross-checked against the independent oracles (Binet integral, reflection
and duplication formulas) at higher precision.
"""

import mpmath as mp
import pytest

from conftest import assert_close
from oracles import digamma_binet

from expspec.mpcore import (
    BigComplex,
    BigReal,
    IntegerOrderError,
    PoleError,
    PrecisionContext,
    csc_pi,
    digamma,
    gamma,
)


class TestPrecisionContext:
    def test_defaults(self):
        ctx = PrecisionContext()
        assert ctx.working_digits == 30
        assert ctx.guard_digits == 10
        assert ctx.dps == 40

    def test_validation(self):
        with pytest.raises(ValueError):
            PrecisionContext(working_digits=29)
        with pytest.raises(ValueError):
            PrecisionContext(guard_digits=9)
        with pytest.raises(ValueError):
            PrecisionContext(working_digits=35.5)

    def test_for_output_rule(self):
        # working = output + 30 + 2 * hankel_dim, floored at the minimum
        assert PrecisionContext.for_output(16).working_digits == 46
        assert PrecisionContext.for_output(20, hankel_dim=30).working_digits == 110
        assert PrecisionContext.for_output(1).working_digits == 31

    def test_frozen(self):
        ctx = PrecisionContext()
        with pytest.raises(AttributeError):
            ctx.working_digits = 50

    def test_with_working(self, ctx30):
        ctx2 = ctx30.with_working(60)
        assert ctx2.working_digits == 60
        assert ctx30.working_digits == 30

    def test_tolerance(self, ctx30):
        assert mp.almosteq(ctx30.tolerance, mp.mpf(10) ** -30)

    def test_converters_exact_strings(self, ctx30):
        x = ctx30.real("1.5")
        z = ctx30.complex("1.5", "-2.25")
        assert isinstance(x, BigReal)
        assert isinstance(z, BigComplex)
        assert x == mp.mpf("1.5")
        assert z.imag == mp.mpf("-2.25")


class TestGamma:
    def test_integers(self, ctx30):
        assert_close(gamma(1, ctx30), 1, mp.mpf(10) ** -28)
        assert_close(gamma(6, ctx30), 120, mp.mpf(10) ** -28)

    def test_half(self, ctx30):
        with mp.workdps(50):
            assert_close(gamma(mp.mpf("0.5"), ctx30), mp.sqrt(mp.pi), mp.mpf(10) ** -28)

    def test_recurrence_complex(self, ctx30):
        with mp.workdps(50):
            z = mp.mpc("2.5", "1.5")
            lhs = gamma(z + 1, ctx30)
            rhs = z * gamma(z, ctx30)
        assert_close(lhs, rhs, mp.mpf(10) ** -28)

    def test_reflection(self, ctx30):
        z = mp.mpc("0.3", "0.7")
        with mp.workdps(50):
            lhs = gamma(z, ctx30) * gamma(1 - z, ctx30)
            rhs = mp.pi / mp.sinpi(z)
        assert_close(lhs, rhs, mp.mpf(10) ** -28)

    def test_duplication(self, ctx30):
        z = mp.mpf("1.25")
        with mp.workdps(50):
            lhs = gamma(z, ctx30) * gamma(z + mp.mpf("0.5"), ctx30)
            rhs = 2 ** (1 - 2 * z) * mp.sqrt(mp.pi) * gamma(2 * z, ctx30)
        assert_close(lhs, rhs, mp.mpf(10) ** -28)

    def test_conjugation(self, ctx30):
        with mp.workdps(50):
            z = mp.mpc("1.3", "2.7")
            lhs = gamma(mp.conj(z), ctx30)
            rhs = mp.conj(gamma(z, ctx30))
        assert_close(lhs, rhs, mp.mpf(10) ** -28)

    def test_pole_errors(self, ctx30):
        with mp.workdps(60):
            points = (mp.mpf(0), mp.mpf(-3), mp.mpf(-2) - mp.mpf(10) ** -45)
        for z in points:
            with pytest.raises(PoleError):
                gamma(z, ctx30)

    def test_near_pole_but_resolvable(self, ctx30):
        # 10^-20 away from the pole at -2: inside working range, not an error
        with mp.workdps(80):
            z = mp.mpf(-2) + mp.mpf(10) ** -20
            ref = mp.gamma(z)
        val = gamma(z, ctx30)
        assert_close(val, ref, mp.mpf(10) ** -25)

    def test_monotone_refinement(self, ctx30, ctx50):
        for z in (mp.mpf("3.7"), mp.mpc("1.5", "-4.25"), mp.mpf("0.01")):
            a = gamma(z, ctx30)
            b = gamma(z, ctx50)
            assert_close(a, b, mp.mpf(10) ** -28)


class TestDigamma:
    def test_psi_one(self, ctx30):
        with mp.workdps(50):
            assert_close(digamma(1, ctx30), -mp.euler, mp.mpf(10) ** -28)

    def test_psi_half(self, ctx30):
        with mp.workdps(50):
            assert_close(digamma(mp.mpf("0.5"), ctx30), -mp.euler - 2 * mp.log(2), mp.mpf(10) ** -28)

    def test_recurrence(self, ctx30):
        with mp.workdps(50):
            z = mp.mpc(3, 2)
            lhs = digamma(z + 1, ctx30)
            rhs = digamma(z, ctx30) + 1 / z
        assert_close(lhs, rhs, mp.mpf(10) ** -28)

    def test_binet_integral(self, ctx30):
        for z in (mp.mpf("2.5"), mp.mpc(1, 2)):
            assert_close(digamma(z, ctx30), digamma_binet(z, dps=40), mp.mpf(10) ** -25)

    def test_pole_errors(self, ctx30):
        for z in (0, -1, -7):
            with pytest.raises(PoleError):
                digamma(z, ctx30)


class TestCscPi:
    def test_exact_points(self, ctx30):
        assert_close(csc_pi(mp.mpf("0.5"), ctx30), 1, mp.mpf(10) ** -28)
        assert_close(csc_pi(mp.mpf("1.5"), ctx30), -1, mp.mpf(10) ** -28)
        with mp.workdps(50):
            assert_close(csc_pi(mp.mpf("0.25"), ctx30), mp.sqrt(2), mp.mpf(10) ** -28)

    def test_identity_near_integer(self, ctx30):
        # csc stays accurate close to its pole thanks to the precision boost
        for nu in (mp.mpf("0.999999"), mp.mpf(3) + mp.mpf(10) ** -12):
            val = csc_pi(nu, ctx30)
            with mp.workdps(90):
                ref = 1 / mp.sinpi(mp.mpf(nu))
            assert_close(val, ref, mp.mpf(10) ** -25)

    def test_very_near_integer_still_finite(self, ctx30):
        with mp.workdps(100):
            nu = mp.mpf(1) + mp.mpf(10) ** -20
            ref = 1 / mp.sinpi(nu)
        val = csc_pi(nu, ctx30)
        assert_close(val, ref, mp.mpf(10) ** -25)

    def test_integer_order_errors(self, ctx30):
        with mp.workdps(60):
            points = (mp.mpf(2), mp.mpf(-1), mp.mpf(5) + mp.mpf(10) ** -40)
        for nu in points:
            with pytest.raises(IntegerOrderError):
                csc_pi(nu, ctx30)

    def test_complex_conjugation(self, ctx30):
        with mp.workdps(50):
            nu = mp.mpc("0.3", "1.2")
            lhs = csc_pi(mp.conj(nu), ctx30)
            rhs = mp.conj(csc_pi(nu, ctx30))
        assert_close(lhs, rhs, mp.mpf(10) ** -28)

    def test_complex_off_axis_never_integer_error(self, ctx30):
        # a substantial imaginary part keeps sin(pi nu) away from zero
        nu = mp.mpc(2, "0.5")
        val = csc_pi(nu, ctx30)
        with mp.workdps(60):
            ref = 1 / mp.sinpi(mp.mpc(2, "0.5"))
        assert_close(val, ref, mp.mpf(10) ** -28)
