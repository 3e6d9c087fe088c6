"""Unit tests for the modified Bessel layer.

Primary oracles: a brute-force fixed-term series and quadrature of integral
representations (tests/oracles.py), finite differences for the
order-derivatives, and an explicit-branch rotated series for the analytic
continuations.  Frozen spectral zeros come from tests/refvals.py.
"""

import mpmath as mp
import pytest

from conftest import assert_close
from oracles import (
    central_fd,
    integral_i,
    integral_k,
    rotated_series_i,
    rotated_series_k,
    series_i,
)

from expspec.bessel import (
    OutOfSectorError,
    asymptotic_i,
    asymptotic_k,
    bessel_i,
    bessel_i_dnu,
    bessel_i_dx,
    bessel_k,
    bessel_k_dnu,
    bessel_k_dx,
    continue_i,
    continue_k,
)
from expspec.mpcore import IntegerOrderError, PrecisionContext


class TestBesselI:
    def test_against_series_oracle(self, ctx30):
        with mp.workdps(60):
            points = [
                (mp.mpf("0.5"), mp.mpf(1)),
                (mp.mpf("2.25"), mp.mpf("0.1")),
                (mp.mpf("-0.75"), mp.mpf(5)),
                (mp.mpc(1, 2), mp.mpf(3)),
                (mp.mpc(-2, "1.5"), mp.mpf(2)),
            ]
        for nu, x in points:
            assert_close(bessel_i(nu, x, ctx30), series_i(nu, x), mp.mpf(10) ** -28, "I(%s,%s)" % (nu, x))

    def test_against_integral_oracle(self, ctx30):
        with mp.workdps(60):
            points = [(mp.mpc("0.3", "0.2"), mp.mpf("1.7")), (mp.mpc(0, "1.2"), mp.mpf(2))]
        for nu, x in points:
            assert_close(bessel_i(nu, x, ctx30), integral_i(nu, x, dps=45), mp.mpf(10) ** -25)

    def test_large_argument(self, ctx30):
        # exercise the internal cancellation boost at x = 30
        with mp.workdps(60):
            nu = mp.mpc("0.4", "1.1")
            ref = mp.besseli(nu, 30)
        assert_close(bessel_i(nu, mp.mpf(30), ctx30), ref, mp.mpf(10) ** -25)

    def test_resonance_order_zero(self, ctx30):
        # the lowest barrier-resonance order annihilates I at x = 2*sqrt(lam)
        with mp.workdps(50):
            mu0 = mp.mpc("-1.743166615207400", "0.281413275691191")
            x = 2 * mp.sqrt(mp.mpf("0.5"))
            pair = (mu0, mp.conj(mu0))
        for nu in pair:
            assert abs(bessel_i(nu, x, ctx30)) < mp.mpf(10) ** -14

    def test_conjugation_exact(self, ctx30):
        with mp.workdps(50):
            nu = mp.mpc(-2, "1.5")
            x = mp.mpf(2)
            nubar = mp.conj(nu)
        a = bessel_i(nubar, x, ctx30)
        b = bessel_i(nu, x, ctx30)
        with mp.workdps(60):
            assert a.real == b.real and a.imag == -b.imag

    def test_negative_integer_order_errors(self, ctx30):
        with mp.workdps(60):
            bad = (mp.mpf(-3), mp.mpf(-1) - mp.mpf(10) ** -40)
        for nu in bad:
            with pytest.raises(IntegerOrderError):
                bessel_i(nu, mp.mpf(1), ctx30)

    def test_nonpositive_argument_errors(self, ctx30):
        for x in (0, -1):
            with pytest.raises(ValueError):
                bessel_i(mp.mpf("0.5"), mp.mpf(x), ctx30)

    def test_monotone_refinement(self, ctx30, ctx50):
        with mp.workdps(60):
            nu = mp.mpc("1.3", "-0.8")
            x = mp.mpf("7.5")
        assert_close(bessel_i(nu, x, ctx30), bessel_i(nu, x, ctx50), mp.mpf(10) ** -28)


class TestBesselK:
    def test_against_integral_oracle(self, ctx30):
        with mp.workdps(60):
            points = [
                (mp.mpc("0.3", "0.2"), mp.mpf("1.7")),
                (mp.mpf("0.5"), mp.mpf(2)),
                (mp.mpf("1.75"), mp.mpf(6)),
            ]
        for nu, x in points:
            assert_close(bessel_k(nu, x, ctx30), integral_k(nu, x, dps=45), mp.mpf(10) ** -25)

    def test_order_reflection(self, ctx30):
        with mp.workdps(50):
            nu = mp.mpc("0.7", "0.3")
            x = mp.mpf("2.5")
            neg = -nu
        assert_close(bessel_k(neg, x, ctx30), bessel_k(nu, x, ctx30), mp.mpf(10) ** -28)

    def test_bound_state_zero(self, ctx30):
        # K_{i t}(2 sqrt(10)) vanishes at t = sqrt(4 E_0) for the lowest bound state
        with mp.workdps(50):
            nu = mp.mpc(0, 1) * mp.sqrt(4 * mp.mpf("24.095880341888706123"))
            x = 2 * mp.sqrt(mp.mpf(10))
        assert abs(bessel_k(nu, x, ctx30)) < mp.mpf(10) ** -14

    def test_near_integer_order(self, ctx30):
        val = bessel_k(mp.mpf("0.9999999"), mp.mpf(1), ctx30)
        doubled = bessel_k(mp.mpf("0.9999999"), mp.mpf(1), ctx30.with_working(60))
        assert_close(val, doubled, mp.mpf(10) ** -28)

    def test_integer_order_errors(self, ctx30):
        with mp.workdps(60):
            bad = (mp.mpf(1), mp.mpf(0), mp.mpf(3) + mp.mpf(10) ** -40)
        for nu in bad:
            with pytest.raises(IntegerOrderError):
                bessel_k(nu, mp.mpf(1), ctx30)

    def test_real_order_gives_real_value(self, ctx30):
        val = bessel_k(mp.mpf("0.37"), mp.mpf("1.3"), ctx30)
        assert mp.im(val) == 0

    def test_wronskian_spot(self, ctx30):
        with mp.workdps(60):
            nu = mp.mpc("0.3", "0.2")
            x = mp.mpf("1.7")
            lhs = (
                bessel_i(nu, x, ctx30) * bessel_k_dx(nu, x, ctx30)
                - bessel_i_dx(nu, x, ctx30) * bessel_k(nu, x, ctx30)
            )
            assert abs(lhs + 1 / x) < mp.mpf(10) ** -26

    def test_dx_matches_series_oracle(self, ctx30):
        from oracles import series_i_dx

        with mp.workdps(60):
            nu = mp.mpc("0.8", "-0.6")
            x = mp.mpf("2.4")
        assert_close(bessel_i_dx(nu, x, ctx30), series_i_dx(nu, x), mp.mpf(10) ** -28)


class TestOrderDerivatives:
    def test_i_dnu_finite_difference(self, ctx30):
        with mp.workdps(60):
            nu = mp.mpc("-1.7", "0.3")
            x = mp.mpf("1.4")
        hi = PrecisionContext(working_digits=90, guard_digits=10)
        fd = central_fd(lambda z: bessel_i(z, x, hi), nu, step_exp=-10, dps=100)
        assert_close(bessel_i_dnu(nu, x, ctx30), fd, mp.mpf(10) ** -15)

    def test_k_dnu_finite_difference(self, ctx30):
        with mp.workdps(60):
            nu = mp.mpc("0.3", "0.2")
            x = mp.mpf("1.7")
        hi = PrecisionContext(working_digits=90, guard_digits=10)
        fd = central_fd(lambda z: bessel_k(z, x, hi), nu, step_exp=-10, dps=100)
        assert_close(bessel_k_dnu(nu, x, ctx30), fd, mp.mpf(10) ** -15)

    def test_antisymmetry_at_zero_order(self, ctx30):
        # d/dnu [I_nu - I_{-nu}] at nu = 0 equals 2 * dI/dnu there
        x = mp.mpf("1.9")
        hi = PrecisionContext(working_digits=90, guard_digits=10)
        fd = central_fd(lambda z: bessel_i(z, x, hi) - bessel_i(-z, x, hi), mp.mpf(0), step_exp=-10, dps=100)
        assert_close(fd, 2 * bessel_i_dnu(mp.mpf(0), x, ctx30), mp.mpf(10) ** -15)

    def test_k_dnu_real_for_real_inputs(self, ctx30):
        val = bessel_k_dnu(mp.mpf("0.37"), mp.mpf("1.3"), ctx30)
        assert mp.im(val) == 0

    def test_conjugation_exact(self, ctx30):
        with mp.workdps(50):
            nu = mp.mpc("0.6", "1.1")
            x = mp.mpf("2.2")
            nubar = mp.conj(nu)
        a = bessel_i_dnu(nubar, x, ctx30)
        b = bessel_i_dnu(nu, x, ctx30)
        with mp.workdps(60):
            assert a.real == b.real and a.imag == -b.imag


class TestAsymptotics:
    def test_half_order_is_exact_for_i(self, ctx30):
        with mp.workdps(50):
            s = mp.mpf(25)
            expect = mp.exp(s) / mp.sqrt(2 * mp.pi * s)
        res = asymptotic_i(mp.mpf("0.5"), s, terms=6, ctx=ctx30)
        assert_close(res.value, expect, mp.mpf(10) ** -28)
        assert res.error == 0

    def test_half_order_is_exact_for_k(self, ctx30):
        with mp.workdps(50):
            s = mp.mpf(25)
            expect = mp.sqrt(mp.pi / (2 * s)) * mp.exp(-s)
        res = asymptotic_k(mp.mpf("0.5"), s, terms=6, ctx=ctx30)
        assert_close(res.value, expect, mp.mpf(10) ** -28)
        assert res.error == 0

    def test_one_term_k_within_reported_error(self, ctx30):
        res = asymptotic_k(mp.mpf("0.5"), mp.mpf(30), terms=1, ctx=ctx30)
        ref = bessel_k(mp.mpf("0.5"), mp.mpf(30), ctx30)
        with mp.workdps(50):
            assert abs(res.value - ref) <= res.error + abs(ref) * mp.mpf(10) ** -26

    def test_series_asymptotic_overlap(self, ctx30):
        with mp.workdps(60):
            orders = [mp.mpf("0.3"), mp.mpc(1, 1), mp.mpc(0, "2.9")]
            args = [mp.mpf(20), mp.mpf(28), mp.mpf(40)]
        for nu in orders:
            for x in args:
                res_i = asymptotic_i(nu, x, terms=None, ctx=ctx30)
                res_k = asymptotic_k(nu, x, terms=None, ctx=ctx30)
                with mp.workdps(60):
                    di = abs(res_i.value - bessel_i(nu, x, ctx30))
                    dk = abs(res_k.value - bessel_k(nu, x, ctx30))
                    # small multiple of the estimate: complex order bends
                    # the alternating-tail bound by an O(1) factor
                    assert di <= 3 * res_i.error + abs(res_i.value) * mp.mpf(10) ** -26
                    assert dk <= 3 * res_k.error + abs(res_k.value) * mp.mpf(10) ** -26

    def test_sector_validation(self, ctx30):
        with mp.workdps(40):
            nu = mp.mpf("0.4")
            behind = mp.mpc(-5, 0)                                     # arg = pi exactly
            below_i = mp.mpf(5) * mp.exp(mp.mpc(0, -1) * mp.mpf("0.6") * mp.pi)
        with pytest.raises(OutOfSectorError):
            asymptotic_i(nu, behind, terms=3, ctx=ctx30)
        with pytest.raises(OutOfSectorError):
            asymptotic_i(nu, below_i, terms=3, ctx=ctx30)
        with pytest.raises(OutOfSectorError):
            asymptotic_k(nu, behind, terms=3, ctx=ctx30)
        # K tolerates args that I rejects below the real axis
        res = asymptotic_k(nu, below_i, terms=3, ctx=ctx30)
        assert mp.isfinite(res.value)


class TestContinuation:
    def test_m_zero_identity(self, ctx30):
        with mp.workdps(50):
            nu = mp.mpc("0.4", "0.1")
            s = mp.mpf("1.5")
        assert continue_k(nu, s, 0, ctx30) == bessel_k(nu, s, ctx30)
        assert continue_i(nu, s, 0, ctx30) == bessel_i(nu, s, ctx30)

    def test_phase_cancellation(self, ctx30):
        with mp.workdps(50):
            nu = mp.mpc("0.4", "0.1")
            s = mp.mpf("1.5")
            prod = continue_i(nu, s, 1, ctx30) * continue_i(nu, s, -1, ctx30)
            square = bessel_i(nu, s, ctx30) ** 2
        assert_close(prod, square, mp.mpf(10) ** -27)

    def test_continue_k_against_rotated_series(self, ctx30):
        # rotated_series_k(nu, s, m) evaluates K at s*exp(-i m pi)
        with mp.workdps(60):
            cases = [
                (mp.mpc("0.4", "0.1"), mp.mpf("1.5"), -1),
                (mp.mpf("0.37"), mp.mpf("2.2"), -1),
                (mp.mpc("0.4", "0.1"), mp.mpf("1.5"), 2),
            ]
        for nu, s, m in cases:
            oracle = rotated_series_k(nu, s, -m)
            assert_close(continue_k(nu, s, m, ctx30), oracle, mp.mpf(10) ** -24)

    def test_continue_i_against_rotated_series(self, ctx30):
        with mp.workdps(60):
            nu = mp.mpc("0.4", "0.1")
            s = mp.mpf("1.5")
        assert_close(continue_i(nu, s, 1, ctx30), rotated_series_i(nu, s, 1), mp.mpf(10) ** -24)

    def test_step_consistency(self, ctx30):
        # one extra half-turn: K at m equals exp(-i pi nu) K at m-1 minus
        # i pi times I at m-1
        with mp.workdps(60):
            nu = mp.mpc("0.31", "0.27")
            s = mp.mpf(3)
            for m in range(-2, 4):
                lhs = continue_k(nu, s, m, ctx30)
                rhs = (
                    mp.exp(-mp.mpc(0, 1) * mp.pi * nu) * continue_k(nu, s, m - 1, ctx30)
                    - mp.mpc(0, 1) * mp.pi * continue_i(nu, s, m - 1, ctx30)
                )
                scale = max(abs(lhs), abs(rhs), mp.mpf(1))
                assert abs(lhs - rhs) <= scale * mp.mpf(10) ** -25

    def test_half_integer_m_one_closed_form(self, ctx30):
        # at nu = 1/2 and m = -1 the continued K has an elementary value:
        # K_{1/2}(z) = sqrt(pi/(2 z)) e^{-z} with z = s e^{-i pi}
        with mp.workdps(60):
            s = mp.mpf("2.0")
            z = s * mp.exp(mp.mpc(0, -1) * mp.pi)
            expect = mp.sqrt(mp.pi / (2 * z)) * mp.exp(-z)
        assert_close(continue_k(mp.mpf("0.5"), s, -1, ctx30), expect, mp.mpf(10) ** -26)

    def test_integer_order_errors(self, ctx30):
        with pytest.raises(IntegerOrderError):
            continue_k(mp.mpf(2), mp.mpf(1), 1, ctx30)
