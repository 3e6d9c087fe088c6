"""Precision management and guarded special functions.

All numerics in this package run on mpmath's arbitrary-precision types under
an explicit :class:`PrecisionContext`.  The context separates the digits a
result is accountable for (``working_digits``) from extra slack carried
through intermediate arithmetic (``guard_digits``), so call sites can reason
about accuracy without sprinkling ``mp.workdps`` everywhere.

The wrapped special functions add the two guards the spectral code needs:
explicit errors near poles of gamma and digamma, and a precision boost for
``csc_pi`` that keeps it accurate arbitrarily close to its poles at integer
arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import mpmath as mp

__all__ = [
    "BigReal",
    "BigComplex",
    "IntegerOrderError",
    "PoleError",
    "PrecisionContext",
    "csc_pi",
    "digamma",
    "gamma",
]

#: Arbitrary-precision real scalar used throughout the package.
BigReal = mp.mpf

#: Arbitrary-precision complex scalar used throughout the package.
BigComplex = mp.mpc

_MIN_WORKING = 30
_MIN_GUARD = 10


class PoleError(ArithmeticError):
    """Argument within working tolerance of a nonpositive-integer pole."""


class IntegerOrderError(ArithmeticError):
    """Order within working tolerance of an integer, where csc(pi nu) blows up."""


@dataclass(frozen=True)
class PrecisionContext:
    """Precision policy: accountable digits plus guard digits.

    Parameters
    ----------
    working_digits : int
        Decimal digits the caller may rely on.  At least 30.
    guard_digits : int
        Extra digits carried by intermediate arithmetic.  At least 10.
    """

    working_digits: int = 30
    guard_digits: int = 10

    def __post_init__(self):
        for name, value, floor in (
            ("working_digits", self.working_digits, _MIN_WORKING),
            ("guard_digits", self.guard_digits, _MIN_GUARD),
        ):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError("%s must be an int, got %r" % (name, value))
            if value < floor:
                raise ValueError("%s must be >= %d, got %d" % (name, floor, value))

    @classmethod
    def for_output(cls, output_digits, hankel_dim=0, guard_digits=_MIN_GUARD):
        """Context sized for a requested output precision.

        Allocates ``output_digits + 30 + 2 * hankel_dim`` working digits:
        a flat 30-digit margin for root refinement and cancellation, plus
        two digits per determinant dimension when Hankel determinants are
        in play.
        """
        working = max(_MIN_WORKING, int(output_digits) + 30 + 2 * int(hankel_dim))
        return cls(working_digits=working, guard_digits=guard_digits)

    @property
    def dps(self):
        """Total decimal digits used by intermediate arithmetic."""
        return self.working_digits + self.guard_digits

    @property
    def tolerance(self):
        """10**(-working_digits) as a BigReal."""
        with mp.workdps(self.dps):
            return mp.mpf(10) ** (-self.working_digits)

    def with_working(self, working_digits):
        return replace(self, working_digits=working_digits)

    def workdps(self, extra=0):
        """Context manager setting mpmath precision to dps (+ extra)."""
        return mp.workdps(self.dps + extra)

    def real(self, value):
        """Convert to BigReal without round-tripping through float strings."""
        with self.workdps():
            if isinstance(value, Fraction):
                return mp.mpf(value.numerator) / value.denominator
            return mp.mpf(value)

    def complex(self, re, im=0):
        with self.workdps():
            return mp.mpc(self.real(re), self.real(im))


def _pole_distance(z):
    """(k, dist): nearest integer to Re z and the distance |z - k|."""
    z = mp.mpc(z)
    k = int(mp.nint(z.real))
    return k, abs(z - k)


def gamma(z, ctx=None):
    """Gamma function with explicit pole detection.

    Raises
    ------
    PoleError
        If ``z`` lies within ``10**-working_digits`` of a nonpositive integer.
    """
    ctx = ctx or PrecisionContext()
    with ctx.workdps():
        z = mp.mpmathify(z)
        k, dist = _pole_distance(z)
        if k <= 0 and dist < ctx.tolerance:
            raise PoleError("gamma pole at %d within tolerance: z = %s" % (k, mp.nstr(mp.mpc(z), 8)))
        return mp.gamma(z)


def digamma(z, ctx=None):
    """Digamma function with the same pole guard as :func:`gamma`."""
    ctx = ctx or PrecisionContext()
    with ctx.workdps():
        z = mp.mpmathify(z)
        k, dist = _pole_distance(z)
        if k <= 0 and dist < ctx.tolerance:
            raise PoleError("digamma pole at %d within tolerance: z = %s" % (k, mp.nstr(mp.mpc(z), 8)))
        return mp.digamma(z)


def csc_pi(nu, ctx=None):
    """1 / sin(pi nu), hardened against loss of accuracy near integers.

    The distance ``d`` from ``nu`` to the nearest integer is measured by an
    exact subtraction, and the evaluation precision is raised by
    ``-log10 d`` digits so the reciprocal keeps full working accuracy even
    when ``nu`` sits 10^-20 from a pole.

    Raises
    ------
    IntegerOrderError
        If ``nu`` is within ``10**-working_digits`` of an integer.
    """
    ctx = ctx or PrecisionContext()
    with ctx.workdps(20):
        nu = mp.mpmathify(nu)
        k, dist = _pole_distance(nu)
        if dist < ctx.tolerance:
            raise IntegerOrderError(
                "csc(pi nu) pole at %d within tolerance: nu = %s" % (k, mp.nstr(mp.mpc(nu), 8))
            )
        if dist < 1:
            boost = max(0, int(math.ceil(-mp.log10(dist))))
        else:
            boost = 0
    with ctx.workdps(boost + 10):
        nu = mp.mpmathify(nu)
        result = 1 / mp.sinpi(nu)
    with ctx.workdps():
        return +result
