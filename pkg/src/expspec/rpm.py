"""Eigenvalues from vanishing Hankel determinants of Riccati coefficients.

The regularized logarithmic derivative of a regular solution satisfies a
Riccati equation whose Taylor coefficients ``f_j`` are polynomials in the
energy.  Requiring a Hankel determinant built from those coefficients to
vanish turns quantization into polynomial root finding, with two engines:

* exact-symbolic, expanding ``H_D^d`` as a polynomial over the rationals
  and extracting every root at once (small ``D``), and
* numeric Newton iteration on ``H_D^d(E)`` with the derivative propagated
  through the recurrences (large ``D``).

Roots are certified by residual, classified against the exact spectra from
:mod:`expspec.spectra`, and tracked as a function of the determinant
dimension to measure convergence.
"""

import dataclasses
import math
import numbers
import warnings
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from types import MappingProxyType

import gmpy2
import mpmath as mp

from .mpcore import PrecisionContext
from .spectra import (
    NoConvergenceError,
    barrier_roots,
    bound_states,
    well_resonances,
    well_root_near,
)

__all__ = [
    "PotentialSeries",
    "EnergyPolynomial",
    "HankelSpec",
    "RootTag",
    "RpmRoot",
    "ConvergenceRecord",
    "ResourceLimitError",
    "RecursionBreakdownError",
    "ConvergenceWarning",
    "exponential_potential",
    "taylor_coeffs_numeric",
    "taylor_coeffs_symbolic",
    "hankel_numeric",
    "hankel_direct",
    "hankel_symbolic",
    "all_roots",
    "newton_polish",
    "classify_roots",
    "convergence_curve",
]


class ResourceLimitError(RuntimeError):
    """Symbolic determinant construction beyond the configured size cap."""


class RecursionBreakdownError(ArithmeticError):
    """A divisor in the two-term determinant recursion lost all its digits.

    Raised only when the caller disabled the direct-determinant fallback.
    """


class ConvergenceWarning(UserWarning):
    """A convergence-curve point was dropped because polishing failed."""


def _resolve(ctx):
    return ctx if ctx is not None else PrecisionContext()


def _as_fraction(value, what="coefficient"):
    """Exact conversion to Fraction; inexact binary floats are refused."""
    if isinstance(value, float) or isinstance(value, complex):
        raise TypeError(
            "%s must be exact (int, Fraction, or string), got %r" % (what, value)
        )
    try:
        return Fraction(value)
    except (TypeError, ValueError):
        raise TypeError("%s is not an exact rational: %r" % (what, value))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class PotentialSeries:
    """Laurent coefficients of a radial potential, plus angular momentum.

    Parameters
    ----------
    l : int
        Angular momentum in the centrifugal term, nonnegative.
    v : mapping int -> Fraction
        Coefficient of ``r**j`` for each key ``j >= -1``.  Keys present in
        the mapping define the potential; operations refuse to run past the
        supported range rather than assume missing coefficients are zero.
    """

    l: int
    v: "MappingProxyType"

    def __post_init__(self):
        if not isinstance(self.l, int) or self.l < 0:
            raise ValueError("l must be a nonnegative integer, got %r" % (self.l,))
        coeffs = {}
        for key, value in dict(self.v).items():
            if not isinstance(key, int) or key < -1:
                raise ValueError("coefficient index %r out of range (j >= -1)" % (key,))
            coeffs[key] = _as_fraction(value, "v[%d]" % key)
        object.__setattr__(self, "v", MappingProxyType(coeffs))


def exponential_potential(lam, sign=-1, l=0, terms=40):
    """Potential series for ``lam * exp(sign * r)``.

    Parameters
    ----------
    lam : exact rational, positive
        Coupling strength.
    sign : int
        ``-1`` for a decaying exponential, ``+1`` for a growing one.
    l : int
        Angular momentum.
    terms : int
        Number of power coefficients ``v_0 .. v_{terms-1}`` to tabulate.
        An operation that needs ``v_j`` for ``j >= terms`` raises, so make
        this at least ``2 D + d - 1`` for a Hankel determinant of
        dimension ``D`` and displacement ``d``.

    Returns
    -------
    PotentialSeries
    """
    lam = _as_fraction(lam, "lam")
    if lam <= 0:
        raise ValueError("lam must be positive, got %s" % lam)
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1, got %r" % (sign,))
    if not isinstance(terms, int) or terms < 1:
        raise ValueError("terms must be a positive integer, got %r" % (terms,))
    coeffs = {-1: Fraction(0)}
    factorial = 1
    for j in range(terms):
        if j:
            factorial *= j
        coeffs[j] = Fraction(sign, 1) ** j * lam / factorial
    return PotentialSeries(l=l, v=coeffs)


@dataclasses.dataclass(frozen=True)
class EnergyPolynomial:
    """Polynomial in the energy with exact rational coefficients.

    ``coefficients`` is dense, lowest power first, with trailing zeros
    stripped; the zero polynomial has no coefficients and degree ``-1``.
    """

    coefficients: tuple
    degree: int = dataclasses.field(init=False)

    def __post_init__(self):
        coeffs = [_as_fraction(c) for c in self.coefficients]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs))
        object.__setattr__(self, "degree", len(coeffs) - 1)

    def evaluate(self, energy, ctx=None):
        """Value at ``energy``: exact for rational input, else numeric.

        Rational input with no context returns a Fraction.  Any other
        input needs a PrecisionContext and returns a BigComplex.
        """
        if ctx is None:
            if not isinstance(energy, numbers.Rational):
                raise TypeError("numeric evaluation requires a PrecisionContext")
            energy = Fraction(energy)
            total = Fraction(0)
            for c in reversed(self.coefficients):
                total = total * energy + c
            return total
        with ctx.workdps():
            z = _to_mpc(energy)
            total = mp.mpc(0)
            for c in reversed(self.coefficients):
                total = total * z + mp.mpf(c.numerator) / c.denominator
            return total

    def derivative(self):
        return EnergyPolynomial(
            tuple(k * c for k, c in enumerate(self.coefficients) if k >= 1)
        )


@dataclasses.dataclass(frozen=True)
class HankelSpec:
    """Dimension ``D`` and displacement ``d`` of a Hankel determinant.

    ``D = 0`` denotes the empty determinant, identically one, which is the
    base case of the dimension recursion; root finding needs ``D >= 1``.
    The matrix entries are ``f_{d+i+j-1}``, so ``d >= -1`` keeps every
    index nonnegative.
    """

    D: int
    d: int = 0

    def __post_init__(self):
        if not isinstance(self.D, int) or self.D < 0:
            raise ValueError("D must be an integer >= 0, got %r" % (self.D,))
        if not isinstance(self.d, int) or self.d < -1:
            raise ValueError("d must be an integer >= -1, got %r" % (self.d,))

    @property
    def N(self):
        """Largest row index of the underlying coefficient matrix."""
        return self.D - 1

    @property
    def M(self):
        """Largest column index: N plus the displacement."""
        return self.D - 1 + self.d


@dataclasses.dataclass(frozen=True)
class RootTag:
    """Nearest-exact-eigenvalue classification of a determinant root."""

    kind: str
    m: object
    n: object
    distance: object


@dataclasses.dataclass(frozen=True)
class RpmRoot:
    """A polished or classified determinant root.

    ``residual`` is a scale-free backward-error estimate,
    ``|H| / (|dH/dE| * max(1, |E|))``, recorded at the final iterate;
    classification-only roots carry ``None`` there.
    """

    spec: object
    energy: object
    residual: object = None
    iterations: int = 0
    classification: object = None


@dataclasses.dataclass(frozen=True)
class ConvergenceRecord:
    """Digits of agreement with an exact eigenvalue at one dimension.

    ``m`` is the continuation branch for well targets, ``0`` for bound
    states, and the string ``"barrier"`` for barrier resonances.
    """

    n: int
    m: object
    D: int
    delta: object


# ---------------------------------------------------------------------------
# Taylor coefficients of the regularized logarithmic derivative
# ---------------------------------------------------------------------------
#
# f_0 = -v_{-1} / (2l + 2)
# f_{j+1} = (sum_{i<=j} f_i f_{j-i} - v_j + E delta_{j0}) / (2l + j + 3)


def _check_support(pot, count):
    if int(count) != count or count < 1:
        raise ValueError("count must be a positive integer, got %r" % (count,))
    missing = [j for j in range(-1, count - 1) if j not in pot.v]
    if missing:
        raise ValueError(
            "potential series too short: coefficient v_%d is undefined "
            "(needs keys -1..%d)" % (missing[0], count - 2)
        )


class _Jet:
    """Value, energy-derivative, and a running error bound on the value.

    ``err`` is (the base-2 exponent of) a first-order bound on the
    absolute error accumulated in ``val``; additions take the larger
    operand bound, so cancellation shows up as ``err`` staying put while
    the value's own magnitude collapses.  Exact quantities carry
    ``err = -inf``.  Tracking exponents as plain numbers keeps the
    bookkeeping far cheaper than interval arithmetic.
    """

    __slots__ = ("val", "dot", "err")

    def __init__(self, val, dot, err):
        self.val = val
        self.dot = dot
        self.err = err

    def __add__(self, other):
        val = self.val + other.val
        err = max(self.err, other.err, mp.mag(val) - mp.mp.prec) + 1
        return _Jet(val, self.dot + other.dot, err)

    def __sub__(self, other):
        val = self.val - other.val
        err = max(self.err, other.err, mp.mag(val) - mp.mp.prec) + 1
        return _Jet(val, self.dot - other.dot, err)

    def __mul__(self, other):
        val = self.val * other.val
        err = max(
            self.err + mp.mag(other.val),
            other.err + mp.mag(self.val),
            self.err + other.err,
            mp.mag(val) - mp.mp.prec,
        ) + 2
        return _Jet(val, self.val * other.dot + self.dot * other.val, err)

    def __neg__(self):
        return _Jet(-self.val, -self.dot, self.err)


def _jet_div(num, den):
    val = num.val / den.val
    dot = (num.dot - val * den.dot) / den.val
    mden = mp.mag(den.val)
    err = max(
        num.err - mden,
        mp.mag(val) + den.err - mden,
        mp.mag(val) - mp.mp.prec,
    ) + 2
    return _Jet(val, dot, err)


def _jet_broken(den):
    """True when the divisor retains fewer than ~4 significant digits."""
    return den.val == 0 or den.err >= mp.mag(den.val) - 14


class _Pair:
    """Exact value plus energy-derivative over the rationals."""

    __slots__ = ("val", "dot")

    def __init__(self, val, dot):
        self.val = val
        self.dot = dot

    def __add__(self, other):
        return _Pair(self.val + other.val, self.dot + other.dot)

    def __sub__(self, other):
        return _Pair(self.val - other.val, self.dot - other.dot)

    def __mul__(self, other):
        return _Pair(
            self.val * other.val, self.val * other.dot + self.dot * other.val
        )

    def __neg__(self):
        return _Pair(-self.val, -self.dot)


def _pair_div(num, den):
    val = num.val / den.val
    return _Pair(val, (num.dot - val * den.dot) / den.val)


def _to_mpc(value):
    if isinstance(value, numbers.Rational):
        return mp.mpc(mp.mpf(value.numerator) / value.denominator)
    return mp.mpc(value)


def _taylor_exact(pot, energy, count):
    """f_0..f_{count-1} as _Pair over Fraction; energy must be rational."""
    energy = Fraction(energy)
    two_l = 2 * pot.l
    f = [None] * count
    f[0] = _Pair(-pot.v[-1] / (two_l + 2), Fraction(0))
    for j in range(count - 1):
        acc = _Pair(Fraction(0), Fraction(0))
        for i in range(j + 1):
            acc = acc + f[i] * f[j - i]
        acc = acc - _Pair(pot.v[j], Fraction(0))
        if j == 0:
            acc = acc + _Pair(energy, Fraction(1))
        k = two_l + j + 3
        f[j + 1] = _Pair(acc.val / k, acc.dot / k)
    return f


def _taylor_jets(pot, energy, count):
    """f_0..f_{count-1} as _Jet over BigComplex, at ambient precision."""
    energy = _to_mpc(energy)
    prec = mp.mp.prec
    two_l = 2 * pot.l
    v = {}
    for j in range(-1, count - 1):
        c = pot.v[j]
        v[j] = mp.mpf(c.numerator) / c.denominator
    f = [None] * count
    first = -v[-1] / (two_l + 2)
    f[0] = _Jet(mp.mpc(first), mp.mpc(0), mp.mag(first) - prec)
    ninf = mp.mag(0)
    for j in range(count - 1):
        val = mp.mpc(0)
        dot = mp.mpc(0)
        err = ninf
        for i in range(j + 1):
            a, b = f[i], f[j - i]
            val += a.val * b.val
            dot += a.val * b.dot + a.dot * b.val
            err = max(
                err,
                a.err + mp.mag(b.val),
                b.err + mp.mag(a.val),
                a.err + b.err,
            )
        val -= v[j]
        if j == 0:
            val += energy
            dot += 1
            err = max(err, mp.mag(energy) - prec)
        # lump the rounding of the whole accumulation into one ulp term
        # plus a log-length allowance for the summation tree
        err = max(err, mp.mag(val) - prec) + j.bit_length() + 2
        k = two_l + j + 3
        f[j + 1] = _Jet(val / k, dot / k, err - mp.mag(k) + 2)
    return f


def taylor_coeffs_numeric(pot, energy, count, ctx=None):
    """First ``count`` Taylor coefficients at a fixed energy.

    A rational energy is processed exactly and yields Fractions (no
    context needed); any other energy is evaluated as BigComplex under
    ``ctx``.

    Parameters
    ----------
    pot : PotentialSeries
    energy : exact rational or complex-like
    count : int
        How many coefficients ``f_0 .. f_{count-1}`` to produce; the
        potential must define ``v_{-1} .. v_{count-2}``.
    ctx : PrecisionContext, required for non-rational energies

    Returns
    -------
    list of Fraction or list of BigComplex
    """
    _check_support(pot, count)
    if isinstance(energy, numbers.Rational):
        return [pair.val for pair in _taylor_exact(pot, energy, count)]
    if ctx is None:
        raise TypeError("non-rational energy requires a PrecisionContext")
    with ctx.workdps():
        return [jet.val for jet in _taylor_jets(pot, energy, count)]


_ZERO_POLY = ()


def _poly_norm(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def _poly_add(a, b):
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, c in enumerate(b):
        out[i] += c
    return _poly_norm(out)


def _poly_sub(a, b):
    out = list(a) + [gmpy2.mpq(0)] * (len(b) - len(a))
    for i, c in enumerate(b):
        out[i] -= c
    return _poly_norm(out)


def _poly_neg(a):
    return tuple(-c for c in a)


def _poly_mul(a, b):
    if not a or not b:
        return _ZERO_POLY
    out = [gmpy2.mpq(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _poly_norm(out)


def _poly_div_exact(num, den):
    """Quotient of polynomials known to divide exactly."""
    if not den:
        raise ZeroDivisionError("polynomial division by zero")
    if not num:
        return _ZERO_POLY
    num = list(num)
    lead = den[-1]
    dn = len(den) - 1
    quot = [gmpy2.mpq(0)] * (len(num) - len(den) + 1)
    for k in range(len(quot) - 1, -1, -1):
        c = num[dn + k] / lead
        quot[k] = c
        if c != 0:
            for i, dcoef in enumerate(den):
                num[k + i] -= c * dcoef
    if any(c != 0 for c in num):
        raise ArithmeticError("inexact polynomial division in determinant recursion")
    return _poly_norm(quot)


def _taylor_polys(pot, count):
    """f_0..f_{count-1} as rational-coefficient polynomial tuples."""
    two_l = 2 * pot.l
    v = {
        j: gmpy2.mpq(pot.v[j].numerator, pot.v[j].denominator)
        for j in range(-1, count - 1)
    }
    f = [None] * count
    f[0] = _poly_norm([-v[-1] / (two_l + 2)])
    for j in range(count - 1):
        acc = _ZERO_POLY
        for i in range(j + 1):
            acc = _poly_add(acc, _poly_mul(f[i], f[j - i]))
        acc = _poly_sub(acc, (v[j],))
        if j == 0:
            acc = _poly_add(acc, (gmpy2.mpq(0), gmpy2.mpq(1)))
        k = gmpy2.mpq(1, two_l + j + 3)
        f[j + 1] = _poly_norm([c * k for c in acc])
    return f


def _poly_to_energy_polynomial(coeffs):
    return EnergyPolynomial(
        tuple(Fraction(int(c.numerator), int(c.denominator)) for c in coeffs)
    )


def taylor_coeffs_symbolic(pot, count):
    """First ``count`` Taylor coefficients as polynomials in the energy.

    Parameters
    ----------
    pot : PotentialSeries
    count : int

    Returns
    -------
    list of EnergyPolynomial
    """
    _check_support(pot, count)
    return [_poly_to_energy_polynomial(p) for p in _taylor_polys(pot, count)]


# ---------------------------------------------------------------------------
# Hankel determinants
# ---------------------------------------------------------------------------


def _bareiss_det(rows, zero):
    """Fraction-free elimination; exact over any integral domain."""
    n = len(rows)
    rows = [list(r) for r in rows]
    sign = 1
    prev = None
    for k in range(n - 1):
        if rows[k][k] == zero:
            swap = next(
                (i for i in range(k + 1, n) if rows[i][k] != zero), None
            )
            if swap is None:
                return zero
            rows[k], rows[swap] = rows[swap], rows[k]
            sign = -sign
        pivot = rows[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                value = rows[i][j] * pivot - rows[i][k] * rows[k][j]
                rows[i][j] = value if prev is None else value / prev
            rows[i][k] = zero
        prev = pivot
    det = rows[n - 1][n - 1]
    return -det if sign < 0 else det


def _poly_bareiss_det(rows):
    """Bareiss over polynomial entries (tuples of mpq)."""
    n = len(rows)
    rows = [list(r) for r in rows]
    sign = 1
    prev = None
    for k in range(n - 1):
        if not rows[k][k]:
            swap = next((i for i in range(k + 1, n) if rows[i][k]), None)
            if swap is None:
                return _ZERO_POLY
            rows[k], rows[swap] = rows[swap], rows[k]
            sign = -sign
        pivot = rows[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                value = _poly_sub(
                    _poly_mul(rows[i][j], pivot), _poly_mul(rows[i][k], rows[k][j])
                )
                rows[i][j] = value if prev is None else _poly_div_exact(value, prev)
            rows[i][k] = _ZERO_POLY
        prev = pivot
    det = rows[n - 1][n - 1]
    return _poly_neg(det) if sign < 0 else det


def _lu_det(rows):
    """Numeric determinant with partial pivoting, at ambient precision."""
    n = len(rows)
    rows = [list(r) for r in rows]
    det = mp.mpc(1)
    sign = 1
    for k in range(n):
        pivot = max(range(k, n), key=lambda i: abs(rows[i][k]))
        if rows[pivot][k] == 0:
            return mp.mpc(0)
        if pivot != k:
            rows[k], rows[pivot] = rows[pivot], rows[k]
            sign = -sign
        det *= rows[k][k]
        for i in range(k + 1, n):
            ratio = rows[i][k] / rows[k][k]
            for j in range(k + 1, n):
                rows[i][j] -= ratio * rows[k][j]
    return det if sign > 0 else -det


def _det_with_derivative(vals, dots, det):
    """Determinant and its derivative via row-wise differentiation."""
    value = det(vals)
    n = len(vals)
    deriv = None
    for i in range(n):
        term = det(vals[:i] + [dots[i]] + vals[i + 1 :])
        deriv = term if deriv is None else deriv + term
    return value, deriv


def _lu_det_dual(vals, dots):
    """Numeric determinant and derivative in one elimination pass.

    Runs partial-pivot elimination on value/derivative pairs, pivoting on
    the value component; a division by a pair is legal whenever that
    component is nonzero.  When pivoting stalls on an exactly singular
    column the slower row-replacement formula takes over, since a rank
    deficiency kills the product form but not the derivative.
    """
    n = len(vals)
    a = [[(vals[i][j], dots[i][j]) for j in range(n)] for i in range(n)]
    det = mp.mpc(1)
    ddet = mp.mpc(0)
    sign = 1
    for k in range(n):
        pivot = max(range(k, n), key=lambda i: abs(a[i][k][0]))
        if a[pivot][k][0] == 0:
            return _det_with_derivative(vals, dots, _lu_det)
        if pivot != k:
            a[k], a[pivot] = a[pivot], a[k]
            sign = -sign
        pv, pd = a[k][k]
        ddet = ddet * pv + det * pd
        det = det * pv
        for i in range(k + 1, n):
            cv, cd = a[i][k]
            rv = cv / pv
            rd = (cd - rv * pd) / pv
            for j in range(k + 1, n):
                uv, ud = a[k][j]
                wv, wd = a[i][j]
                a[i][j] = (wv - rv * uv, wd - rv * ud - rd * uv)
    if sign < 0:
        return -det, -ddet
    return det, ddet


def _entry_matrix(f, D, d, attr):
    return [[getattr(f[d + i + j + 1], attr) for j in range(D)] for i in range(D)]


def _op_mul(a, b):
    return a * b


def _op_sub(a, b):
    return a - b


def _cascade(f, D, d, div, broke, direct_cell, mul=_op_mul, sub=_op_sub):
    """Dimension recursion for ``H_D^d`` over any ring.

    ``f`` holds ring elements; ``mul``/``sub``/``div`` are the ring
    operations, ``broke(num, den)`` flags a divisor too degraded to use,
    and ``direct_cell(k, e)`` recomputes the offending cell from its
    explicit matrix.
    """
    prev1 = {e: f[e + 1] for e in range(d, d + 2 * D - 1)}
    if D == 1:
        return prev1[d]
    prev2 = {}
    for k in range(2, D + 1):
        cur = {}
        for e in range(d, d + 2 * (D - k) + 1):
            num = sub(mul(prev1[e], prev1[e + 2]), mul(prev1[e + 1], prev1[e + 1]))
            if k == 2:
                cur[e] = num
            else:
                den = prev2[e + 2]
                if broke(num, den):
                    cur[e] = direct_cell(k, e)
                else:
                    cur[e] = div(num, den)
        prev2, prev1 = prev1, cur
    return prev1[d]


def hankel_numeric(pot, energy, spec, ctx, fallback=True):
    """``H_D^d`` and its energy derivative by the dimension recursion.

    A rational energy runs exactly over Fractions; anything else runs as
    BigComplex under ``ctx``.  When an intermediate divisor has lost its
    leading digits to cancellation, the affected cell is recomputed from
    its explicit determinant, or, with ``fallback=False``, a
    RecursionBreakdownError is raised instead.

    Returns
    -------
    (value, derivative_dE)
    """
    if spec.D == 0:
        if isinstance(energy, numbers.Rational):
            return Fraction(1), Fraction(0)
        with _resolve(ctx).workdps():
            return mp.mpc(1), mp.mpc(0)
    count = 2 * spec.D + spec.d
    _check_support(pot, count)

    if isinstance(energy, numbers.Rational):
        f = _taylor_exact(pot, energy, count)
        zero = Fraction(0)

        def broke(num, den):
            return den.val == 0

        def direct_cell(k, e):
            if not fallback:
                raise RecursionBreakdownError(
                    "zero divisor in the determinant recursion at "
                    "dimension %d, displacement %d" % (k, e)
                )
            vals = [[f[e + i + j + 1].val for j in range(k)] for i in range(k)]
            dots = [[f[e + i + j + 1].dot for j in range(k)] for i in range(k)]
            value, deriv = _det_with_derivative(
                vals, dots, lambda rows: _bareiss_det(rows, zero)
            )
            return _Pair(value, deriv)

        top = _cascade(f, spec.D, spec.d, _pair_div, broke, direct_cell)
        return top.val, top.dot

    if ctx is None:
        raise TypeError("non-rational energy requires a PrecisionContext")
    with ctx.workdps():
        f = _taylor_jets(pot, energy, count)

        def broke(num, den):
            return _jet_broken(den)

        def direct_cell(k, e):
            if not fallback:
                raise RecursionBreakdownError(
                    "divisor lost its leading digits in the determinant "
                    "recursion at dimension %d, displacement %d" % (k, e)
                )
            vals = [[f[e + i + j + 1].val for j in range(k)] for i in range(k)]
            dots = [[f[e + i + j + 1].dot for j in range(k)] for i in range(k)]
            value, deriv = _lu_det_dual(vals, dots)
            return _Jet(value, deriv, mp.mag(value) - mp.mp.prec + 4 * k)

        top = _cascade(f, spec.D, spec.d, _jet_div, broke, direct_cell)
        return top.val, top.dot


def hankel_direct(pot, energy, spec, ctx=None):
    """``H_D^d`` from the explicit coefficient matrix.

    The reference implementation: fraction-free elimination for rational
    energies, pivoted elimination for numeric ones.  Cost grows as the
    cube of ``D``, so this backs the recursion rather than replacing it.
    """
    if spec.D == 0:
        return Fraction(1) if isinstance(energy, numbers.Rational) else mp.mpf(1)
    count = 2 * spec.D + spec.d
    _check_support(pot, count)
    if isinstance(energy, numbers.Rational):
        coeffs = [p.val for p in _taylor_exact(pot, energy, count)]
        rows = [
            [coeffs[spec.d + i + j + 1] for j in range(spec.D)]
            for i in range(spec.D)
        ]
        return _bareiss_det(rows, Fraction(0))
    if ctx is None:
        raise TypeError("non-rational energy requires a PrecisionContext")
    with ctx.workdps():
        coeffs = [jet.val for jet in _taylor_jets(pot, energy, count)]
        rows = [
            [coeffs[spec.d + i + j + 1] for j in range(spec.D)]
            for i in range(spec.D)
        ]
        return _lu_det(rows)


_SYMBOLIC_LIMIT = 16


def hankel_symbolic(pot, spec, limit=_SYMBOLIC_LIMIT):
    """``H_D^d`` expanded as an exact polynomial in the energy.

    Parameters
    ----------
    pot : PotentialSeries
    spec : HankelSpec
    limit : int
        Largest dimension accepted; the polynomial degree grows as
        ``D (D + 1) / 2`` and coefficient sizes grow much faster, so the
        cap guards against accidentally unbounded requests.

    Returns
    -------
    EnergyPolynomial
    """
    if spec.D > limit:
        raise ResourceLimitError(
            "symbolic determinant of dimension %d exceeds the limit %d"
            % (spec.D, limit)
        )
    if spec.D == 0:
        return EnergyPolynomial((Fraction(1),))
    count = 2 * spec.D + spec.d
    _check_support(pot, count)
    f = _taylor_polys(pot, count)

    def broke(num, den):
        return not den

    def direct_cell(k, e):
        rows = [[f[e + i + j + 1] for j in range(k)] for i in range(k)]
        return _poly_bareiss_det(rows)

    top = _cascade(
        f, spec.D, spec.d, _poly_div_exact, broke, direct_cell,
        mul=_poly_mul, sub=_poly_sub,
    )
    return _poly_to_energy_polynomial(top)


# ---------------------------------------------------------------------------
# root extraction
# ---------------------------------------------------------------------------


def _horner_pair(coeffs, z):
    p = coeffs[-1]
    dp = mp.mpc(0)
    for c in reversed(coeffs[:-1]):
        dp = dp * z + p
        p = p * z + c
    return p, dp


def _coefficient_norm_at(coeffs, radius):
    total = mp.mpf(0)
    power = mp.mpf(1)
    for c in coeffs:
        total += abs(c) * power
        power *= radius
    return total


def _start_points(coeffs):
    """Initial root guesses from the coefficient magnitude polygon.

    One circle per edge of the upper convex hull of ``(k, log|c_k|)``,
    holding as many points as the edge spans; every radius is bounded by
    the classical root bound ``1 + max |c_k / c_deg|``.
    """
    pts = [
        (k, math.log(float(abs(c))) if abs(c) > 0 else None)
        for k, c in enumerate(coeffs)
    ]
    pts = [(k, u) for k, u in pts if u is not None]
    hull = []
    for k, u in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (u - y1) - (y2 - y1) * (k - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append((k, u))
    starts = []
    for (k1, u1), (k2, u2) in zip(hull, hull[1:]):
        span = k2 - k1
        radius = mp.exp(mp.mpf(u1 - u2) / span)
        for j in range(span):
            angle = 2 * mp.pi * (j + mp.mpf(1) / 4) / span + mp.mpf(k1) / 3
            starts.append(radius * mp.exp(1j * angle))
    return starts


def all_roots(poly, ctx=None):
    """Every complex root of an energy polynomial.

    Simultaneous (Aberth-style) iteration from magnitude-polygon starting
    points, followed by individual Newton refinement.  Each root is
    certified by ``|p(z)| < 10**(6 - working_digits) * sum |c_k| |z|**k``;
    output is ordered by real part, then by conjugate pair with the lower
    half-plane member first, and pairs are snapped to exact conjugates
    (the coefficients are real, so the exact root set is self-conjugate).

    Raises
    ------
    ValueError
        If the degree is below one.
    NoConvergenceError
        If the iteration stalls or a root fails certification; the
        ``partial`` attribute carries the working approximations.
    """
    ctx = _resolve(ctx)
    if poly.degree < 1:
        raise ValueError("root finding needs degree >= 1, got %d" % poly.degree)
    workdigits = ctx.dps + 20 + poly.degree // 2
    with mp.workdps(workdigits):
        coeffs = [mp.mpf(c.numerator) / c.denominator for c in poly.coefficients]
        at_origin = 0
        while coeffs and coeffs[0] == 0:
            coeffs.pop(0)
            at_origin += 1
        roots = [mp.mpc(0)] * at_origin
        degree = len(coeffs) - 1
        if degree == 1:
            roots.append(mp.mpc(-coeffs[0] / coeffs[1]))
        elif degree > 1:
            roots.extend(_aberth(coeffs, workdigits))
        certify = mp.mpf(10) ** (6 - ctx.working_digits)
        for z in roots:
            residual = abs(_horner_pair(coeffs, z)[0]) if degree >= 1 else mp.mpf(0)
            if at_origin and z == 0:
                residual = mp.mpf(0)
            if residual > certify * _coefficient_norm_at(coeffs, abs(z)):
                raise NoConvergenceError(
                    "root %s failed residual certification" % mp.nstr(z, 10),
                    partial=roots,
                )
        roots = _snap_conjugates(roots, ctx)
        roots.sort(key=lambda z: (z.real, abs(z.imag), 0 if z.imag <= 0 else 1))
    with ctx.workdps():
        # shed the iteration's extra digits so callers see ctx-precision
        # values (and conjugate pairs stay exact mirror images)
        return [mp.mpc(+z.real, +z.imag) for z in roots]


def _aberth(coeffs, workdigits):
    degree = len(coeffs) - 1
    z = _start_points(coeffs)
    for i in range(len(z)):
        for j in range(i):
            if z[i] == z[j]:
                z[i] = z[i] * mp.mpf("1.0000001") + mp.mpf("1e-4")
    eps = mp.mpf(10) ** (8 - workdigits)
    # a residual at the evaluation noise floor settles a point even when
    # its step cannot shrink further; near-degenerate root clusters
    # amplify step noise by the inverse cluster separation, so a pure
    # step-size test would spin forever on them
    noise = mp.mpf(10) ** (4 - workdigits)
    slow = mp.mpf("1e-20")
    settled = [False] * degree
    for _ in range(500):
        done = True
        for i in range(degree):
            if settled[i]:
                continue
            p, dp = _horner_pair(coeffs, z[i])
            if p == 0:
                settled[i] = True
                continue
            if dp == 0:
                z[i] += mp.mpf("1e-3") * (1 + abs(z[i]))
                done = False
                continue
            newton = p / dp
            repulsion = mp.mpc(0)
            for j in range(degree):
                if j != i:
                    repulsion += 1 / (z[i] - z[j])
            denom = 1 - newton * repulsion
            step = newton if denom == 0 else newton / denom
            z[i] -= step
            if abs(step) <= eps * (1 + abs(z[i])):
                settled[i] = True
            elif abs(step) <= slow * (1 + abs(z[i])) and abs(
                p
            ) <= noise * _coefficient_norm_at(coeffs, abs(z[i])):
                settled[i] = True
            else:
                done = False
        if done:
            break
    else:
        raise NoConvergenceError(
            "simultaneous root iteration did not settle", partial=z
        )
    for i in range(degree):
        for _ in range(6):
            p, dp = _horner_pair(coeffs, z[i])
            if p == 0 or dp == 0:
                break
            step = p / dp
            z[i] -= step
            if abs(step) <= eps * eps * (1 + abs(z[i])):
                break
    return z


def _snap_conjugates(roots, ctx):
    with mp.workdps(mp.mp.dps):
        snap = mp.mpf(10) ** (8 - ctx.working_digits)
        out = []
        positives = []
        for z in roots:
            if abs(z.imag) <= snap * (1 + abs(z)):
                out.append(mp.mpc(z.real, 0))
            elif z.imag < 0:
                out.append(z)
            else:
                positives.append(z)
        negatives = [z for z in out if z.imag < 0]
        used = [False] * len(negatives)
        for z in positives:
            best = None
            for i, w in enumerate(negatives):
                if used[i]:
                    continue
                gap = abs(z - mp.mpc(w.real, -w.imag))
                if best is None or gap < best[1]:
                    best = (i, gap)
            if best is not None and best[1] <= snap * (1 + abs(z)):
                i = best[0]
                used[i] = True
                w = negatives[i]
                out.append(mp.mpc(w.real, -w.imag))
            else:
                out.append(z)
    return out


# ---------------------------------------------------------------------------
# Newton polishing
# ---------------------------------------------------------------------------


def newton_polish(pot, spec, seed, ctx=None):
    """Newton iteration on ``H_D^d(E) = 0`` from a caller-supplied seed.

    Convergence requires a relative step below ``10**-(working_digits+5)``
    within 100 iterations; iterates past ``|E| = 10**6`` are treated as
    divergent.  The derivative comes from the same recursion as the value,
    so each iteration costs one determinant evaluation.

    Returns
    -------
    RpmRoot
    """
    ctx = _resolve(ctx)
    if spec.D < 1:
        raise ValueError("polishing needs a determinant of dimension >= 1")
    with ctx.workdps():
        energy = _to_mpc(seed)
        if not (mp.isfinite(energy.real) and mp.isfinite(energy.imag)):
            raise ValueError("seed must be finite, got %r" % (seed,))
        step_tol = mp.mpf(10) ** (-(ctx.working_digits + 5))
        slow_gate = mp.mpf(10) ** (-12)
        floor = mp.mpf(10) ** (-ctx.working_digits)
        iterations = 0
        converged = False
        last_step = None
        while iterations < 100:
            iterations += 1
            value, deriv = hankel_numeric(pot, energy, spec, ctx)
            if deriv == 0:
                raise NoConvergenceError(
                    "stationary point: the determinant derivative vanished",
                    partial=[energy],
                )
            step = value / deriv
            energy = energy - step
            if abs(energy) > 10**6:
                raise NoConvergenceError(
                    "divergence: |E| exceeded 1e6 after %d iterations" % iterations,
                    partial=[energy],
                )
            scale = max(abs(energy), floor)
            if abs(step) <= step_tol * scale:
                converged = True
                break
            # far below quadratic-phase step sizes a stalled step means
            # the iterate is bouncing on the evaluation noise floor: the
            # root is as converged as this precision allows
            if (
                last_step is not None
                and last_step <= slow_gate * scale
                and abs(step) > mp.mpf("0.01") * last_step
            ):
                converged = True
                break
            last_step = abs(step)
        if not converged:
            raise NoConvergenceError(
                "no convergence within 100 iterations", partial=[energy]
            )
        value, deriv = hankel_numeric(pot, energy, spec, ctx)
        scale = abs(deriv) * max(mp.mpf(1), abs(energy))
        residual = abs(value) / scale if scale > 0 else abs(value)
    return RpmRoot(
        spec=spec,
        energy=energy,
        residual=residual,
        iterations=iterations,
        classification=None,
    )


# ---------------------------------------------------------------------------
# classification against the exact spectra
# ---------------------------------------------------------------------------


def _grow_bound(lam, cap, ctx):
    count = 4
    states = bound_states(lam, count, ctx)
    while states[-1].energy.real <= cap and count < 40:
        count += 4
        states = bound_states(lam, count, ctx)
    return states


def _grow_barrier(lam, cap, ctx):
    count = 4
    kept = []
    while True:
        try:
            roots = barrier_roots(lam, count, ctx)
        except NoConvergenceError:
            break
        kept = roots
        with ctx.workdps():
            deepest = min(abs(r.energy) for r in roots[-4:])
        if deepest > cap or count >= 16:
            break
        count += 4
    return [r for r in kept if r.order.imag != 0]


def _grow_wells(lam, cap, ctx):
    reach_needed = 2 * math.sqrt(float(cap)) + 0.5
    found = []
    for m in (1, 2, 3):
        kept = []
        count = 4
        while count <= 24:
            try:
                wells = well_resonances(lam, m, count, ctx)
            except NoConvergenceError:
                # the branch has fewer distinct roots than requested;
                # classify against what the previous round certified
                break
            kept = wells
            with ctx.workdps():
                reached = abs(kept[-1].order) > reach_needed
            if reached:
                break
            count += 4
        found.extend(kept)
    return found


def _conjugate_distance(root, exact, ctx):
    with ctx.workdps():
        direct = abs(root - exact)
        mirrored = abs(root - mp.mpc(exact.real, -exact.imag))
        return min(direct, mirrored)


_SPURIOUS_DISTANCE = Fraction(1, 100)


def classify_roots(roots, lam, ctx=None):
    """Tag each determinant root with the nearest exact eigenvalue.

    Candidates are the bound states, the complex barrier resonances, and
    the well resonances for branches 1..3; virtual states (real negative
    barrier roots) are excluded outright, so nothing is ever labeled as
    one.  Distances are conjugate-aware since the determinant cannot tell
    an eigenvalue from its mirror image.  Barrier and well resonances can
    agree to many more digits than a determinant root resolves; in such a
    near-tie the well label wins, because the determinant roots are
    approximants of the well spectrum.  Roots farther than 1e-2 from
    every candidate are tagged spurious.

    Returns
    -------
    list of RpmRoot
        One per input root, in input order, each carrying a RootTag.
    """
    ctx = _resolve(ctx)
    if not roots:
        return []
    originals = [
        r if isinstance(r, (mp.mpf, mp.mpc)) else _to_mpc(r) for r in roots
    ]
    with ctx.workdps():
        converted = [mp.mpc(r) for r in originals]
        cap = max(abs(r) for r in converted) * mp.mpf("1.05") + 2
    candidates = []
    for state in _grow_bound(lam, cap, ctx):
        candidates.append(("bound", 0, state.n, state.energy))
    for res in _grow_barrier(lam, cap, ctx):
        candidates.append(("barrier", None, res.n, res.energy))
    for res in _grow_wells(lam, cap, ctx):
        candidates.append(("well", res.m, res.n, res.energy))
    tagged = []
    for original, root in zip(originals, converted):
        scored = [
            (kind, m, n, _conjugate_distance(root, energy, ctx))
            for kind, m, n, energy in candidates
        ]
        with ctx.workdps():
            best = min(s[3] for s in scored)
            spurious_gate = ctx.real(_SPURIOUS_DISTANCE)
            if best > spurious_gate:
                tag = RootTag("spurious", None, None, best)
            else:
                tied = [s for s in scored if s[3] <= 4 * best]
                wells = [s for s in tied if s[0] == "well"]
                kind, m, n, dist = min(
                    wells or tied, key=lambda s: (s[3], s[1] or 0)
                )
                tag = RootTag(kind, m, n, dist)
        tagged.append(
            RpmRoot(spec=None, energy=original, residual=None, iterations=0,
                    classification=tag)
        )
    return tagged


# ---------------------------------------------------------------------------
# convergence curves
# ---------------------------------------------------------------------------


def _refine_target(target, lam, ctx):
    if target.kind == "bound":
        if target.n < 0:
            raise ValueError("bound target must carry its spectral rank")
        return bound_states(lam, target.n + 1, ctx)[target.n]
    if target.kind == "barrier":
        if target.n < 0:
            raise ValueError("barrier target must carry its spectral rank")
        return barrier_roots(lam, target.n + 1, ctx)[target.n]
    if target.kind == "well":
        return well_root_near(lam, target.m, target.order, ctx)
    raise ValueError("unrecognized target kind %r" % (target.kind,))


def _curve_worker(args):
    l, v_items, D, seed, workdigits, guard = args
    pot = PotentialSeries(l=l, v=dict(v_items))
    ctx = PrecisionContext(working_digits=workdigits, guard_digits=guard)
    try:
        root = newton_polish(pot, HankelSpec(D, 0), seed, ctx)
    except NoConvergenceError as err:
        return D, None, str(err)
    return D, root.energy, None


def convergence_curve(pot, lam, target, D_list, ctx=None, jobs=1):
    """Digits of agreement with an exact eigenvalue versus dimension.

    For each dimension the determinant root is polished from a seed at
    the exact eigenvalue, at working precision that grows with ``D`` to
    outpace the cancellation inside the recursion; the exact value itself
    is recomputed with ten digits to spare.  Points where polishing fails
    are dropped with a ConvergenceWarning.

    Parameters
    ----------
    pot : PotentialSeries
    lam : coupling, must match ``target.lam``
    target : SpectralRoot
        The exact eigenvalue being approximated.
    D_list : strictly increasing positive integers
    ctx : PrecisionContext, optional
        Sets the output requirement; per-dimension working precision is
        derived from it.
    jobs : int
        Dimensions are solved in separate processes when above one.

    Returns
    -------
    list of ConvergenceRecord
    """
    ctx = _resolve(ctx)
    if not D_list:
        raise ValueError("D_list must not be empty")
    cleaned = []
    for D in D_list:
        if int(D) != D or D < 1:
            raise ValueError("dimensions must be positive integers, got %r" % (D,))
        if cleaned and D <= cleaned[-1]:
            raise ValueError("D_list must be strictly increasing")
        cleaned.append(int(D))
    if not isinstance(jobs, int) or jobs < 1:
        raise ValueError("jobs must be a positive integer")
    with ctx.workdps():
        lam_value = ctx.real(lam)
        if abs(lam_value - target.lam) > mp.mpf("1e-12") * (1 + abs(lam_value)):
            raise ValueError("target was computed at a different coupling")
    exact_ctx = PrecisionContext.for_output(
        ctx.working_digits + 10,
        hankel_dim=cleaned[-1],
        guard_digits=ctx.guard_digits,
    )
    exact = _refine_target(target, lam_value, exact_ctx)
    if target.kind == "barrier":
        branch = "barrier"
    elif target.kind == "bound":
        branch = 0
    else:
        branch = target.m

    tasks = []
    for D in cleaned:
        ctx_d = PrecisionContext.for_output(
            ctx.working_digits, hankel_dim=D, guard_digits=ctx.guard_digits
        )
        tasks.append((D, ctx_d))
    outcomes = []
    if jobs == 1:
        for D, ctx_d in tasks:
            try:
                root = newton_polish(pot, HankelSpec(D, 0), exact.energy, ctx_d)
            except NoConvergenceError as err:
                outcomes.append((D, None, str(err)))
            else:
                outcomes.append((D, root.energy, None))
    else:
        v_items = tuple(sorted(pot.v.items()))
        args = [
            (pot.l, v_items, D, exact.energy, ctx_d.working_digits,
             ctx_d.guard_digits)
            for D, ctx_d in tasks
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_curve_worker, args))

    records = []
    for D, polished, failure in sorted(outcomes, key=lambda item: item[0]):
        if polished is None:
            warnings.warn(
                "dimension %d dropped from the convergence curve: %s"
                % (D, failure),
                ConvergenceWarning,
            )
            continue
        with exact_ctx.workdps():
            gap = abs(exact.energy - polished)
            if gap == 0:
                # agreement beyond evaluation precision; report the floor
                delta = mp.mpf(exact_ctx.working_digits)
            else:
                delta = -mp.log10(gap)
        records.append(
            ConvergenceRecord(n=target.n, m=branch, D=D, delta=delta)
        )
    return records
