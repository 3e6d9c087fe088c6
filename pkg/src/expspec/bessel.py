"""Modified Bessel functions of complex order, series-first.

Everything is built from the ascending series

.. math::

    I_\\nu(x) = \\sum_{k \\ge 0} \\frac{(x/2)^{\\nu+2k}}{k!\\,\\Gamma(\\nu+k+1)},

with :math:`K_\\nu` obtained from the two-sided combination
:math:`K_\\nu(x) = \\tfrac{\\pi}{2}\\csc(\\nu\\pi)\\,[I_{-\\nu}(x) - I_\\nu(x)]`
and order-derivatives by termwise differentiation.  Large-argument
asymptotic expansions and the analytic-continuation phases

.. math::

    I_\\nu(s e^{m\\pi i}) = e^{m\\nu\\pi i} I_\\nu(s), \\qquad
    K_\\nu(s e^{m\\pi i}) = e^{-m\\nu\\pi i} K_\\nu(s)
        - \\pi i \\sin(m\\nu\\pi)\\csc(\\nu\\pi) I_\\nu(s)

complete the toolkit the spectral layer needs.

Internally each routine measures how many digits the final combination will
cancel (the subtraction in K loses about 0.87 x digits at large x and about
1.37 |Im nu| more for strongly complex order) and evaluates the series with
that many extra digits, so the value handed back is good to the context's
working precision.  Public functions canonicalize the order to the upper
half-plane and conjugate the result back, which makes conjugation symmetry
hold exactly at the representation level.
"""

from __future__ import annotations

import math
from collections import namedtuple

import mpmath as mp

from .mpcore import IntegerOrderError, PrecisionContext, _pole_distance, csc_pi

__all__ = [
    "AsymptoticResult",
    "OutOfSectorError",
    "asymptotic_i",
    "asymptotic_k",
    "bessel_i",
    "bessel_i_dnu",
    "bessel_i_dx",
    "bessel_k",
    "bessel_k_dnu",
    "bessel_k_dx",
    "continue_i",
    "continue_k",
]

#: Truncated asymptotic value and the magnitude of the first omitted term.
AsymptoticResult = namedtuple("AsymptoticResult", ["value", "error"])

_MAX_TERMS = 100000


class OutOfSectorError(ValueError):
    """Argument phase outside the validity sector of an asymptotic expansion."""


def _require_positive(x):
    x = mp.mpf(x)
    if x <= 0:
        raise ValueError("argument must be positive, got %s" % mp.nstr(x, 8))
    return x


def _as_order(nu):
    """Normalize the order: real orders become mpf so real paths stay real."""
    nu = mp.mpmathify(nu)
    if mp.im(nu) == 0:
        return mp.re(nu)
    return nu


def _check_not_negative_integer(nu, ctx):
    k, dist = _pole_distance(nu)
    if k <= -1 and dist < ctx.tolerance:
        raise IntegerOrderError(
            "series for I_nu hits gamma poles at negative integer order: nu = %s" % mp.nstr(mp.mpc(nu), 8)
        )


def _check_not_integer(nu, ctx):
    k, dist = _pole_distance(nu)
    if dist < ctx.tolerance:
        raise IntegerOrderError(
            "integer order to working tolerance: nu = %s" % mp.nstr(mp.mpc(nu), 8)
        )


# ---------------------------------------------------------------------------
# series cores (caller sets precision; tol is the relative stopping threshold)
# ---------------------------------------------------------------------------

def _i_series(nu, x, tol):
    half = x / 2
    term = half ** nu / mp.gamma(nu + 1)
    total = term
    scale = abs(term)
    base = half * half
    prev = scale
    hump = float(x) / 2
    for k in range(1, _MAX_TERMS):
        term = term * base / (k * (nu + k))
        total += term
        mag = abs(term)
        scale = max(scale, mag)
        if k > hump and mag <= prev and mag <= tol * scale:
            return total
        prev = mag
    raise RuntimeError("Bessel series failed to converge in %d terms" % _MAX_TERMS)


def _i_dx_series(nu, x, tol):
    # dI/dx = sum t_k (nu + 2k) / x with t_k the plain series terms
    half = x / 2
    term = half ** nu / mp.gamma(nu + 1)
    total = term * nu
    scale = abs(total) + abs(term)
    base = half * half
    prev = abs(term)
    hump = float(x) / 2
    for k in range(1, _MAX_TERMS):
        term = term * base / (k * (nu + k))
        contrib = term * (nu + 2 * k)
        total += contrib
        mag = abs(contrib)
        scale = max(scale, mag)
        if k > hump and mag <= prev and mag <= tol * scale:
            return total / x
        prev = mag
    raise RuntimeError("Bessel series failed to converge in %d terms" % _MAX_TERMS)


def _i_dnu_series(nu, x, tol):
    # termwise order-derivative: each term picks up log(x/2) - psi(nu+k+1)
    half = x / 2
    logx = mp.log(half)
    term = half ** nu / mp.gamma(nu + 1)
    psi = mp.digamma(nu + 1)
    total = term * (logx - psi)
    scale = abs(total)
    base = half * half
    prev = abs(total)
    hump = float(x) / 2
    for k in range(1, _MAX_TERMS):
        term = term * base / (k * (nu + k))
        psi = psi + 1 / (nu + k)
        contrib = term * (logx - psi)
        total += contrib
        mag = abs(contrib)
        scale = max(scale, mag)
        if k > hump and mag <= prev and mag <= tol * scale:
            return total
        prev = mag
    raise RuntimeError("Bessel series failed to converge in %d terms" % _MAX_TERMS)


def _k_cancellation_boost(nu, x):
    """Extra digits the csc combination for K needs at (nu, x)."""
    re = abs(float(mp.re(nu)))
    im = abs(float(mp.im(nu)))
    xf = float(x)
    logterm = abs(math.log(xf / 2)) if xf != 2 else 0.0
    return int(math.ceil(0.87 * xf + 1.37 * im + 0.44 * re * logterm)) + 10


def _k_core(nu, x, ctx, extra=0):
    """K by the csc combination, evaluated with a cancellation boost."""
    boost = _k_cancellation_boost(nu, x) + extra
    with ctx.workdps(boost):
        nu_w = mp.mpmathify(nu)
        x_w = mp.mpf(x)
        tol = mp.mpf(10) ** -(ctx.dps + boost - 5)
        csc = csc_pi(nu_w, ctx.with_working(ctx.working_digits + boost))
        diff = _i_series(-nu_w, x_w, tol) - _i_series(nu_w, x_w, tol)
        return mp.pi * csc * diff / 2


# ---------------------------------------------------------------------------
# public surface
# ---------------------------------------------------------------------------

def bessel_i(nu, x, ctx=None):
    """Modified Bessel function I_nu(x) for complex order.

    Parameters
    ----------
    nu : complex
        Order; must stay clear of negative integers, where the series'
        gamma factors hit poles.
    x : real
        Positive argument.
    ctx : PrecisionContext, optional

    Returns
    -------
    BigComplex (BigReal for real order)
    """
    ctx = ctx or PrecisionContext()
    with ctx.workdps(20):
        nu = _as_order(nu)
        x = _require_positive(x)
        _check_not_negative_integer(nu, ctx)
        flip = mp.im(nu) < 0
        if flip:
            nu = mp.conj(nu)
    with ctx.workdps(15):
        tol = mp.mpf(10) ** -ctx.dps
        val = _i_series(mp.mpmathify(nu), mp.mpf(x), tol)
    with ctx.workdps():
        val = +val
        return mp.conj(val) if flip else val


def bessel_i_dx(nu, x, ctx=None):
    """d/dx of I_nu(x), by the series differentiated term by term."""
    ctx = ctx or PrecisionContext()
    with ctx.workdps(20):
        nu = _as_order(nu)
        x = _require_positive(x)
        _check_not_negative_integer(nu, ctx)
        flip = mp.im(nu) < 0
        if flip:
            nu = mp.conj(nu)
    with ctx.workdps(15):
        tol = mp.mpf(10) ** -ctx.dps
        val = _i_dx_series(mp.mpmathify(nu), mp.mpf(x), tol)
    with ctx.workdps():
        val = +val
        return mp.conj(val) if flip else val


def bessel_i_dnu(nu, x, ctx=None):
    """Order-derivative dI/dnu at fixed argument.

    Each series term is multiplied by ``log(x/2) - psi(nu+k+1)``; the
    digamma values follow the recurrence ``psi(z+1) = psi(z) + 1/z`` so the
    whole sum costs one gamma and one digamma evaluation.
    """
    ctx = ctx or PrecisionContext()
    with ctx.workdps(20):
        nu = _as_order(nu)
        x = _require_positive(x)
        _check_not_negative_integer(nu, ctx)
        flip = mp.im(nu) < 0
        if flip:
            nu = mp.conj(nu)
    with ctx.workdps(15):
        tol = mp.mpf(10) ** -ctx.dps
        val = _i_dnu_series(mp.mpmathify(nu), mp.mpf(x), tol)
    with ctx.workdps():
        val = +val
        return mp.conj(val) if flip else val


def bessel_k(nu, x, ctx=None):
    """Modified Bessel function K_nu(x) from the csc combination.

    Defined for noninteger order; near-integer orders are handled by the
    precision-boosted csc path, and orders within working tolerance of an
    integer raise :class:`IntegerOrderError`.
    """
    ctx = ctx or PrecisionContext()
    with ctx.workdps(20):
        nu = _as_order(nu)
        x = _require_positive(x)
        _check_not_integer(nu, ctx)
        flip = mp.im(nu) < 0
        if flip:
            nu = mp.conj(nu)
    val = _k_core(nu, x, ctx)
    with ctx.workdps():
        val = +val
        return mp.conj(val) if flip else val


def bessel_k_dx(nu, x, ctx=None):
    """d/dx of K_nu(x): the csc combination of the differentiated series."""
    ctx = ctx or PrecisionContext()
    with ctx.workdps(20):
        nu = _as_order(nu)
        x = _require_positive(x)
        _check_not_integer(nu, ctx)
        flip = mp.im(nu) < 0
        if flip:
            nu = mp.conj(nu)
    boost = _k_cancellation_boost(nu, x)
    with ctx.workdps(boost):
        nu_w = mp.mpmathify(nu)
        x_w = mp.mpf(x)
        tol = mp.mpf(10) ** -(ctx.dps + boost - 5)
        csc = csc_pi(nu_w, ctx.with_working(ctx.working_digits + boost))
        diff = _i_dx_series(-nu_w, x_w, tol) - _i_dx_series(nu_w, x_w, tol)
        val = mp.pi * csc * diff / 2
    with ctx.workdps():
        val = +val
        return mp.conj(val) if flip else val


def bessel_k_dnu(nu, x, ctx=None):
    """Order-derivative dK/dnu, by the product rule on the csc combination.

    .. math::

        \\partial_\\nu K = -\\tfrac{\\pi^2}{2}\\cot(\\nu\\pi)\\csc(\\nu\\pi)
        [I_{-\\nu} - I_\\nu]
        - \\tfrac{\\pi}{2}\\csc(\\nu\\pi)[\\dot I_{-\\nu} + \\dot I_\\nu]

    with the dot denoting the order-derivative taken at the subscript.
    """
    ctx = ctx or PrecisionContext()
    with ctx.workdps(20):
        nu = _as_order(nu)
        x = _require_positive(x)
        _check_not_integer(nu, ctx)
        flip = mp.im(nu) < 0
        if flip:
            nu = mp.conj(nu)
    boost = _k_cancellation_boost(nu, x) + 10
    with ctx.workdps(boost):
        nu_w = mp.mpmathify(nu)
        x_w = mp.mpf(x)
        tol = mp.mpf(10) ** -(ctx.dps + boost - 5)
        csc = csc_pi(nu_w, ctx.with_working(ctx.working_digits + boost))
        cot = mp.cos(mp.pi * nu_w) * csc
        diff = _i_series(-nu_w, x_w, tol) - _i_series(nu_w, x_w, tol)
        dsum = _i_dnu_series(-nu_w, x_w, tol) + _i_dnu_series(nu_w, x_w, tol)
        val = -mp.pi * mp.pi * cot * csc * diff / 2 - mp.pi * csc * dsum / 2
    with ctx.workdps():
        val = +val
        return mp.conj(val) if flip else val


# ---------------------------------------------------------------------------
# asymptotic expansions
# ---------------------------------------------------------------------------

def _asymptotic_core(nu, s, terms, ctx, kind):
    with ctx.workdps(15):
        nu = _as_order(nu)
        s = mp.mpmathify(s)
        if s == 0:
            raise ValueError("argument must be nonzero")
        arg = mp.arg(s)
        if kind == "i":
            if not (-mp.pi / 2 < arg < mp.pi):
                raise OutOfSectorError("arg s = %s outside (-pi/2, pi)" % mp.nstr(arg, 8))
            prefactor = mp.exp(s) / mp.sqrt(2 * mp.pi * s)
            sign = -1
        else:
            if not (-mp.pi < arg < mp.pi):
                raise OutOfSectorError("arg s = %s outside (-pi, pi)" % mp.nstr(arg, 8))
            prefactor = mp.sqrt(mp.pi / (2 * s)) * mp.exp(-s)
            sign = 1
        four_nu2 = 4 * nu * nu
        eps = mp.mpf(10) ** -(ctx.dps + 5)
        # the expansion for I misses a second exponential of relative size
        # exp(-2s) (times exp(pi |Im nu|) for complex order); stopping well
        # above that level keeps the omitted-term estimate an honest bound
        # on the achievable accuracy
        if kind == "i":
            floor = 1000 * abs(mp.exp(-2 * s)) * mp.exp(mp.pi * abs(mp.im(nu)))
        else:
            floor = mp.mpf(0)

        term = mp.mpf(1) if mp.im(nu) == 0 and mp.im(s) == 0 else mp.mpc(1)
        total = term
        prev_mag = abs(term)
        retained = 1
        omitted = None
        k = 1
        while True:
            term = term * sign * (four_nu2 - (2 * k - 1) ** 2) / (8 * k * s)
            mag = abs(term)
            if terms is None:
                # keep going while terms still shrink and matter
                if mag == 0:
                    omitted = mp.mpf(0)
                    break
                if mag >= prev_mag or mag <= floor or k >= _MAX_TERMS:
                    omitted = mag
                    break
                total += term
                retained += 1
                if mag <= eps * abs(total):
                    term = term * sign * (four_nu2 - (2 * k + 1) ** 2) / (8 * (k + 1) * s)
                    omitted = abs(term)
                    break
            else:
                if retained >= terms:
                    omitted = mag
                    break
                total += term
                retained += 1
            prev_mag = mag
            k += 1
        value = prefactor * total
        error = abs(prefactor) * omitted
    with ctx.workdps():
        return AsymptoticResult(+value, +error)


def asymptotic_i(nu, s, terms=None, ctx=None):
    """Large-argument expansion of I_nu, valid for -pi/2 < arg s < pi.

    Parameters
    ----------
    nu : complex
        Order.
    s : complex
        Large argument.
    terms : int or None
        Number of retained bracket terms; None truncates at the smallest
        term.
    ctx : PrecisionContext, optional

    Returns
    -------
    AsymptoticResult
        ``value`` and ``error``, the magnitude of the first omitted term.
    """
    ctx = ctx or PrecisionContext()
    return _asymptotic_core(nu, s, terms, ctx, "i")


def asymptotic_k(nu, s, terms=None, ctx=None):
    """Large-argument expansion of K_nu, valid for -pi < arg s < pi."""
    ctx = ctx or PrecisionContext()
    return _asymptotic_core(nu, s, terms, ctx, "k")


# ---------------------------------------------------------------------------
# analytic continuation in the half-turn index m
# ---------------------------------------------------------------------------

def continue_i(nu, s, m, ctx=None):
    """I_nu evaluated after m half-turns: exp(m nu pi i) I_nu(s)."""
    ctx = ctx or PrecisionContext()
    m = int(m)
    if m == 0:
        return bessel_i(nu, s, ctx)
    with ctx.workdps(20):
        nu = _as_order(nu)
        s = _require_positive(s)
        _check_not_negative_integer(nu, ctx)
    extra = int(math.ceil(1.37 * abs(float(mp.im(nu))) * abs(m))) + 10
    with ctx.workdps(extra):
        nu_w = mp.mpmathify(nu)
        tol = mp.mpf(10) ** -(ctx.dps + extra - 5)
        phase = mp.exp(mp.mpc(0, m) * mp.pi * nu_w)
        val = phase * _i_series(nu_w, mp.mpf(s), tol)
    with ctx.workdps():
        return +val


def continue_k(nu, s, m, ctx=None):
    """K_nu after m half-turns.

    Implements ``exp(-m nu pi i) K_nu(s) - pi i sin(m nu pi) csc(nu pi)
    I_nu(s)``.  For m = +-1 the sine/cosecant ratio is exactly +-1 and is
    folded in without evaluating either factor.
    """
    ctx = ctx or PrecisionContext()
    m = int(m)
    if m == 0:
        return bessel_k(nu, s, ctx)
    with ctx.workdps(20):
        nu = _as_order(nu)
        s = _require_positive(s)
        _check_not_integer(nu, ctx)
    extra = int(math.ceil(1.37 * abs(float(mp.im(nu))) * (1 + abs(m)))) + 15
    with ctx.workdps(extra):
        nu_w = mp.mpmathify(nu)
        s_w = mp.mpf(s)
        tol = mp.mpf(10) ** -(ctx.dps + extra - 5)
        k_val = _k_core(nu_w, s_w, ctx, extra=extra)
        i_val = _i_series(nu_w, s_w, tol)
        phase = mp.exp(mp.mpc(0, -m) * mp.pi * nu_w)
        if abs(m) == 1:
            ratio = m
        else:
            boosted = ctx.with_working(ctx.working_digits + extra)
            ratio = mp.sin(m * mp.pi * nu_w) * csc_pi(nu_w, boosted)
        val = phase * k_val - mp.mpc(0, 1) * mp.pi * ratio * i_val
    with ctx.workdps():
        return +val
