"""Exact spectra of the radial Schrodinger problem with an exponential potential.

For a potential ``lam * exp(-r)`` (barrier orientation) the physical solution
is ``I_mu(2*sqrt(lam)*exp(-r/2))`` up to normalization, and the spectrum is
fixed by zeros in the order parameter:

.. math::

    I_\\mu(2\\sqrt{\\lambda}) = 0.

Real negative roots are virtual states; complex roots come in conjugate pairs
and describe resonances.  The well orientation ``lam * exp(+r)`` instead
requires the recessive solution along a rotated ray, which brings in the
continuation branch index ``m``:

.. math::

    e^{-m\\nu\\pi i} K_\\nu(s) - \\pi i \\,
    \\frac{\\sin(m\\nu\\pi)}{\\sin(\\nu\\pi)} I_\\nu(s) = 0,
    \\qquad s = 2\\sqrt{\\lambda},

whose ``m = 0`` specialization ``K_\\nu(s) = 0`` has purely imaginary roots
``nu = i t`` giving the bound states ``E = t^2 / 4``.  Multiplying the
condition by ``e^{m\\nu\\pi i}`` and expressing ``K`` through ``I_{\\pm\\nu}``
yields the equivalent form

.. math::

    \\frac{\\pi}{2\\sin(\\nu\\pi)}
    \\left(e^{-m\\nu\\pi i} I_{-\\nu}(s) - e^{m\\nu\\pi i} I_\\nu(s)\\right) = 0,

which is manifestly symmetric under ``nu -> -nu``.  Each solver here seeds
damped Newton iterations from the limiting configurations (orders just below
negative integers for weak coupling, near the rationals ``k/m`` for the
second family of well roots, and along the imaginary order axis for bound
states), continues them to the requested ``lam``, and certifies every
returned root by the magnitude of its defining condition.

Energies follow the order parameter through ``E = -nu**2 / 4`` throughout.
"""

import dataclasses
import math
import warnings

import mpmath as mp

from .bessel import bessel_i, bessel_i_dnu, bessel_k, bessel_k_dnu
from .mpcore import (
    BigComplex,
    BigReal,
    IntegerOrderError,
    PoleError,
    PrecisionContext,
    csc_pi,
)

__all__ = [
    "SpectralRoot",
    "ComparisonRecord",
    "NoConvergenceError",
    "ContinuationBreakError",
    "IntegerProximityWarning",
    "energy_from_order",
    "is_near_integer",
    "barrier_roots",
    "bound_states",
    "well_resonances",
    "well_root_near",
    "well_condition",
    "condition_residual",
    "difference_estimate",
    "match_nearest",
    "branch_index",
    "sweep",
]


class NoConvergenceError(RuntimeError):
    """Newton iteration failed for a root the seeding strategy promised.

    The ``partial`` attribute carries whatever was certified before the
    failure, so callers can salvage an incomplete spectrum.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = list(partial) if partial is not None else []


class ContinuationBreakError(RuntimeError):
    """Nearest-neighbor chaining became ambiguous during a parameter sweep."""


class IntegerProximityWarning(UserWarning):
    """A converged order sits within 1e-8 of an integer.

    The quantization condition contains ``csc(pi * nu)``, so results this
    close to the singular points deserve a second look at higher precision.
    """


@dataclasses.dataclass(frozen=True)
class SpectralRoot:
    """One certified root of a spectral condition.

    Parameters
    ----------
    lam : BigReal
        Potential strength, positive.
    kind : str
        ``"barrier"``, ``"bound"``, or ``"well"``.
    m : int
        Continuation branch index; 0 for barrier and bound roots.
    n : int
        Label in order of increasing ``abs(order)`` (-1 for targeted solves
        whose rank within the full spectrum is unknown).
    order : BigComplex
        The order-parameter root.
    energy : BigComplex
        ``-order**2 / 4`` evaluated at the owning context's precision.
    coalesced : bool
        True when the root was first seen as a complex pair born from two
        real roots merging during continuation.
    """

    lam: BigReal
    kind: str
    m: int
    n: int
    order: BigComplex
    energy: BigComplex
    coalesced: bool = False


@dataclasses.dataclass(frozen=True)
class ComparisonRecord:
    """Pairing of a well root with the barrier root it shadows.

    Distances are reported as decimal decades (``-log10`` of the absolute
    difference) in the order parameter and in the energy.
    """

    lam: BigReal
    n: int
    m: int
    nu_star: BigComplex
    mu: BigComplex
    log_diff_order: BigReal
    log_diff_energy: BigReal


# Scouting precision used for root continuation; final roots are always
# re-polished at the caller's context.
_SCOUT = PrecisionContext(working_digits=30, guard_digits=10)

_MAX_NEWTON = 80
_MAX_HALVINGS = 12

# Continuation tracks this many root chains; chain k starts near -k once
# lam is large enough that the root has pulled measurably away from the
# integer (see _join_coupling).
_NCHAINS = 24


def _resolve(ctx):
    return ctx if ctx is not None else PrecisionContext()


def _step_tolerance(ctx):
    with ctx.workdps():
        return mp.mpf(10) ** (-ctx.working_digits)


def _residual_tolerance(ctx):
    with ctx.workdps():
        return mp.mpf(10) ** (6 - ctx.working_digits)


def energy_from_order(order, ctx=None):
    """Energy attached to an order-parameter value, ``-order**2 / 4``.

    Parameters
    ----------
    order : complex-like
    ctx : PrecisionContext, optional

    Returns
    -------
    BigComplex, or BigReal when the result is purely real
    """
    ctx = _resolve(ctx)
    with ctx.workdps():
        order = mp.mpc(order)
        value = -(order * order) / 4
        if value.imag == 0:
            return value.real
        return value


def is_near_integer(nu, tol=None):
    """True when ``nu`` lies within ``tol`` (default 1e-8) of an integer."""
    with mp.workdps(40):
        nu = mp.mpc(nu)
        if tol is None:
            tol = mp.mpf("1e-8")
        k = mp.nint(nu.real)
        return bool(abs(nu - k) < tol)


def _make_root(lam, kind, m, n, order, ctx, coalesced=False):
    with ctx.workdps():
        order = mp.mpc(order)
        energy = -(order * order) / 4
    return SpectralRoot(
        lam=lam, kind=kind, m=m, n=n, order=order, energy=energy,
        coalesced=coalesced,
    )


def _conjugate_root(root, m, ctx):
    with ctx.workdps():
        order = mp.conj(root.order)
        energy = mp.conj(root.energy)
    return dataclasses.replace(root, m=m, order=order, energy=energy)


# ---------------------------------------------------------------------------
# Newton engine
# ---------------------------------------------------------------------------


def _newton(fdf, seed, ctx, real_line=False):
    """Damped Newton iteration; returns the root or None.

    A step is halved while it increases the residual.  Convergence requires
    both a small final step and a residual below the certification
    threshold; if the step criterion starves (multiple roots converge only
    linearly) a certified residual alone is accepted at the iteration cap.
    """
    step_tol = _step_tolerance(ctx)
    residual_tol = _residual_tolerance(ctx)
    with ctx.workdps():
        if real_line:
            z = mp.mpf(seed)
        else:
            z = mp.mpc(seed)

        def evaluate(point):
            f, df = fdf(point)
            if real_line:
                f, df = mp.re(f), mp.re(df)
            return f, df

        try:
            f, df = evaluate(z)
        except (IntegerOrderError, PoleError, ValueError):
            return None
        fmag = abs(f)
        moved = mp.inf
        for _ in range(_MAX_NEWTON):
            if fmag == 0:
                return z
            if df == 0 or not mp.isfinite(df):
                return None
            step = f / df
            cand = None
            for _ in range(_MAX_HALVINGS):
                trial = z - step
                try:
                    ft, dft = evaluate(trial)
                except (IntegerOrderError, PoleError, ValueError):
                    step = step / 2
                    continue
                if abs(ft) <= fmag or abs(step) < step_tol:
                    cand = (trial, ft, dft)
                    break
                step = step / 2
            if cand is None:
                return None
            moved = abs(step)
            z, f, df = cand
            fmag = abs(f)
            if abs(z) > mp.mpf(10) ** 9:
                return None
            if moved < step_tol and fmag < residual_tol:
                return z
        # a stalled step with a certified residual is a multiple root; a
        # large step with a tiny residual is a drift into a decaying tail
        return z if fmag < residual_tol and moved < mp.mpf("1e-3") else None


# ---------------------------------------------------------------------------
# Defining conditions and their order-derivatives
# ---------------------------------------------------------------------------


def _barrier_fdf(lam, ctx):
    with ctx.workdps():
        s = 2 * mp.sqrt(mp.mpf(lam))

    def fdf(mu):
        return bessel_i(mu, s, ctx), bessel_i_dnu(mu, s, ctx)

    return fdf


def _bound_fdf(lam, ctx):
    with ctx.workdps():
        s = 2 * mp.sqrt(mp.mpf(lam))

    def fdf(t):
        nu = mp.mpc(0, t)
        kval = bessel_k(nu, s, ctx)
        kdot = bessel_k_dnu(nu, s, ctx)
        # K is real for purely imaginary order and its order-derivative
        # purely imaginary, so the root walk stays on the real t line.
        return kval.real, (mp.mpc(0, 1) * kdot).real

    return fdf


def _well_fdf(lam, m, ctx):
    """Value and order-derivative of the branch-m quantization condition."""
    if m < 1:
        raise ValueError("internal well solves run at positive m")
    with ctx.workdps():
        s = 2 * mp.sqrt(mp.mpf(lam))

    def fdf(nu):
        kval = bessel_k(nu, s, ctx)
        kdot = bessel_k_dnu(nu, s, ctx)
        ival = bessel_i(nu, s, ctx)
        idot = bessel_i_dnu(nu, s, ctx)
        csc = None if m == 1 else csc_pi(nu, ctx)
        with ctx.workdps(15):
            nu_w = mp.mpc(nu)
            phase = mp.e ** (-mp.mpc(0, 1) * m * nu_w * mp.pi)
            if m == 1:
                # sin(m pi nu) csc(pi nu) is identically 1 here
                trig = mp.mpf(1)
                trig_d = mp.mpf(0)
            else:
                trig = mp.sin(m * mp.pi * nu_w) * csc
                cot = mp.cos(mp.pi * nu_w) * csc
                trig_d = (
                    m * mp.pi * mp.cos(m * mp.pi * nu_w) * csc
                    - mp.pi * trig * cot
                )
            i_pi = mp.mpc(0, 1) * mp.pi
            value = phase * kval - i_pi * trig * ival
            deriv = (
                phase * (kdot - mp.mpc(0, 1) * m * mp.pi * kval)
                - i_pi * (trig_d * ival + trig * idot)
            )
        with ctx.workdps():
            return +value, +deriv

    return fdf


def well_condition(nu, lam, m, ctx=None, form="continued"):
    """Evaluate the branch-m well quantization condition at ``nu``.

    Parameters
    ----------
    nu : complex-like
    lam : real-like, positive
    m : nonzero integer
    ctx : PrecisionContext, optional
    form : str
        ``"continued"`` evaluates ``exp(-m nu pi i) K_nu - pi i
        sin(m nu pi) / sin(nu pi) I_nu``; ``"csc"`` evaluates the equivalent
        ``pi/2 / sin(nu pi) (exp(-m nu pi i) I_{-nu} - exp(m nu pi i) I_nu)``.

    Returns
    -------
    BigComplex
    """
    ctx = _resolve(ctx)
    if form not in ("continued", "csc"):
        raise ValueError("form must be 'continued' or 'csc'")
    if int(m) != m or m == 0:
        raise ValueError("branch index m must be a nonzero integer")
    m = int(m)
    lam = ctx.real(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    with ctx.workdps():
        s = 2 * mp.sqrt(lam)
        nu = mp.mpc(nu)
    if form == "continued":
        kval = bessel_k(nu, s, ctx)
        ival = bessel_i(nu, s, ctx)
        factor = mp.mpf(m) if abs(m) == 1 else None
        with ctx.workdps(15):
            nu_w = mp.mpc(nu)
            phase = mp.e ** (-mp.mpc(0, 1) * m * nu_w * mp.pi)
            if factor is None:
                factor = mp.sin(m * mp.pi * nu_w) * csc_pi(nu, ctx)
            value = phase * kval - mp.mpc(0, 1) * mp.pi * factor * ival
    else:
        ival = bessel_i(nu, s, ctx)
        with ctx.workdps():
            neg = -nu
        ineg = bessel_i(neg, s, ctx)
        with ctx.workdps(15):
            nu_w = mp.mpc(nu)
            csc = csc_pi(nu, ctx)
            phase = mp.e ** (-mp.mpc(0, 1) * m * nu_w * mp.pi)
            value = mp.pi / 2 * csc * (phase * ineg - ival / phase)
    with ctx.workdps():
        return +value


def condition_residual(root, ctx=None):
    """Magnitude of the defining condition at a root (certification value)."""
    ctx = _resolve(ctx)
    with ctx.workdps():
        s = 2 * mp.sqrt(mp.mpf(root.lam))
    if root.kind == "barrier":
        value = bessel_i(root.order, s, ctx)
    elif root.kind == "bound":
        value = bessel_k(root.order, s, ctx)
    elif root.kind == "well":
        value = well_condition(root.order, root.lam, root.m, ctx)
    else:
        raise ValueError("unknown root kind %r" % (root.kind,))
    with ctx.workdps():
        return abs(value)


# ---------------------------------------------------------------------------
# Barrier roots: continuation from the weak-coupling limit
# ---------------------------------------------------------------------------

# Snapshots of the continuation state, keyed by (start key, target keys).
_CHAIN_CACHE = {}


class _StepFailed(Exception):
    pass


def _chain_key(value):
    with mp.workdps(45):
        return mp.nstr(mp.mpf(value), 35)


def _join_coupling(k):
    """Smallest lam at which root chain k is tracked.

    The virtual root near -k sits at distance about ``lam**k / (k! (k-1)!)``
    from the integer; the chain joins once that distance clears 1e-12, far
    above the gamma-pole guard of the Bessel layer.
    """
    log_lam = (-12 * math.log(10) + math.lgamma(k + 1) + math.lgamma(k)) / k
    return math.exp(log_lam)


def _real_chain_newton(lam, seed, ctx):
    fdf = _barrier_fdf(lam, ctx)
    root = _newton(fdf, seed, ctx, real_line=True)
    if root is not None and root >= mp.mpf("-0.5"):
        # virtual roots live below -1; the condition is strictly positive
        # for nonnegative real order, so this is a tail drift after a merge
        return None
    return root


def _complex_chain_newton(lam, seed, ctx):
    fdf = _barrier_fdf(lam, ctx)
    root = _newton(fdf, seed, ctx)
    if root is None:
        return None
    with ctx.workdps():
        if root.imag > 0:
            root = mp.conj(root)
        return root


def _merge_seed(pos_a, pos_b, ctx):
    with ctx.workdps():
        mid = (mp.mpc(pos_a) + mp.mpc(pos_b)) / 2
        gap = abs(mp.mpc(pos_a) - mp.mpc(pos_b))
        return mp.mpc(mid.real, mid.imag - max(gap, mp.mpf("0.05")))


def _jumped_basin(old, new, ctx):
    """A continuation step that moved this far has left its root's track."""
    with ctx.workdps():
        cap = min(mp.mpf("1.5"), mp.mpf("0.35") * (1 + abs(mp.mpc(old))))
        return abs(mp.mpc(new) - mp.mpc(old)) > cap


def _lost_to_real_axis(root, ctx):
    """A merged-pair track can never sit on the real axis again."""
    with ctx.workdps():
        return abs(mp.mpc(root).imag) < mp.mpf("1e-6")


def _advance_chains(chains, lam_prev, lam, ctx):
    """Move every chain to the new lam; pair up merging real roots.

    Each chain is advanced predictor-corrector style: the new position is
    extrapolated linearly in log(lam) from the last step's velocity, then
    corrected by Newton.  Roots travel a sizable fraction of their spacing
    per step at large lam, so correcting from the raw old position would
    hop between tracks.
    """
    with ctx.workdps():
        dln = mp.log(mp.mpf(lam)) - mp.log(mp.mpf(lam_prev))
    moved = []
    failed = []
    for chain in chains:
        with ctx.workdps():
            if chain.get("vel") is not None:
                pred = chain["pos"] + chain["vel"] * dln
            else:
                pred = chain["pos"]
        if chain["real"]:
            root = _real_chain_newton(lam, pred, ctx)
            if root is not None:
                with ctx.workdps():
                    # real virtual roots sit about one unit apart
                    if abs(root - pred) > mp.mpf("0.5"):
                        root = None
        else:
            root = _complex_chain_newton(lam, pred, ctx)
            if (
                root is None
                or _jumped_basin(pred, root, ctx)
                or _lost_to_real_axis(root, ctx)
            ):
                raise _StepFailed("complex chain lost")
        if root is None:
            failed.append(chain)
        else:
            with ctx.workdps():
                vel = (root - chain["pos"]) / dln
            moved.append(dict(chain, pos=root, vel=vel))

    # A real chain whose root vanished has merged with a neighbor into a
    # complex pair; pair it with the nearest real chain, failed or not.
    while failed:
        chain = failed.pop()
        partner = None
        partner_failed = False
        best = None
        with ctx.workdps():
            here = mp.mpf(chain["pos"])
            for c in moved:
                if not c["real"]:
                    continue
                d = abs(mp.mpf(c["pos"]) - here)
                if best is None or d < best:
                    best, partner, partner_failed = d, c, False
            for c in failed:
                d = abs(mp.mpf(c["pos"]) - here)
                if best is None or d < best:
                    best, partner, partner_failed = d, c, True
        if partner is None:
            raise _StepFailed("real chain lost with no merge partner")
        seed = _merge_seed(chain["pos"], partner["pos"], ctx)
        root = _complex_chain_newton(lam, seed, ctx)
        if (
            root is None
            or _jumped_basin(seed, root, ctx)
            or _lost_to_real_axis(root, ctx)
        ):
            raise _StepFailed("merge rescue failed")
        if partner_failed:
            failed.remove(partner)
        else:
            moved.remove(partner)
        moved.append({
            "origin": min(chain["origin"], partner["origin"]),
            "real": False,
            "pos": root,
            "vel": None,
            "pending": True,
        })

    # Two real chains landing on top of each other signal a pair about to
    # coalesce: replace both by the complex root below the axis.
    merged = []
    consumed = [False] * len(moved)
    moved.sort(key=lambda c: c["origin"])
    for i, a in enumerate(moved):
        if consumed[i]:
            continue
        partner = None
        if a["real"]:
            for j in range(i + 1, len(moved)):
                b = moved[j]
                if consumed[j] or not b["real"]:
                    continue
                with ctx.workdps():
                    collide = abs(mp.mpf(a["pos"]) - mp.mpf(b["pos"])) < (
                        mp.mpf("1e-3") * (1 + abs(mp.mpf(a["pos"])))
                    )
                if collide:
                    partner = j
                    break
        if partner is None:
            consumed[i] = True
            merged.append(a)
            continue
        consumed[i] = consumed[partner] = True
        seed = _merge_seed(a["pos"], moved[partner]["pos"], ctx)
        root = _complex_chain_newton(lam, seed, ctx)
        if (
            root is None
            or _jumped_basin(seed, root, ctx)
            or _lost_to_real_axis(root, ctx)
        ):
            raise _StepFailed("collision rescue failed")
        merged.append({
            "origin": min(a["origin"], moved[partner]["origin"]),
            "real": False,
            "pos": root,
            "vel": None,
            "pending": True,
        })
    merged.sort(key=lambda c: c["origin"])
    return merged


def _advance_with_backtrack(chains, lam_prev, lam_new, ctx, depth=0):
    try:
        return _advance_chains(chains, lam_prev, lam_new, ctx)
    except _StepFailed:
        if depth >= 6:
            raise
        with ctx.workdps():
            lam_mid = mp.sqrt(lam_prev * lam_new)
        half = _advance_with_backtrack(chains, lam_prev, lam_mid, ctx, depth + 1)
        return _advance_with_backtrack(half, lam_mid, lam_new, ctx, depth + 1)


def _advance_salvage(chains, lam_prev, lam_new, ctx):
    """Advance chains individually after a joint step failed.

    Single chains that fail alone are retried as a group so that merging
    real pairs can still find each other; whatever fails after that is
    dropped and reported as lost rather than poisoning every other track.
    """
    ok = []
    failed = []
    for chain in chains:
        try:
            ok.extend(_advance_with_backtrack([chain], lam_prev, lam_new, ctx))
        except _StepFailed:
            failed.append(chain)
    lost = set()
    if failed:
        try:
            ok.extend(_advance_with_backtrack(failed, lam_prev, lam_new, ctx))
        except _StepFailed:
            lost = {c["origin"] for c in failed}
    ok.sort(key=lambda c: c["origin"])
    return ok, lost


def _join_chains(chains, lam, ctx, next_origin):
    """Start tracking chains whose join coupling has been reached."""
    while next_origin <= _NCHAINS and _join_coupling(next_origin) <= float(lam):
        with ctx.workdps():
            seed = mp.mpf(-next_origin) - mp.mpf("0.02")
        root = _real_chain_newton(lam, seed, ctx)
        if root is None:
            raise NoConvergenceError(
                "no virtual root near -%d at lam=%s"
                % (next_origin, mp.nstr(mp.mpf(lam), 8))
            )
        chains.append({
            "origin": next_origin, "real": True, "pos": root, "vel": None,
            "pending": False,
        })
        next_origin += 1
    return next_origin


def _take_snapshot(chains):
    snapshot = [
        {
            "origin": c["origin"],
            "real": c["real"],
            "pos": c["pos"],
            "coalesced": c["pending"],
        }
        for c in chains
    ]
    for c in chains:
        c["pending"] = False
    return snapshot


def _chain_states(lam, stops=None):
    """Continuation snapshots at lam and at any intermediate stops.

    Runs at scouting precision.  Returns a dict mapping each target's key
    (see _chain_key) to ``{"chains": [...], "lost": frozenset}``: chain
    records ordered by origin (complex records hold the lower-half-plane
    member of the conjugate pair) plus the origins of any tracks dropped
    along the way.  A record is flagged coalesced at the first target at
    or after the merge that created it.
    """
    ctx = _SCOUT
    lam = ctx.real(lam)
    targets = [lam]
    for stop in stops or []:
        targets.append(ctx.real(stop))
    targets = sorted(set(targets))
    with ctx.workdps():
        lam0 = min(mp.mpf("0.01"), targets[0])
    key = (_chain_key(lam0), tuple(_chain_key(t) for t in targets))
    if key in _CHAIN_CACHE:
        return _CHAIN_CACHE[key]
    with ctx.workdps():
        ratio = mp.mpf("1.35")
        grid = []
        cur = lam0
        top = targets[-1]
        while cur < top:
            cur = cur * ratio
            grid.append(min(cur, top))
        points = sorted(set(grid) | set(t for t in targets if t > lam0))
    chains = []
    next_origin = _join_chains(chains, lam0, ctx, 1)
    snapshots = {}
    lost = set()
    if lam0 in targets:
        snapshots[_chain_key(lam0)] = {
            "chains": _take_snapshot(chains),
            "lost": frozenset(lost),
        }
    prev = lam0
    for point in points:
        try:
            chains = _advance_with_backtrack(chains, prev, point, ctx)
        except _StepFailed:
            chains, newly_lost = _advance_salvage(chains, prev, point, ctx)
            lost |= newly_lost
        next_origin = _join_chains(chains, point, ctx, next_origin)
        if point in targets:
            snapshots[_chain_key(point)] = {
                "chains": _take_snapshot(chains),
                "lost": frozenset(lost),
            }
        prev = point
    _CHAIN_CACHE[key] = snapshots
    return snapshots


def _polish_barrier_root(record, lam, ctx):
    fdf = _barrier_fdf(lam, ctx)
    if record["real"]:
        with ctx.workdps():
            seed = mp.mpf(record["pos"])
        root = _newton(fdf, seed, ctx, real_line=True)
        if root is None:
            return None
        with ctx.workdps():
            return mp.mpc(root, 0)
    with ctx.workdps():
        seed = mp.mpc(record["pos"])
    root = _newton(fdf, seed, ctx)
    if root is None:
        return None
    with ctx.workdps():
        if root.imag > 0:
            root = mp.conj(root)
        return root


def _barrier_root_set(lam, count, ctx, snap=None):
    """Polished (order, coalesced) pairs for the first count root families.

    Families are ordered as their continuation chains were born, i.e. by
    the integer the underlying pair of real roots started from, which is
    not always the same as ordering by modulus.
    """
    if snap is None:
        snap = _chain_states(lam)[_chain_key(_SCOUT.real(lam))]
    records = snap["chains"][: count + 2]
    polished = []
    for record in records:
        root = _polish_barrier_root(record, lam, ctx)
        if root is None:
            raise NoConvergenceError(
                "barrier root polish failed near %s"
                % mp.nstr(mp.mpc(record["pos"]), 8),
                partial=[r for r, _ in polished],
            )
        polished.append((root, record["coalesced"], record["origin"]))
    # Distinct spectral roots never sit this close; anything closer is the
    # same root found twice (a genuinely double root counts once).
    dedup = []
    for root, flag, origin in polished:
        duplicate = False
        for seen, _, _ in dedup:
            with ctx.workdps():
                if abs(root - seen) < mp.mpf("1e-6") * (1 + abs(root)):
                    duplicate = True
                    break
        if not duplicate:
            dedup.append((root, flag, origin))
    if len(dedup) < count:
        raise NoConvergenceError(
            "only %d distinct barrier roots tracked (%d requested)"
            % (len(dedup), count),
            partial=[r for r, _, _ in dedup],
        )
    selected = dedup[:count]
    if snap["lost"] and min(snap["lost"]) < selected[-1][2]:
        raise NoConvergenceError(
            "a root family below index %d was lost during continuation, so "
            "labels this deep are unreliable" % count,
            partial=[r for r, _, _ in selected],
        )
    return [(root, flag) for root, flag, _ in selected]


def barrier_roots(lam, count, ctx=None):
    """First ``count`` roots of the barrier condition, in family order.

    Root families are numbered by continuation from small coupling, where
    the n-th family is the pair of real roots born near ``-(2n+1)`` and
    ``-(2n+2)`` that later merges into one complex-conjugate pair.  Family
    order agrees with modulus order at small coupling but can differ once
    the families have moved far into the complex plane.

    Parameters
    ----------
    lam : real-like, positive
    count : int
        How many roots to return; a complex root counts once, with its
        conjugate partner implied.
    ctx : PrecisionContext, optional

    Returns
    -------
    list of SpectralRoot
        Complex orders carry Im < 0; virtual states have Im == 0.
    """
    ctx = _resolve(ctx)
    if int(count) != count or count < 1:
        raise ValueError("count must be a positive integer")
    count = int(count)
    lam = ctx.real(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    selected = _barrier_root_set(lam, count, ctx)
    roots = []
    residual_tol = _residual_tolerance(ctx)
    for n, (order, flag) in enumerate(selected):
        root = _make_root(lam, "barrier", 0, n, order, ctx, coalesced=flag)
        if condition_residual(root, ctx) >= residual_tol:
            raise NoConvergenceError(
                "residual certification failed for barrier root %d" % n,
                partial=roots,
            )
        roots.append(root)
    return roots


# ---------------------------------------------------------------------------
# Bound states: sign-change walk along the imaginary order axis
# ---------------------------------------------------------------------------


def bound_states(lam, count, ctx=None):
    """First ``count`` bound states, orders ``i t`` with increasing ``t``.

    The recessive-solution condition is real for purely imaginary orders,
    so roots are bracketed by a sign-change walk in ``t``, tightened by
    bisection, and polished with a real Newton iteration.  Energies are
    ``t**2 / 4``, real and positive.
    """
    ctx = _resolve(ctx)
    if int(count) != count or count < 1:
        raise ValueError("count must be a positive integer")
    count = int(count)
    lam = ctx.real(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    fdf = _bound_fdf(lam, ctx)
    roots = []
    residual_tol = _residual_tolerance(ctx)
    with ctx.workdps():
        s = 2 * mp.sqrt(lam)
        t = mp.mpf("0.05")
        t_cap = mp.mpf(2000)
        g_prev = fdf(t)[0]
        while len(roots) < count:
            if t > t_cap:
                raise NoConvergenceError(
                    "bound-state walk exceeded t=%s" % mp.nstr(t_cap, 4),
                    partial=roots,
                )
            # consecutive roots are pi / log(2 t / s) apart at large t, so
            # half that spacing can never step over a sign change
            growth = mp.log(2 * (t + 1) / s)
            step = min(mp.mpf("0.4"), mp.pi / (2 * max(mp.mpf("0.7"), growth)))
            t_next = t + step
            g_next = fdf(t_next)[0]
            if g_prev != 0 and mp.sign(g_prev) == mp.sign(g_next):
                t, g_prev = t_next, g_next
                continue
            lo, hi, g_lo = t, t_next, g_prev
            for _ in range(12):
                mid = (lo + hi) / 2
                g_mid = fdf(mid)[0]
                if g_mid == 0:
                    lo = hi = mid
                    break
                if mp.sign(g_mid) == mp.sign(g_lo):
                    lo, g_lo = mid, g_mid
                else:
                    hi = mid
            root_t = _newton(fdf, (lo + hi) / 2, ctx, real_line=True)
            if root_t is None or not (t - step <= root_t <= t_next + step):
                raise NoConvergenceError(
                    "bound-state polish failed near t=%s" % mp.nstr(t, 8),
                    partial=roots,
                )
            order = mp.mpc(0, root_t)
            root = _make_root(lam, "bound", 0, len(roots), order, ctx)
            if condition_residual(root, ctx) >= residual_tol:
                raise NoConvergenceError(
                    "residual certification failed for bound state %d"
                    % len(roots),
                    partial=roots,
                )
            roots.append(root)
            t, g_prev = t_next, g_next
    return roots


# ---------------------------------------------------------------------------
# Well resonances
# ---------------------------------------------------------------------------


def _warn_if_near_integer(order):
    if is_near_integer(order):
        with mp.workdps(30):
            text = mp.nstr(mp.mpc(order), 12)
        warnings.warn(
            "well order %s lies within 1e-8 of an integer, where the "
            "csc factor of the quantization condition is nearly singular"
            % text,
            IntegerProximityWarning,
            stacklevel=3,
        )


def _solve_well(seed, lam, m, ctx):
    fdf = _well_fdf(lam, m, ctx)
    root = _newton(fdf, seed, ctx)
    if root is not None:
        _warn_if_near_integer(root)
    return root


def _well_seeds(lam, m, count, ctx):
    """Newton seeds: continued barrier roots plus rationals k/m."""
    records = _chain_states(lam)[_chain_key(_SCOUT.real(lam))]["chains"]
    seeds = []
    for record in records[: count + 2]:
        with ctx.workdps():
            seeds.append(mp.mpc(record["pos"]))
    if not seeds:
        raise NoConvergenceError("no continued roots available for seeding")
    with ctx.workdps():
        cutoff = max(abs(seed) for seed in seeds) + 1
    if m >= 2:
        k = 1
        while True:
            with ctx.workdps():
                base = mp.mpf(k) / m
                stop = base > cutoff
                if not stop and k % m != 0:
                    seeds.append(mp.mpc(base, mp.mpf("-0.01")))
            if stop:
                break
            k += 1
    return seeds


def _dedup_orders(orders, ctx):
    """Collapse duplicates, treating nu and -nu as the same root."""
    kept = []
    for nu in orders:
        duplicate = False
        for seen in kept:
            with ctx.workdps():
                scale = mp.mpf("1e-6") * (1 + abs(nu))
                if abs(nu - seen) < scale or abs(nu + seen) < scale:
                    duplicate = True
                    break
        if not duplicate:
            kept.append(nu)
    return kept


def well_resonances(lam, m, count, ctx=None):
    """First ``count`` branch-m well resonances ordered by modulus.

    Both root families are returned: roots shadowing the barrier spectrum
    and, for ``abs(m) >= 2``, roots near the rationals ``k/m`` (k not a
    multiple of m).  Negative branches are computed from the positive
    branch by conjugation.
    """
    ctx = _resolve(ctx)
    if int(m) != m or m == 0:
        raise ValueError("branch index m must be a nonzero integer")
    m = int(m)
    if int(count) != count or count < 1:
        raise ValueError("count must be a positive integer")
    count = int(count)
    lam = ctx.real(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    if m < 0:
        return [
            _conjugate_root(root, m, ctx)
            for root in well_resonances(lam, -m, count, ctx)
        ]
    candidates = []
    for seed in _well_seeds(lam, m, count, ctx):
        root = _solve_well(seed, lam, m, ctx)
        if root is None:
            raise NoConvergenceError(
                "well solve failed from seed %s at lam=%s, m=%d"
                % (mp.nstr(mp.mpc(seed), 8), mp.nstr(mp.mpf(lam), 8), m),
                partial=candidates,
            )
        candidates.append(root)
    candidates = _dedup_orders(candidates, ctx)
    with ctx.workdps():
        candidates.sort(key=lambda nu: abs(nu))
    if len(candidates) < count:
        raise NoConvergenceError(
            "only %d distinct well roots found (%d requested)"
            % (len(candidates), count),
            partial=candidates,
        )
    roots = []
    residual_tol = _residual_tolerance(ctx)
    for n, order in enumerate(candidates[:count]):
        root = _make_root(lam, "well", m, n, order, ctx)
        if condition_residual(root, ctx) >= residual_tol:
            raise NoConvergenceError(
                "residual certification failed for well root %d" % n,
                partial=roots,
            )
        roots.append(root)
    return roots


def well_root_near(lam, m, seed, ctx=None):
    """Solve the branch-m condition from one seed; the label ``n`` is -1.

    Useful when a specific root (for example the one shadowing a barrier
    resonance) is wanted without ranking the whole spectrum.
    """
    ctx = _resolve(ctx)
    if int(m) != m or m == 0:
        raise ValueError("branch index m must be a nonzero integer")
    m = int(m)
    lam = ctx.real(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    if m < 0:
        with ctx.workdps():
            mirror = mp.conj(mp.mpc(seed))
        return _conjugate_root(well_root_near(lam, -m, mirror, ctx), m, ctx)
    order = _solve_well(seed, lam, m, ctx)
    if order is None:
        raise NoConvergenceError(
            "well solve failed from seed %s" % mp.nstr(mp.mpc(seed), 8)
        )
    root = _make_root(lam, "well", m, -1, order, ctx)
    if condition_residual(root, ctx) >= _residual_tolerance(ctx):
        raise NoConvergenceError(
            "residual certification failed for the targeted root"
        )
    return root


# ---------------------------------------------------------------------------
# Comparison helpers
# ---------------------------------------------------------------------------


def difference_estimate(mu, lam, m, ctx=None):
    """Leading-order estimate of ``nu_star - mu`` for the branch-m well root.

    Evaluates ``i K_mu(s) / (pi dI/dnu) * exp(-i mu pi (2m - 1))`` at
    ``s = 2 sqrt(lam)``: the linearization of the well quantization
    condition around a barrier root ``mu``.
    """
    ctx = _resolve(ctx)
    if int(m) != m or m < 1:
        raise ValueError("branch index m must be a positive integer")
    m = int(m)
    lam = ctx.real(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    with ctx.workdps():
        mu = mp.mpc(mu)
        s = 2 * mp.sqrt(lam)
    kval = bessel_k(mu, s, ctx)
    idot = bessel_i_dnu(mu, s, ctx)
    with ctx.workdps():
        phase = mp.e ** (-mp.mpc(0, 1) * mu * mp.pi * (2 * m - 1))
        return +(mp.mpc(0, 1) * kval / (mp.pi * idot) * phase)


def match_nearest(well, mu):
    """Pair a barrier order with the closest root in a well spectrum.

    Parameters
    ----------
    well : list of SpectralRoot
    mu : SpectralRoot or complex-like

    Returns
    -------
    ComparisonRecord
        Decade values saturate at the precision the inputs carry.
    """
    if not well:
        raise ValueError("well spectrum must be nonempty")
    if isinstance(mu, SpectralRoot):
        mu_order, mu_energy = mu.order, mu.energy
        n, lam = mu.n, mu.lam
    else:
        with mp.workdps(60):
            mu_order = mp.mpc(mu)
            mu_energy = -(mu_order * mu_order) / 4
        n, lam = None, well[0].lam
    with mp.workdps(140):
        best = min(well, key=lambda r: (abs(r.order - mu_order), abs(r.order)))
        d_order = abs(best.order - mu_order)
        d_energy = abs(best.energy - mu_energy)
        log_order = +(-mp.log10(d_order)) if d_order > 0 else mp.inf
        log_energy = +(-mp.log10(d_energy)) if d_energy > 0 else mp.inf
    return ComparisonRecord(
        lam=lam,
        n=best.n if n is None else n,
        m=best.m,
        nu_star=best.order,
        mu=mu_order,
        log_diff_order=log_order,
        log_diff_energy=log_energy,
    )


def branch_index(rho, theta):
    """Branch index bringing the rotated ray argument into ``(-pi/2, pi/2]``.

    ``rho`` and ``theta`` are the polar magnitude and angle of the order
    parameter; ``theta`` must satisfy ``abs(theta) < pi/2``.  Boundary ties
    resolve toward the inclusive right endpoint.
    """
    with mp.workdps(40):
        rho = mp.mpf(rho)
        theta = mp.mpf(theta)
        if not abs(theta) < mp.pi / 2:
            raise ValueError("theta must satisfy abs(theta) < pi/2")
        q = mp.mpf("0.5") - rho * mp.sin(theta) / (2 * mp.pi)
        snap = mp.nint(q)
        if abs(q - snap) < mp.mpf("1e-12") * (1 + abs(q)):
            return int(snap)
        return int(mp.floor(q))


# ---------------------------------------------------------------------------
# Parameter sweep
# ---------------------------------------------------------------------------


def _sweep_grid(lam_min, lam_max, steps, ctx):
    with ctx.workdps():
        if steps == 1:
            return [lam_min]
        ratio = (lam_max / lam_min) ** (mp.mpf(1) / (steps - 1))
        grid = [lam_min * ratio ** j for j in range(steps)]
        grid[0] = lam_min
        grid[-1] = lam_max
        return grid


def _continued_well_roots(lam, m, count, ctx, prev_orders):
    """Well spectrum at lam seeded by the previous grid point's roots.

    Two continued solutions landing close together without being the same
    root mean nearest-neighbor chaining cannot be trusted; that raises
    ContinuationBreakError rather than returning a silently wrong family.
    """
    continued = []
    for order in prev_orders:
        with ctx.workdps():
            seed = mp.mpc(order)
        root = _solve_well(seed, lam, m, ctx)
        if root is not None:
            continued.append(root)
    for i, a in enumerate(continued):
        for b in continued[i + 1:]:
            with ctx.workdps():
                gap = abs(a - b)
                scale = 1 + abs(a)
                ambiguous = (
                    mp.mpf("1e-15") * scale < gap < mp.mpf("1e-3") * scale
                )
            if ambiguous:
                raise ContinuationBreakError(
                    "two continued well roots landed within 1e-3 of each "
                    "other near %s" % mp.nstr(a, 8)
                )
    fresh = well_resonances(lam, m, count, ctx)
    merged = _dedup_orders([r.order for r in fresh] + continued, ctx)
    with ctx.workdps():
        merged.sort(key=lambda nu: abs(nu))
    roots = []
    residual_tol = _residual_tolerance(ctx)
    for n, order in enumerate(merged[:count]):
        root = _make_root(lam, "well", m, n, order, ctx)
        if condition_residual(root, ctx) >= residual_tol:
            raise NoConvergenceError(
                "residual certification failed during continued well solve",
                partial=roots,
            )
        roots.append(root)
    return roots


def sweep(lam_min, lam_max, steps, m_list, count, ctx=None):
    """Spectra along a geometric grid in lam, chained by continuation.

    Barrier roots are always swept; ``m_list`` entries add bound states
    (entry 0) and well branches (nonzero entries).  A complex pair born
    from two real roots merging is flagged ``coalesced`` at the first grid
    point at or after the merge.

    Returns a flat list of SpectralRoot grouped by grid point.
    """
    ctx = _resolve(ctx)
    if int(steps) != steps or steps < 1:
        raise ValueError("steps must be a positive integer")
    steps = int(steps)
    lam_min = ctx.real(lam_min)
    lam_max = ctx.real(lam_max)
    if not 0 < lam_min <= lam_max:
        raise ValueError("need 0 < lam_min <= lam_max")
    if (lam_min == lam_max) != (steps == 1):
        raise ValueError("a one-point grid requires lam_min == lam_max")
    if int(count) != count or count < 1:
        raise ValueError("count must be a positive integer")
    count = int(count)
    m_values = []
    for m in m_list:
        if int(m) != m:
            raise ValueError("m_list entries must be integers")
        m_values.append(int(m))
    grid = _sweep_grid(lam_min, lam_max, steps, ctx)
    snapshots = _chain_states(lam_max, stops=grid)
    residual_tol = _residual_tolerance(ctx)
    out = []
    prev_well = {}
    for lam in grid:
        snap = snapshots[_chain_key(_SCOUT.real(lam))]
        selected = _barrier_root_set(lam, count, ctx, snap=snap)
        for n, (order, flag) in enumerate(selected):
            root = _make_root(lam, "barrier", 0, n, order, ctx, coalesced=flag)
            if condition_residual(root, ctx) >= residual_tol:
                raise NoConvergenceError(
                    "residual certification failed during sweep", partial=out,
                )
            out.append(root)
        for m in m_values:
            if m == 0:
                out.extend(bound_states(lam, count, ctx))
                continue
            prev = prev_well.get(m)
            if prev is None:
                roots = well_resonances(lam, m, count, ctx)
            else:
                roots = _continued_well_roots(lam, m, count, ctx, prev)
            prev_well[m] = [r.order for r in roots]
            out.extend(roots)
    return out
