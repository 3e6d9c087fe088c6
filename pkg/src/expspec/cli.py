"""Batch command-line interface for exponential-potential spectra.

Five subcommands cover the common workflows.  ``spectrum`` prints exact
order-parameter spectra, ``rpm-roots`` classifies every root of a small
symbolic determinant, ``rpm-polish`` refines one seed against a numeric
determinant, ``compare`` measures how closely well roots shadow barrier
roots along a coupling grid, and ``converge`` reports digits of agreement
against an exact eigenvalue as the determinant dimension grows.

Output is a fixed-column CSV stream, or the same records wrapped in JSON.
Formatting is deterministic and locale-free: every number is rounded half
to even at the requested count of significant figures and printed in plain
fixed-point notation, so identical inputs produce identical bytes.

Exit codes: 0 on full success, 2 when any sub-job failed to converge (the
remaining rows are still printed, with a ``status`` marker on the failed
ones), 3 for invalid arguments.
"""

import argparse
import dataclasses
import decimal
import importlib.metadata
import json
import os
import sys
import time
import warnings
from fractions import Fraction

import mpmath as mp

from .mpcore import PrecisionContext
from .rpm import (
    ConvergenceWarning,
    HankelSpec,
    all_roots,
    classify_roots,
    convergence_curve,
    exponential_potential,
    hankel_symbolic,
    newton_polish,
)
from .spectra import (
    NoConvergenceError,
    SpectralRoot,
    barrier_roots,
    bound_states,
    match_nearest,
    sweep,
    well_resonances,
)

HEADER = ("command", "lambda", "kind", "m", "n", "D", "d", "re", "im",
          "delta", "status")

_COMMANDS = ("spectrum", "rpm-roots", "rpm-polish", "compare", "converge")
_DEFAULT_DIGITS = 16
_MIN_DIGITS = 6
_SYMBOLIC_CAP = 16
_DELTA_FIGURES = 6
_ENV_DIGITS = "EXPSPEC_DIGITS"

try:
    _VERSION = importlib.metadata.version("expspec")
except importlib.metadata.PackageNotFoundError:  # uninstalled source tree
    _VERSION = "0.0.0"


class UsageError(ValueError):
    """An argument failed validation; maps to exit code 3."""


@dataclasses.dataclass(frozen=True)
class JobConfig:
    """One batch job, as parsed from the command line.

    String-valued fields keep the raw tokens (``lam``, ``D``, ``seed``,
    ``target``, ``lam_range``); they are validated and parsed by ``run``,
    so a config built in code goes through the same checks as one built
    by the argument parser.
    """

    command: str
    lam: object = None
    lam_range: object = None
    kind: object = None
    m: object = None
    n: object = None
    count: object = None
    D: object = None
    d: int = 0
    seed: object = None
    target: object = None
    digits: object = None
    fmt: str = "csv"
    jobs: int = 1


# ---------------------------------------------------------------------------
# deterministic decimal formatting
# ---------------------------------------------------------------------------


def format_real(value, digits):
    """Fixed-point decimal string with ``digits`` significant figures.

    Rounding is half to even on the exact binary value, independent of the
    ambient mpmath precision, and trailing zeros within the significant
    figures are kept.  Exact zero prints as ``0``; non-finite values print
    as the empty string.

    Parameters
    ----------
    value : mpf, mpc with zero imaginary part, int, float, or Fraction
    digits : int
        Significant figures, at least 1.

    Returns
    -------
    str
    """
    if digits < 1:
        raise ValueError("need at least one significant figure")
    if isinstance(value, mp.mpc):
        if value.imag != 0:
            raise ValueError("format_real needs a real value")
        value = value.real
    if isinstance(value, (int, Fraction)):
        exact = Fraction(value)
    elif isinstance(value, mp.mpf):
        if not mp.isfinite(value):
            return ""
        sign, man, exp, _ = value._mpf_
        exact = Fraction(-man if sign else man) * Fraction(2) ** exp
    else:
        if not mp.isfinite(mp.mpf(value)):
            return ""
        exact = Fraction(value)
    if exact == 0:
        return "0"
    magnitude = abs(exact)
    e10 = len(str(magnitude.numerator)) - len(str(magnitude.denominator))
    while Fraction(10) ** e10 > magnitude:
        e10 -= 1
    while Fraction(10) ** (e10 + 1) <= magnitude:
        e10 += 1
    scaled = magnitude * Fraction(10) ** (digits - 1 - e10)
    q, r = divmod(scaled.numerator, scaled.denominator)
    if 2 * r > scaled.denominator or (2 * r == scaled.denominator and q % 2):
        q += 1
    if q == 10 ** digits:
        q //= 10
        e10 += 1
    body = str(q)
    if e10 >= digits - 1:
        text = body + "0" * (e10 - digits + 1)
    elif e10 >= 0:
        text = body[: e10 + 1] + "." + body[e10 + 1:]
    else:
        text = "0." + "0" * (-e10 - 1) + body
    return "-" + text if exact < 0 else text


def _format_grid(value, digits):
    """Grid coordinates drop trailing fractional zeros for readability."""
    text = format_real(value, digits)
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def _complex_cells(value, digits):
    with mp.workdps(digits + 15):
        z = mp.mpc(value)
    return format_real(z.real, digits), format_real(z.imag, digits)


# ---------------------------------------------------------------------------
# token parsing and validation
# ---------------------------------------------------------------------------


def _positive_rational(token, what):
    try:
        exact = Fraction(decimal.Decimal(str(token)))
    except (decimal.InvalidOperation, ValueError, TypeError):
        raise UsageError("%s must be a decimal number, got %r" % (what, token))
    if exact <= 0:
        raise UsageError("%s must be positive, got %r" % (what, token))
    return exact


def _checked_int(value, what, minimum):
    try:
        number = int(str(value))
    except (ValueError, TypeError):
        raise UsageError("%s must be an integer, got %r" % (what, value))
    if number < minimum:
        raise UsageError("%s must be at least %d, got %d" % (what, minimum, number))
    return number


def _resolve_digits(config):
    if config.digits is not None:
        digits = _checked_int(config.digits, "--digits", 1)
    else:
        raw = os.environ.get(_ENV_DIGITS)
        digits = _DEFAULT_DIGITS
        if raw is not None:
            try:
                digits = int(raw)
            except ValueError:
                digits = _DEFAULT_DIGITS
    if digits < _MIN_DIGITS:
        raise UsageError("--digits must be at least %d" % _MIN_DIGITS)
    return digits


def _parse_dimensions(token):
    """A single dimension ``N`` or an inclusive range ``start:stop:step``."""
    if token is None:
        raise UsageError("--D is required for this command")
    parts = str(token).split(":")
    if len(parts) == 1:
        return [_checked_int(parts[0], "--D", 1)]
    if len(parts) != 3:
        raise UsageError("--D takes N or start:stop:step, got %r" % (token,))
    start = _checked_int(parts[0], "--D start", 1)
    stop = _checked_int(parts[1], "--D stop", 1)
    step = _checked_int(parts[2], "--D step", 1)
    if stop < start:
        raise UsageError("--D range must not be decreasing")
    return list(range(start, stop + 1, step))


def _parse_lambda_range(token):
    parts = str(token).split(":")
    if len(parts) != 3:
        raise UsageError("--lambda-range takes min:max:points, got %r" % (token,))
    lo = _positive_rational(parts[0], "--lambda-range min")
    hi = _positive_rational(parts[1], "--lambda-range max")
    points = _checked_int(parts[2], "--lambda-range points", 1)
    if hi < lo:
        raise UsageError("--lambda-range must not be decreasing")
    if (lo == hi) != (points == 1):
        raise UsageError("a one-point grid requires min == max and points == 1")
    return lo, hi, points


def _parse_labeled(token, what):
    """``bound:n``, ``barrier:n``, or ``well:m:n``."""
    parts = str(token).split(":")
    kind = parts[0]
    if kind in ("bound", "barrier"):
        if len(parts) != 2:
            raise UsageError("%s %s takes one index, got %r" % (what, kind, token))
        return kind, 0, _checked_int(parts[1], what + " index", 0)
    if kind == "well":
        if len(parts) != 3:
            raise UsageError("%s well takes branch and index, got %r" % (what, token))
        m = _checked_int(parts[1], what + " branch", 1)
        n = _checked_int(parts[2], what + " index", 0)
        return kind, m, n
    raise UsageError("%s kind must be bound, barrier, or well, got %r"
                     % (what, kind))


def _resolve_labeled(kind, m, n, lam, ctx):
    if kind == "bound":
        return bound_states(lam, n + 1, ctx)[n]
    if kind == "barrier":
        return barrier_roots(lam, n + 1, ctx)[n]
    return well_resonances(lam, m, n + 1, ctx)[n]


def _row(**cells):
    base = {name: "" for name in HEADER}
    base["status"] = "ok"
    base.update(cells)
    return base


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_spectrum(config, digits):
    lam = _positive_rational(config.lam, "--lambda")
    if config.kind not in ("bound", "barrier", "well"):
        raise UsageError("--kind must be bound, barrier, or well")
    count = _checked_int(config.count if config.count is not None else 4,
                         "--count", 1)
    m = _checked_int(config.m if config.m is not None else 1, "--m", 1)
    ctx = PrecisionContext(working_digits=max(30, digits + 10))
    rows, code = [], 0
    try:
        if config.kind == "bound":
            roots = bound_states(lam, count, ctx)
        elif config.kind == "barrier":
            roots = barrier_roots(lam, count, ctx)
        else:
            roots = well_resonances(lam, m, count, ctx)
    except NoConvergenceError as err:
        roots = [r for r in (err.partial or []) if isinstance(r, SpectralRoot)]
        code = 2
    for root in roots:
        re_s, im_s = _complex_cells(root.order, digits)
        rows.append(_row(
            command="spectrum", **{"lambda": str(config.lam)},
            kind=config.kind,
            m=str(root.m) if config.kind == "well" else "",
            n=str(root.n), re=re_s, im=im_s,
        ))
    if code:
        rows.append(_row(
            command="spectrum", **{"lambda": str(config.lam)},
            kind=config.kind, m=str(m) if config.kind == "well" else "",
            status="no-convergence",
        ))
    return rows, code, ctx.working_digits


def _cmd_polish(config, digits):
    lam = _positive_rational(config.lam, "--lambda")
    dims = _parse_dimensions(config.D)
    if len(dims) != 1:
        raise UsageError("rpm-polish takes a single --D")
    D = dims[0]
    d = _checked_int(config.d, "--d", -1)
    if config.seed is None:
        raise UsageError("--seed is required")
    ctx = PrecisionContext.for_output(digits, hankel_dim=D)
    token = str(config.seed)
    labeled = None
    if ":" in token:
        labeled = _parse_labeled(token, "--seed")
    else:
        parts = token.split(",")
        if len(parts) not in (1, 2):
            raise UsageError("raw seed takes re or re,im, got %r" % (token,))
        try:
            with ctx.workdps():
                seed = mp.mpc(mp.mpf(parts[0].strip()),
                              mp.mpf(parts[1].strip()) if len(parts) == 2 else 0)
        except ValueError:
            raise UsageError("raw seed must be decimal numbers, got %r" % (token,))
    kind, m, n = labeled if labeled else ("", None, None)
    echo = {
        "command": "rpm-polish", "lambda": str(config.lam), "kind": kind,
        "m": str(m) if kind == "well" else "",
        "n": "" if n is None else str(n), "D": str(D), "d": str(d),
    }
    pot = exponential_potential(lam, terms=2 * D + max(d, 0) + 2)
    try:
        if labeled:
            exact = _resolve_labeled(kind, m, n, lam, ctx)
            with ctx.workdps():
                seed = mp.mpc(exact.energy)
                if seed.imag < 0:
                    seed = mp.conj(seed)
        root = newton_polish(pot, HankelSpec(D, d), seed, ctx)
    except NoConvergenceError:
        return [_row(status="no-convergence", **echo)], 2, ctx.working_digits
    re_s, im_s = _complex_cells(root.energy, digits)
    return [_row(re=re_s, im=im_s, **echo)], 0, ctx.working_digits


def _cmd_roots(config, digits):
    lam = _positive_rational(config.lam, "--lambda")
    dims = _parse_dimensions(config.D)
    if len(dims) != 1:
        raise UsageError("rpm-roots takes a single --D")
    D = dims[0]
    if D > _SYMBOLIC_CAP:
        raise UsageError("symbolic determinants are capped at dimension %d"
                         % _SYMBOLIC_CAP)
    d = _checked_int(config.d, "--d", -1)
    ctx = PrecisionContext(working_digits=max(30, digits + 10))
    pot = exponential_potential(lam, terms=2 * D + max(d, 0) + 2)
    poly = hankel_symbolic(pot, HankelSpec(D, d))
    echo = {"command": "rpm-roots", "lambda": str(config.lam),
            "D": str(D), "d": str(d)}
    try:
        roots = all_roots(poly, ctx)
    except NoConvergenceError:
        return [_row(status="no-convergence", **echo)], 2, ctx.working_digits
    rows = []
    for tagged in classify_roots(roots, lam, ctx):
        tag = tagged.classification
        re_s, im_s = _complex_cells(tagged.energy, digits)
        if tag.kind == "spurious":
            delta = ""
        else:
            with ctx.workdps():
                if tag.distance == 0:
                    decades = mp.mpf(ctx.working_digits)
                else:
                    decades = -mp.log10(tag.distance)
            delta = format_real(decades, _DELTA_FIGURES)
        rows.append(_row(
            kind=tag.kind,
            m=str(tag.m) if tag.kind == "well" else "",
            n="" if tag.n is None else str(tag.n),
            re=re_s, im=im_s, delta=delta, **echo,
        ))
    return rows, 0, ctx.working_digits


def _cmd_compare(config, digits):
    if config.lam_range is None:
        raise UsageError("--lambda-range is required")
    lo, hi, points = _parse_lambda_range(config.lam_range)
    if config.n is None or config.m is None:
        raise UsageError("compare needs --n and --m")
    n = _checked_int(config.n, "--n", 0)
    m = _checked_int(config.m, "--m", 1)
    if config.count is not None:
        count = _checked_int(config.count, "--count", n + 1)
    else:
        count = max(n + 1, 4) + 2 * m + 2
    ctx = PrecisionContext(working_digits=max(30, digits + 10))
    try:
        swept = sweep(lo, hi, points, [m], count, ctx)
    except NoConvergenceError:
        return [_row(command="compare", **{"lambda": str(config.lam_range)},
                     status="no-convergence")], 2, ctx.working_digits
    groups = []
    for root in swept:
        if not groups or root.lam != groups[-1][0]:
            groups.append((root.lam, []))
        groups[-1][1].append(root)
    rows, code = [], 0
    for lam_value, group in groups:
        lam_cell = _format_grid(lam_value, digits)
        mus = [r for r in group if r.kind == "barrier"]
        wells = [r for r in group if r.kind == "well"]
        if len(mus) <= n or not wells:
            rows.append(_row(command="compare", **{"lambda": lam_cell},
                             kind="barrier", n=str(n),
                             status="no-convergence"))
            code = 2
            continue
        mu = mus[n]
        record = match_nearest(wells, mu)
        mu_re, mu_im = _complex_cells(mu.order, digits)
        star_re, star_im = _complex_cells(record.nu_star, digits)
        rows.append(_row(command="compare", **{"lambda": lam_cell},
                         kind="barrier", n=str(mu.n), re=mu_re, im=mu_im))
        rows.append(_row(command="compare", **{"lambda": lam_cell},
                         kind="well", m=str(record.m), n=str(record.n),
                         re=star_re, im=star_im,
                         delta=format_real(record.log_diff_energy,
                                           _DELTA_FIGURES)))
    return rows, code, ctx.working_digits


def _cmd_converge(config, digits):
    lam = _positive_rational(config.lam, "--lambda")
    if config.target is None:
        raise UsageError("--target is required")
    kind, m, n = _parse_labeled(config.target, "--target")
    dims = _parse_dimensions(config.D)
    jobs = _checked_int(config.jobs, "--jobs", 1)
    ctx = PrecisionContext(working_digits=max(30, digits))
    echo = {
        "command": "converge", "lambda": str(config.lam), "kind": kind,
        "m": str(m) if kind == "well" else "",
        "n": str(n), "d": "0",
    }
    pot = exponential_potential(lam, terms=2 * dims[-1] + 2)
    try:
        target = _resolve_labeled(kind, m, n, lam, ctx)
    except NoConvergenceError:
        return [_row(status="no-convergence", **echo)], 2, ctx.working_digits
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        records = convergence_curve(pot, lam, target, dims, ctx, jobs=jobs)
    by_dim = {record.D: record for record in records}
    rows, code = [], 0
    for D in dims:
        record = by_dim.get(D)
        if record is None:
            rows.append(_row(D=str(D), status="no-convergence", **echo))
            code = 2
        else:
            rows.append(_row(D=str(D),
                             delta=format_real(record.delta, _DELTA_FIGURES),
                             **echo))
    return rows, code, ctx.working_digits


_EXECUTORS = {
    "spectrum": _cmd_spectrum,
    "rpm-roots": _cmd_roots,
    "rpm-polish": _cmd_polish,
    "compare": _cmd_compare,
    "converge": _cmd_converge,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def run(config, sink):
    """Execute one job and write its report to ``sink``.

    Parameters
    ----------
    config : JobConfig
    sink : writable text stream

    Returns
    -------
    int
        0 on success, 2 when a sub-job failed to converge, 3 on invalid
        arguments (reported on stderr; nothing is written to ``sink``).
    """
    started = time.perf_counter()
    try:
        if config.command not in _EXECUTORS:
            raise UsageError("unknown command %r" % (config.command,))
        digits = _resolve_digits(config)
        _checked_int(config.jobs, "--jobs", 1)
        if config.fmt not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        rows, code, working = _EXECUTORS[config.command](config, digits)
    except UsageError as err:
        print("error: %s" % err, file=sys.stderr)
        return 3
    if config.fmt == "csv":
        _write_csv(sink, rows)
    else:
        _write_json(sink, config.command, digits, working, rows,
                    time.perf_counter() - started)
    return code


def _write_csv(sink, rows):
    import csv

    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        writer.writerow([row[name] for name in HEADER])


def _write_json(sink, command, digits, working, rows, elapsed):
    doc = {
        "meta": {
            "command": command,
            "digits": digits,
            "working_digits": working,
            "version": _VERSION,
            "elapsed_seconds": round(elapsed, 3),
        },
        "records": [{name: row[name] for name in HEADER} for row in rows],
    }
    json.dump(doc, sink, indent=2)
    sink.write("\n")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage failures exit with status 3."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print("%s: error: %s" % (self.prog, message), file=sys.stderr)
        raise SystemExit(3)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--digits", type=int, default=None,
                        help="significant figures in the report (default 16, "
                             "or the %s environment variable)" % _ENV_DIGITS)
    common.add_argument("--format", dest="fmt", choices=("csv", "json"),
                        default="csv", help="report format (default csv)")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker processes for independent sub-jobs")

    parser = _Parser(prog="expspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    spectrum = sub.add_parser("spectrum", parents=[common],
                              help="exact order-parameter spectra")
    spectrum.add_argument("--lambda", dest="lam", required=True,
                          help="potential strength, positive")
    spectrum.add_argument("--kind", required=True,
                          choices=("bound", "barrier", "well"))
    spectrum.add_argument("--m", type=int, default=None,
                          help="well branch (default 1)")
    spectrum.add_argument("--count", type=int, default=None,
                          help="number of roots (default 4)")

    roots = sub.add_parser("rpm-roots", parents=[common],
                           help="classify all symbolic determinant roots")
    roots.add_argument("--lambda", dest="lam", required=True)
    roots.add_argument("--D", required=True, help="determinant dimension")
    roots.add_argument("--d", type=int, default=0,
                       help="column displacement (default 0)")

    polish = sub.add_parser("rpm-polish", parents=[common],
                            help="refine one seed against a numeric determinant")
    polish.add_argument("--lambda", dest="lam", required=True)
    polish.add_argument("--D", required=True, help="determinant dimension")
    polish.add_argument("--d", type=int, default=0)
    polish.add_argument("--seed", required=True,
                        help="bound:n, barrier:n, well:m:n, or re[,im]")

    compare = sub.add_parser("compare", parents=[common],
                             help="barrier roots against their well shadows")
    compare.add_argument("--lambda-range", dest="lam_range", required=True,
                         help="geometric grid min:max:points")
    compare.add_argument("--n", type=int, required=True,
                         help="barrier family index")
    compare.add_argument("--m", type=int, required=True, help="well branch")
    compare.add_argument("--count", type=int, default=None,
                         help="roots tracked per family (default automatic)")

    converge = sub.add_parser("converge", parents=[common],
                              help="digits of agreement versus dimension")
    converge.add_argument("--lambda", dest="lam", required=True)
    converge.add_argument("--target", required=True,
                          help="bound:n, barrier:n, or well:m:n")
    converge.add_argument("--D", required=True,
                          help="dimension range start:stop:step, or one value")

    return parser


def parse_args(argv=None):
    """Build a JobConfig from command-line tokens; exits 3 on bad usage."""
    namespace = build_parser().parse_args(argv)
    values = vars(namespace)
    fields = {f.name for f in dataclasses.fields(JobConfig)}
    return JobConfig(**{k: v for k, v in values.items() if k in fields})


def main(argv=None, sink=None):
    """Console entry point; returns the process exit code."""
    try:
        config = parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 3
    return run(config, sink if sink is not None else sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
