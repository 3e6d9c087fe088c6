import mpmath as mp
import pytest

from expspec.mpcore import PrecisionContext


@pytest.fixture
def ctx30():
    return PrecisionContext(working_digits=30, guard_digits=10)


@pytest.fixture
def ctx50():
    return PrecisionContext(working_digits=50, guard_digits=10)


@pytest.fixture
def ctx80():
    return PrecisionContext(working_digits=80, guard_digits=10)


def close(a, b, rel):
    """|a - b| <= rel * max(|a|, |b|), evaluated at generous precision."""
    with mp.workdps(60):
        a = mp.mpc(a)
        b = mp.mpc(b)
        scale = max(abs(a), abs(b))
        if scale == 0:
            return True
        return abs(a - b) / scale <= rel


def assert_close(a, b, rel, msg=""):
    __tracebackhide__ = True
    if not close(a, b, rel):
        with mp.workdps(30):
            raise AssertionError(
                "%s: %s != %s (rel tol %s)" % (msg or "mismatch", mp.nstr(mp.mpc(a), 25), mp.nstr(mp.mpc(b), 25), rel)
            )
