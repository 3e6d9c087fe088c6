"""Contract tests for the batch command-line front-end.

The CSV surface is pinned byte-for-byte where the formatting rules make
that deterministic (fixed decimal notation, round-half-even, ASCII), and
numerically against the frozen reference spectra elsewhere.
"""

import csv
import io
import json

import mpmath as mp
import pytest

import refvals
from expspec import cli
from expspec.cli import JobConfig, run


HEADER = ["command", "lambda", "kind", "m", "n", "D", "d", "re", "im", "delta", "status"]


def run_csv(argv, expect=0):
    buf = io.StringIO()
    code = cli.main(argv, sink=buf)
    assert code == expect, buf.getvalue()
    text = buf.getvalue()
    assert "\r" not in text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == HEADER
    return text, [dict(zip(HEADER, r)) for r in rows[1:]]


def _print_ulp(s):
    digits = len(s.replace("-", "").replace("+", "").replace(".", "").lstrip("0"))
    exponent = mp.floor(mp.log10(abs(mp.mpf(s)))) - digits + 1
    return mp.mpf(10) ** exponent


class TestSpectrumCommand:
    def test_well_orders_header_and_values(self):
        text, rows = run_csv(
            ["spectrum", "--lambda", "0.5", "--kind", "well", "--m", "1",
             "--count", "4", "--digits", "16"]
        )
        assert len(rows) == 4
        top = rows[0]
        assert top["command"] == "spectrum"
        assert top["lambda"] == "0.5"
        assert top["kind"] == "well"
        assert top["m"] == "1"
        assert top["n"] == "0"
        assert top["D"] == "" and top["d"] == "" and top["delta"] == ""
        assert top["status"] == "ok"
        assert "e" not in top["re"] and "e" not in top["im"]
        re_s, im_s = refvals.WELL_ORDERS["0.5"][(1, 0)]
        with mp.workdps(60):
            ulp = _print_ulp(re_s) + _print_ulp(im_s)
            assert abs(mp.mpf(top["re"]) - mp.mpf(re_s)) < ulp
            assert abs(abs(mp.mpf(top["im"])) - abs(mp.mpf(im_s))) < ulp
        assert [r["n"] for r in rows] == ["0", "1", "2", "3"]

    def test_bound_order_fixed_format(self):
        text, rows = run_csv(
            ["spectrum", "--lambda", "0.5", "--kind", "bound",
             "--count", "1", "--digits", "16"]
        )
        assert len(rows) == 1
        assert rows[0]["kind"] == "bound"
        assert rows[0]["m"] == ""
        assert rows[0]["re"] == "0"
        # 16 significant digits, round-half-even, trailing digits kept
        assert rows[0]["im"] == "3.594003866026638"

    def test_determinism(self):
        argv = ["spectrum", "--lambda", "2", "--kind", "barrier",
                "--count", "2", "--digits", "14"]
        first, _ = run_csv(argv)
        second, _ = run_csv(argv)
        assert first == second

    def test_json_mirrors_csv(self):
        argv = ["spectrum", "--lambda", "0.5", "--kind", "well", "--m", "1",
                "--count", "2", "--digits", "12"]
        _, rows = run_csv(argv)
        buf = io.StringIO()
        assert cli.main(argv + ["--format", "json"], sink=buf) == 0
        doc = json.loads(buf.getvalue())
        for key in ("command", "digits", "working_digits", "version",
                    "elapsed_seconds"):
            assert key in doc["meta"]
        assert doc["meta"]["command"] == "spectrum"
        assert doc["records"] == [dict(r) for r in rows]


class TestPolishCommand:
    def test_reference_row(self):
        text, rows = run_csv(
            ["rpm-polish", "--lambda", "0.5", "--D", "30", "--d", "0",
             "--seed", "well:1:0", "--digits", "20"]
        )
        assert len(rows) == 1
        row = rows[0]
        assert row["kind"] == "well" and row["m"] == "1" and row["n"] == "0"
        assert row["D"] == "30" and row["d"] == "0"
        assert row["status"] == "ok"
        ref = next(r for r in refvals.DETERMINANT_SPECTRUM_ROWS["0.5"] if r[0] == 1)
        with mp.workdps(60):
            assert abs(mp.mpf(row["re"]) - mp.mpf(ref[1])) < 2 * _print_ulp(ref[1])
            assert abs(abs(mp.mpf(row["im"])) - abs(mp.mpf(ref[2]))) < 2 * _print_ulp(ref[2])

    def test_raw_seed(self):
        _, rows = run_csv(
            ["rpm-polish", "--lambda", "0.5", "--D", "8",
             "--seed", "3.229,0.0", "--digits", "12"]
        )
        assert rows[0]["kind"] == ""
        with mp.workdps(60):
            assert abs(mp.mpf(rows[0]["re"]) - mp.mpf("3.2292159472536")) < mp.mpf("1e-4")
            assert abs(mp.mpf(rows[0]["im"])) < mp.mpf("1e-6")

    def test_divergent_seed_exits_2(self):
        text, rows = run_csv(
            ["rpm-polish", "--lambda", "0.5", "--D", "2",
             "--seed", "2000000,0", "--digits", "10"],
            expect=2,
        )
        assert len(rows) == 1
        assert rows[0]["status"] != "ok"
        assert rows[0]["re"] == "" and rows[0]["im"] == ""


class TestRootsCommand:
    def test_classified_root_sweep(self):
        _, rows = run_csv(
            ["rpm-roots", "--lambda", "0.5", "--D", "6", "--digits", "12"]
        )
        assert len(rows) == 21  # degree of the dimension-6 determinant
        kinds = {r["kind"] for r in rows}
        assert kinds <= {"bound", "well", "barrier", "spurious"}
        bound_rows = [r for r in rows if r["kind"] == "bound"]
        assert any(r["n"] == "0" for r in bound_rows)
        with mp.workdps(60):
            best = min(
                abs(mp.mpf(r["re"]) - mp.mpf("3.22921594725360485343"))
                for r in bound_rows
            )
            assert best < mp.mpf("1e-3")
        for r in rows:
            assert r["status"] == "ok"
            if r["kind"] == "spurious":
                assert r["m"] == "" and r["n"] == "" and r["delta"] == ""
        # conjugate closure is visible at the byte level
        ims = {r["im"] for r in rows if r["im"] not in ("", "0")}
        for s in ims:
            partner = s[1:] if s.startswith("-") else "-" + s
            assert partner in ims

    def test_symbolic_cap(self):
        buf = io.StringIO()
        assert cli.main(
            ["rpm-roots", "--lambda", "0.5", "--D", "17", "--digits", "10"],
            sink=buf,
        ) == 3


class TestCompareCommand:
    def test_single_point_decades(self):
        _, rows = run_csv(
            ["compare", "--lambda-range", "10:10:1", "--n", "0", "--m", "1",
             "--digits", "20"]
        )
        assert len(rows) == 2
        barrier, well = rows
        assert barrier["kind"] == "barrier" and well["kind"] == "well"
        assert barrier["n"] == "0" and well["n"] == "0" and well["m"] == "1"
        mu_re, mu_im = refvals.BARRIER_ORDERS["10"][0]
        with mp.workdps(60):
            ulp = _print_ulp(mu_re) + _print_ulp(mu_im)
            assert abs(mp.mpf(barrier["re"]) - mp.mpf(mu_re)) < ulp
            assert abs(abs(mp.mpf(barrier["im"])) - abs(mp.mpf(mu_im))) < ulp
            decades = mp.mpf(well["delta"])
            assert abs(decades - mp.mpf("12.39")) < mp.mpf("0.05")

    def test_grid_row_count(self):
        _, rows = run_csv(
            ["compare", "--lambda-range", "8:12:3", "--n", "0", "--m", "1",
             "--digits", "12"]
        )
        assert len(rows) == 6
        lams = [r["lambda"] for r in rows[::2]]
        assert lams == sorted(set(lams), key=mp.mpf)


class TestConvergeCommand:
    def test_bound_curve(self):
        _, rows = run_csv(
            ["converge", "--lambda", "0.5", "--target", "bound:0",
             "--D", "4:12:4", "--digits", "10"]
        )
        assert [r["D"] for r in rows] == ["4", "8", "12"]
        assert all(r["kind"] == "bound" and r["n"] == "0" for r in rows)
        assert all(r["m"] == "" for r in rows)
        assert all(r["re"] == "" and r["im"] == "" for r in rows)
        with mp.workdps(60):
            deltas = [mp.mpf(r["delta"]) for r in rows]
            assert deltas[-1] > deltas[0]
            assert deltas[-1] > 8

    def test_jobs_byte_identical(self):
        argv = ["converge", "--lambda", "0.5", "--target", "well:1:0",
                "--D", "6:10:2", "--digits", "10"]
        serial, _ = run_csv(argv)
        parallel, _ = run_csv(argv + ["--jobs", "2"])
        assert serial == parallel


class TestValidation:
    @pytest.mark.parametrize(
        "argv",
        [
            ["unknown-command", "--lambda", "1"],
            ["spectrum", "--lambda", "0.5", "--kind", "well", "--digits", "4"],
            ["spectrum", "--lambda", "-1", "--kind", "bound"],
            ["spectrum", "--lambda", "0", "--kind", "bound"],
            ["rpm-polish", "--lambda", "0.5", "--D", "8", "--seed", "wells:1"],
            ["rpm-polish", "--lambda", "0.5", "--D", "0", "--seed", "bound:0"],
            ["converge", "--lambda", "0.5", "--target", "bound:0", "--D", "12:4:4"],
            ["converge", "--lambda", "0.5", "--target", "banana:0", "--D", "4:8:4"],
            ["compare", "--lambda-range", "5:1:3", "--n", "0", "--m", "1"],
            ["spectrum", "--lambda", "0.5", "--kind", "well", "--jobs", "0"],
        ],
    )
    def test_invalid_arguments_exit_3(self, argv):
        buf = io.StringIO()
        assert cli.main(argv, sink=buf) == 3

    def test_env_default_and_flag_override(self, monkeypatch):
        monkeypatch.setenv("EXPSPEC_DIGITS", "18")
        _, rows = run_csv(
            ["spectrum", "--lambda", "0.5", "--kind", "bound", "--count", "1"]
        )
        assert rows[0]["im"] == "3.59400386602663790"
        _, rows = run_csv(
            ["spectrum", "--lambda", "0.5", "--kind", "bound", "--count", "1",
             "--digits", "16"]
        )
        assert rows[0]["im"] == "3.594003866026638"

    def test_run_accepts_config_directly(self):
        cfg = JobConfig(
            command="spectrum", lam="0.5", kind="well", m=1, count=2,
            digits=12, fmt="csv", jobs=1,
        )
        buf = io.StringIO()
        assert run(cfg, buf) == 0
        rows = list(csv.reader(io.StringIO(buf.getvalue())))
        assert rows[0] == HEADER
        assert len(rows) == 3
