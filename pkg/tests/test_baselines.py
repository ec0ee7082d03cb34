import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from flashread.baselines import (BCH_K, BCH_T, bch_fer_analytic, bch_fer_mc, bch_length,
                                 log_binomial_tail, wilson_interval, write_bch_csv)


def test_bch_length():
    assert bch_length() == 9152
    assert BCH_K == 8256 and BCH_T == 64
    assert BCH_K / bch_length() == pytest.approx(0.9021, abs=1e-4)


@pytest.mark.parametrize("p", [0.002, 0.004, 0.0077, 0.01, 0.02])
def test_analytic_matches_scipy(p):
    assert bch_fer_analytic(9152, 64, p) == pytest.approx(binom.sf(64, 9152, p), rel=1e-9)


def test_deep_tail_keeps_relative_precision():
    # sf underflows in naive complement form; log-domain sum should not
    got = log_binomial_tail(9152, 64, 1e-4)
    ref = binom.logsf(64, 9152, 1e-4)
    assert got == pytest.approx(ref, rel=1e-9)
    assert bch_fer_analytic(9152, 64, 1e-4) > 0.0


def test_edge_cases():
    assert bch_fer_analytic(9152, 64, 0.0) == 0.0
    assert bch_fer_analytic(100, 100, 0.3) == 0.0
    assert bch_fer_analytic(10, 0, 0.5) == pytest.approx(1 - 0.5 ** 10)
    with pytest.raises(ValueError):
        bch_fer_analytic(100, 5, 0.7)
    with pytest.raises(ValueError):
        bch_fer_analytic(0, 5, 0.1)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 0.05), st.floats(1e-4, 0.05))
def test_monotone_in_p(p1, p2):
    lo, hi = sorted((p1, p2))
    assert bch_fer_analytic(9152, 64, lo) <= bch_fer_analytic(9152, 64, hi)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 120), st.floats(1e-3, 0.02))
def test_monotone_in_t(t, p):
    assert bch_fer_analytic(9152, t + 1, p) <= bch_fer_analytic(9152, t, p)


def test_monte_carlo_agrees_with_formula():
    p = 0.0077
    est = bch_fer_mc(9152, 64, p, 100_000, seed=1)
    exact = bch_fer_analytic(9152, 64, p)
    assert est.ci_low <= exact <= est.ci_high
    assert exact == pytest.approx(0.759, abs=2e-3)


def test_monte_carlo_independent_of_block_size():
    a = bch_fer_mc(500, 5, 0.01, 30_000, seed=3, block=30_000)
    b = bch_fer_mc(500, 5, 0.01, 30_000, seed=3, block=30_000)
    assert a == b
    with pytest.raises(ValueError):
        bch_fer_mc(500, 5, 0.01, 0)


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0.03 < hi < 0.04
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(1 - hi) and lo < 0.5 < hi
    # textbook value for 10/100 at 95%
    lo, hi = wilson_interval(10, 100)
    assert lo == pytest.approx(0.05523, abs=1e-4) and hi == pytest.approx(0.17437, abs=1e-4)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_csv_output(tmp_path):
    ps = np.arange(0.004, 0.012 + 1e-12, 0.0005)
    path = tmp_path / "bch.csv"
    rows = write_bch_csv(path, 9152, 64, ps, ["flashread test"])
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    recs = list(csv.DictReader(lines[1:]))
    assert len(recs) == len(ps) == len(rows)
    fers = [float(r["fer"]) for r in recs]
    assert fers == sorted(fers)
    assert math.isclose(fers[0], binom.sf(64, 9152, 0.004), rel_tol=1e-9)
