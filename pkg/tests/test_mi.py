import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flashread.channel import crossover_probabilities, make_mlc_gaussian, make_slc_gaussian
from flashread.mi import (BitLabeling, Dmc, bit_llrs, mi_derivative_three_reads,
                          mi_derivative_two_reads, mutual_information, mutual_information_batch)


def mi_double_loop(table, prior):
    """Textbook sum over (x, y) of p(x,y) log p(y|x)/p(y)."""
    m, k = len(table), len(table[0])
    py = [sum(prior[x] * table[x][y] for x in range(m)) for y in range(k)]
    tot = 0.0
    for x in range(m):
        for y in range(k):
            pxy = prior[x] * table[x][y]
            if pxy > 0:
                tot += pxy * math.log2(table[x][y] / py[y])
    return tot


def random_dmc(rng):
    m = int(rng.choice([2, 4]))
    k = int(rng.integers(1, 9))
    table = rng.dirichlet(np.full(k, rng.uniform(0.1, 3.0)), size=m)
    table[rng.random(table.shape) < 0.1] = 0.0
    table[:, 0] += (table.sum(axis=1) == 0)
    table /= table.sum(axis=1, keepdims=True)
    prior = rng.dirichlet(np.ones(m))
    return table, prior


def test_mi_matches_double_loop_on_random_channels():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(1000):
        table, prior = random_dmc(rng)
        got = mutual_information(Dmc(table, prior))
        worst = max(worst, abs(got - mi_double_loop(table.tolist(), prior.tolist())))
    assert worst < 1e-12


def test_batch_agrees_with_scalar():
    rng = np.random.default_rng(3)
    tabs = np.stack([rng.dirichlet(np.ones(5), size=4) for _ in range(20)])
    prior = np.full(4, 0.25)
    batch = mutual_information_batch(tabs, prior)
    assert batch == pytest.approx([mutual_information(Dmc(t, prior)) for t in tabs], abs=1e-13)


def test_mi_extremes():
    assert mutual_information(Dmc(np.eye(4))) == pytest.approx(2.0, abs=1e-15)
    assert mutual_information(Dmc(np.tile([0.2, 0.3, 0.5], (2, 1)))) == pytest.approx(0, abs=1e-15)
    eps = 0.1
    bsc = 1 + eps * math.log2(eps) + (1 - eps) * math.log2(1 - eps)
    assert mutual_information(Dmc([[1 - eps, eps], [eps, 1 - eps]])) == pytest.approx(bsc)


def test_dmc_validation():
    with pytest.raises(ValueError):
        Dmc([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ValueError):
        Dmc([[1.2, -0.2], [0.5, 0.5]])
    with pytest.raises(ValueError):
        Dmc(np.eye(2), prior=[1.0, 0.0, 0.0])


def test_dmc_json_round_trip():
    d = Dmc([[0.7, 0.2, 0.1], [0.1, 0.2, 0.7]])
    back = Dmc.from_dict(__import__("json").loads(d.to_json(BitLabeling.slc())))
    assert np.array_equal(back.table, d.table)


def test_labeling_rules():
    assert BitLabeling.gray().labels == ("00", "01", "11", "10")
    with pytest.raises(ValueError):
        BitLabeling(("00", "00", "11", "10"))
    with pytest.raises(ValueError):
        BitLabeling(("0", "01"))


def _mi_of_q(model, q, reads):
    ts = [-q, q] if reads == 2 else [-q, 0.0, q]
    return mutual_information(crossover_probabilities(model, ts))


def test_derivatives_match_central_differences():
    rng = np.random.default_rng(11)
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        snr = rng.uniform(0.0, 12.0)
        q = rng.uniform(0.02, 1.5)
        model = make_slc_gaussian(snr)
        for reads, fn in ((2, mi_derivative_two_reads), (3, mi_derivative_three_reads)):
            fd = (_mi_of_q(model, q + h, reads) - _mi_of_q(model, q - h, reads)) / (2 * h)
            worst = max(worst, abs(fn(model, q) - fd))
    assert worst < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(-10.0, 15.0))
def test_two_read_slope_at_zero_is_positive(snr):
    model = make_slc_gaussian(snr)
    assert mi_derivative_two_reads(model, 0.0) > 0.0


def test_two_read_slope_at_zero_vanishes_as_p1_tends_to_half():
    slopes = [mi_derivative_two_reads(make_slc_gaussian(s), 0.0) for s in (-10, -20, -30, -40)]
    assert all(a > b for a, b in zip(slopes, slopes[1:]))
    assert slopes[-1] < 1e-6


def test_three_read_slope_at_zero_is_limit():
    model = make_slc_gaussian(4.0)
    assert mi_derivative_three_reads(model, 0.0) == pytest.approx(
        mi_derivative_three_reads(model, 1e-7), abs=1e-5)


def test_derivative_requires_symmetric_slc():
    with pytest.raises(ValueError):
        mi_derivative_two_reads(make_mlc_gaussian(sigma=0.5), 0.3)
    with pytest.raises(ValueError):
        mi_derivative_two_reads(make_slc_gaussian(4.0), -0.1)


def test_three_read_endpoints_equal_bsc():
    model = make_slc_gaussian(4.0)
    s = model.levels[0].sigma
    bsc = mutual_information(crossover_probabilities(model, [0.0]))
    at0 = _mi_of_q(model, 1e-12, 3)  # outer reads collapse onto the middle one
    far = _mi_of_q(model, 10 * s, 3)
    assert at0 == pytest.approx(bsc, abs=1e-6)
    assert far == pytest.approx(bsc, abs=1e-6)


def test_slc_llrs_are_bsc_llrs():
    eps = 0.03
    llr = bit_llrs(Dmc([[1 - eps, eps], [eps, 1 - eps]]), BitLabeling.slc())
    # level 0 stores bit 1, so output 0 favours bit 1
    assert llr[:, 0] == pytest.approx([-math.log((1 - eps) / eps), math.log((1 - eps) / eps)])


def test_gray_llrs_match_enumeration():
    model = make_mlc_gaussian(sigma=0.5)
    d = crossover_probabilities(model, [-2.4, -2.0, -1.6, -0.3, 0.0, 0.3, 1.6, 2.0, 2.4])
    lab = BitLabeling.gray()
    got = bit_llrs(d, lab)
    for y in range(d.num_outputs):
        for b in range(2):
            p0 = sum(d.prior[x] * d.table[x, y] for x in range(4) if lab.labels[x][b] == "0")
            p1 = sum(d.prior[x] * d.table[x, y] for x in range(4) if lab.labels[x][b] == "1")
            assert got[y, b] == pytest.approx(np.clip(math.log(p0 / p1), -30, 30), abs=1e-9)


def test_llrs_clip_and_handle_empty_outputs():
    llr = bit_llrs(Dmc([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), BitLabeling.slc())
    assert llr[:, 0].tolist() == [-30.0, 0.0, 30.0]
