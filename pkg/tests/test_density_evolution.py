import csv
import math

import numpy as np
import pytest
from scipy.stats import norm

from flashread import kernels
from flashread.channel import crossover_probabilities, make_slc_gaussian
from flashread.density_evolution import (DeConfig, _boxplus_table, awgn_density, awgn_snr_db,
                                         bsc_density, bsc_snr_db, de_threshold_awgn,
                                         de_threshold_bsc, de_threshold_dmc, dmc_density,
                                         error_probability, quantize_density, run_de,
                                         write_trace_csv)
from flashread.ldpc import CODE1, DegreeDistribution
from flashread.mi import BitLabeling
from flashread.quantopt import optimize_symmetric_q, uniform_scheme

REG36 = DegreeDistribution(((3, 1.0),), ((6, 1.0),), "reg36")
FAST = DeConfig(num_bins=2048)


def test_config_validation():
    with pytest.raises(ValueError):
        DeConfig(num_bins=101)
    with pytest.raises(ValueError):
        DeConfig(llr_max=0)
    assert FAST.grid[0] == -30.0 and FAST.grid[-1] == 30.0


def _symmetry_gap(pmf, cfg):
    """max |f(-x) - e^{-x} f(x)| over the interior grid."""
    x = cfg.grid
    inner = slice(1, -1)
    return float(np.max(np.abs(pmf[::-1][inner] - np.exp(-x[inner]) * pmf[inner])))


def test_awgn_density_is_normalized_and_symmetric():
    f = awgn_density(0.8, FAST)
    assert f.sum() == pytest.approx(1.0, abs=1e-14)
    assert _symmetry_gap(f, FAST) < 5e-3 * f.max()
    # mean LLR 2/sigma^2
    assert float(FAST.grid @ f) == pytest.approx(2 / 0.8 ** 2, rel=1e-3)
    assert error_probability(f, FAST) == pytest.approx(norm.sf(1 / 0.8), abs=2e-3)


def test_bsc_density_masses():
    eps = 0.05
    f = bsc_density(eps, FAST)
    L = math.log((1 - eps) / eps)
    k = int(round(L / FAST.step))
    assert f[FAST.half + k] == pytest.approx(1 - eps)
    assert f[FAST.half - k] == pytest.approx(eps)
    assert error_probability(f, FAST) == pytest.approx(eps)
    with pytest.raises(ValueError):
        bsc_density(0.6, FAST)


def test_quantize_density_saturates():
    f = quantize_density([100.0, -100.0], [0.75, 0.25], FAST)
    assert f[-1] == 0.75 and f[0] == 0.25


def _bp_masses(a, b):
    return 2 * math.atanh(math.tanh(a / 2) * math.tanh(b / 2))


def test_check_node_pairwise_on_point_masses():
    cfg = DeConfig(num_bins=1024)
    table, jcut = _boxplus_table(cfg.half, cfg.step)
    # magnitudes i, j (bins) combine to the rounded exact box-plus
    for i, j in [(10, 20), (200, 3), (400, 450), (512, 512), (0, 300)]:
        exact = _bp_masses(i * cfg.step, j * cfg.step)
        assert table[i, j] == int(round(exact / cfg.step))


@pytest.mark.parametrize("seed", [0, 1])
def test_boxplus_backends_agree(seed):
    cfg = DeConfig(num_bins=512)
    table, jcut = _boxplus_table(cfg.half, cfg.step)
    rng = np.random.default_rng(seed)
    ap, am, bp, bm = (rng.random(cfg.half + 1) for _ in range(4))
    got = kernels.boxplus_pmf(ap, am, bp, bm, table, jcut)
    ref = kernels._fallback.boxplus_pmf(ap, am, bp, bm, table)
    for g, r in zip(got, ref):
        assert np.allclose(g, r, rtol=1e-12, atol=1e-15)


def test_boxplus_sign_rule_with_two_masses():
    cfg = DeConfig(num_bins=512)
    table, jcut = _boxplus_table(cfg.half, cfg.step)
    z = np.zeros(cfg.half + 1)
    ap, am = z.copy(), z.copy()
    ap[40], am[40] = 0.9, 0.1
    bp, bm = z.copy(), z.copy()
    bp[60], bm[60] = 0.8, 0.2
    op, om = kernels.boxplus_pmf(ap, am, bp, bm, table, jcut)
    k = table[40, 60]
    assert op[k] == pytest.approx(0.9 * 0.8 + 0.1 * 0.2)
    assert om[k] == pytest.approx(0.9 * 0.2 + 0.1 * 0.8)
    assert op.sum() + om.sum() == pytest.approx(1.0)


def test_regular_36_awgn_bracket():
    assert run_de(REG36, awgn_density(0.872, FAST), FAST).converged
    assert not run_de(REG36, awgn_density(0.890, FAST), FAST).converged


def test_regular_36_thresholds_match_known_values():
    a = de_threshold_awgn(REG36, FAST, lo=0.7, hi=1.0)
    b = de_threshold_bsc(REG36, FAST, lo=0.05, hi=0.12)
    assert a.monotone and b.monotone
    assert a.parameter == pytest.approx(0.8809, abs=2e-3)
    assert b.parameter == pytest.approx(0.084, abs=1e-3)


def test_error_is_non_increasing_for_symmetric_input():
    res = run_de(REG36, awgn_density(0.86, FAST), FAST, keep_history=True)
    assert res.converged and res.monotone
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-12 + 1e-9 * h[:-1])
    res = run_de(REG36, awgn_density(0.90, FAST), FAST, keep_history=True)
    assert not res.converged and res.monotone


def test_degree_one_floor_blocks_convergence():
    cfg = DeConfig(num_bins=1024, max_de_iters=300)
    res = run_de(CODE1, awgn_density(0.40, cfg), cfg)
    assert not res.converged and 1e-8 < res.error < 1e-5
    assert run_de(CODE1.without_degree_one(), awgn_density(0.40, cfg), cfg).converged


def test_snr_conversions():
    assert awgn_snr_db(0.499) == pytest.approx(6.04, abs=0.005)
    assert bsc_snr_db(9.29e-3) == pytest.approx(7.44, abs=0.005)
    assert bsc_snr_db(norm.sf(10 ** (7.0 / 20))) == pytest.approx(7.0, abs=1e-9)


def _slc_family(reads):
    def fam(snr_db):
        m = make_slc_gaussian(snr_db)
        if reads == 1:
            t = [0.0]
        elif reads == 63:
            t = uniform_scheme(m).thresholds
        else:
            t = optimize_symmetric_q(m, reads).thresholds
        return crossover_probabilities(m, t), BitLabeling.slc()
    return fam


def test_dmc_density_of_hard_read_is_bsc():
    d, lab = _slc_family(1)(5.0)
    assert np.allclose(dmc_density(d, lab, FAST), bsc_density(d.table[1, 0], FAST), atol=1e-15)


def test_single_region_never_converges():
    d = crossover_probabilities(make_slc_gaussian(30.0), [])
    f = dmc_density(d, BitLabeling.slc(), FAST)
    assert f[FAST.half] == pytest.approx(1.0)
    assert not run_de(REG36, f, FAST).converged


def test_quantized_thresholds_ordering_and_soft_limit():
    cfg = FAST
    snrs = {}
    for reads in (1, 2, 3, 63):
        th = de_threshold_dmc(REG36, _slc_family(reads), 3.0, -1.0, cfg, rel_tol=1e-3)
        assert th.monotone
        snrs[reads] = th.parameter
    assert snrs[1] >= snrs[2] >= snrs[3] >= snrs[63]
    soft = awgn_snr_db(de_threshold_awgn(REG36, cfg, lo=0.7, hi=1.0).parameter)
    assert abs(snrs[63] - soft) < 0.05
    # the hard-read threshold also matches the BSC search
    eps = de_threshold_bsc(REG36, cfg, lo=0.05, hi=0.12).parameter
    assert abs(snrs[1] - bsc_snr_db(eps)) < 0.02


@pytest.mark.long
def test_doubling_bins_moves_threshold_little():
    a = de_threshold_awgn(REG36, DeConfig(num_bins=2048), lo=0.7, hi=1.0)
    b = de_threshold_awgn(REG36, DeConfig(num_bins=4096), lo=0.7, hi=1.0)
    assert abs(a.snr_db - b.snr_db) < 0.02
    c = de_threshold_bsc(REG36, DeConfig(num_bins=2048), lo=0.05, hi=0.12)
    d = de_threshold_bsc(REG36, DeConfig(num_bins=4096), lo=0.05, hi=0.12)
    assert abs(c.snr_db - d.snr_db) < 0.02


def test_trace_csv(tmp_path):
    th = de_threshold_bsc(REG36, DeConfig(num_bins=512), lo=0.05, hi=0.12, tol=1e-3)
    path = tmp_path / "trace.csv"
    write_trace_csv(th, path, ["flashread test"])
    rows = list(csv.DictReader(path.read_text().splitlines()[1:]))
    assert len(rows) == len(th.trace) >= 3
    assert {r["converged"] for r in rows} == {"0", "1"}
