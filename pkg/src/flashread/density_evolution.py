"""Discretized density evolution for LDPC ensembles.

Message densities live on the LLR grid {kD : |k| <= K}, D = llr_max / K,
K = num_bins / 2, with the end bins absorbing everything beyond +-llr_max.
All-zero codeword analysis: densities are those of the LLR of a transmitted 0.

Variable-node update: convolution of the channel density with (d - 1) check
messages, done in one FFT for the whole lambda mixture.  Check-node update:
pairwise box-plus on (magnitude, sign) pmfs through a precomputed index table,
with repeated squaring for the high check degrees.

Channels that are not output-symmetric (the per-bit channels of Gray-labelled
MLC, or asymmetric quantizers) are symmetrized by the usual channel adapter:
the density used is the average over both bit values u of the law of
(1 - 2u) * L, which is what a decoder sees after a random coset flip.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.special import ndtr, ndtri

from . import kernels
from .ldpc.degree import DegreeDistribution


@dataclass(frozen=True)
class DeConfig:
    llr_max: float = 30.0
    num_bins: int = 4096
    max_de_iters: int = 2000
    target_error: float = 1e-10
    stall_window: int = 50
    stall_rel: float = 1e-6

    def __post_init__(self):
        if self.num_bins <= 0 or self.num_bins % 2:
            raise ValueError("num_bins must be a positive even number")
        if not self.llr_max > 0:
            raise ValueError("llr_max must be positive")
        if self.max_de_iters < 1 or not self.target_error > 0:
            raise ValueError("max_de_iters >= 1 and target_error > 0 required")

    @property
    def half(self) -> int:
        return self.num_bins // 2

    @property
    def step(self) -> float:
        return self.llr_max / self.half

    @property
    def grid(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1) * self.step


@dataclass
class DeRun:
    converged: bool
    iterations: int
    error: float
    monotone: bool
    history: list = field(default_factory=list, repr=False)


@dataclass
class DeThreshold:
    parameter: float
    snr_db: float | None
    trace: list            # [(parameter, converged, iterations, final error), ...]
    monotone: bool = True  # False when the bisection brackets disagree
    dd_name: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=4)
def _boxplus_table(half: int, step: float):
    mag = np.arange(half + 1) * step
    th = np.tanh(mag / 2.0)
    prod = np.clip(np.outer(th, th), 0.0, 1.0 - 2.0 ** -52)
    table = np.rint(2.0 * np.arctanh(prod) / step).astype(np.int32)
    table = np.minimum(table, np.minimum.outer(np.arange(half + 1), np.arange(half + 1)))
    table = table.astype(np.int32)
    rows = np.arange(half + 1)
    differs = table != rows[:, None]
    any_diff = differs.any(axis=1)
    last = half - np.argmax(differs[:, ::-1], axis=1)
    jcut = np.where(any_diff, np.maximum(last + 1, rows), rows).astype(np.int32)
    table.flags.writeable = False
    return np.ascontiguousarray(table), jcut


def quantize_density(values, weights, cfg: DeConfig) -> np.ndarray:
    """Point masses at LLR ``values`` rounded onto the grid (saturating)."""
    k = np.clip(np.rint(np.asarray(values, float) / cfg.step), -cfg.half, cfg.half).astype(int)
    out = np.zeros(cfg.num_bins + 1)
    np.add.at(out, k + cfg.half, np.asarray(weights, float))
    return out / out.sum()


def awgn_density(sigma: float, cfg: DeConfig) -> np.ndarray:
    """BPSK +1 over N(0, sigma^2): LLR ~ N(2/sigma^2, 4/sigma^2), binned."""
    mu, sd = 2.0 / sigma ** 2, 2.0 / sigma
    edges = (np.arange(-cfg.half, cfg.half + 2) - 0.5) * cfg.step
    cdf = ndtr((edges - mu) / sd)
    cdf[0], cdf[-1] = 0.0, 1.0
    return np.diff(cdf)


def bsc_density(eps: float, cfg: DeConfig) -> np.ndarray:
    if not 0.0 <= eps <= 0.5:
        raise ValueError("crossover must lie in [0, 1/2]")
    if eps == 0.0:
        return quantize_density([cfg.llr_max], [1.0], cfg)
    L = math.log((1.0 - eps) / eps)
    return quantize_density([L, -L], [1.0 - eps, eps], cfg)


def dmc_density(dmc, labeling, cfg: DeConfig) -> np.ndarray:
    """Symmetrized LLR density of a quantized channel, averaged over bit positions."""
    from .mi import bit_llrs
    llr = bit_llrs(dmc, labeling)               # (K regions, bits)
    bits = labeling.bit_matrix()                # (M levels, bits)
    table = np.asarray(dmc.table)               # (M, K)
    prior = np.asarray(dmc.prior)
    vals, wts = [], []
    nbits = bits.shape[1]
    for b in range(nbits):
        for u in (0, 1):
            sel = bits[:, b] == u
            w = prior[sel] / prior[sel].sum()
            p_out = w @ table[sel]              # P(region | bit b = u)
            vals.append((1 - 2 * u) * llr[:, b])
            wts.append(0.5 * p_out / nbits)
    return quantize_density(np.concatenate(vals), np.concatenate(wts), cfg)


def error_probability(pmf: np.ndarray, cfg: DeConfig) -> float:
    h = cfg.half
    return float(pmf[:h].sum() + 0.5 * pmf[h])


class _Evolver:
    def __init__(self, dd: DegreeDistribution, cfg: DeConfig):
        self.cfg = cfg
        self.h = cfg.half
        self.lam = [(d, a) for d, a in dd.lam if a > 0]
        self.rho = [(d, a) for d, a in dd.rho if a > 0]
        dmax = max(d for d, _ in self.lam)
        self.L = sfft.next_fast_len(2 * dmax * self.h + 2, real=True)
        self.table, self.jcut = _boxplus_table(self.h, cfg.step)

    def _circ(self, pmf):
        a = np.zeros(self.L)
        a[:self.h + 1] = pmf[self.h:]
        a[self.L - self.h:] = pmf[:self.h]
        return sfft.rfft(a)

    def variable(self, f_chan, q):
        fq = self._circ(q)
        mix = np.zeros_like(fq)
        for d, a in self.lam:
            mix += a * fq ** (d - 1)
        out = sfft.irfft(f_chan * mix, self.L)
        h, L = self.h, self.L
        res = np.empty(2 * h + 1)
        res[h:] = out[:h + 1]
        res[:h] = out[L - h:]
        res[-1] += out[h + 1:L // 2 + 1].sum()
        res[0] += out[L // 2 + 1:L - h].sum()
        np.maximum(res, 0.0, out=res)
        return res / res.sum()

    def _split(self, pmf):
        h = self.h
        ap = np.ascontiguousarray(pmf[h:])
        am = np.zeros(h + 1)
        am[1:] = pmf[:h][::-1]
        return ap, am

    def _join(self, ap, am):
        h = self.h
        out = np.empty(2 * h + 1)
        out[h:] = ap
        out[h] += am[0]
        out[:h] = am[1:][::-1]
        return out

    def _bp(self, x, y):
        return kernels.boxplus_pmf(x[0], x[1], y[0], y[1], self.table, self.jcut)

    def check(self, r):
        base = self._split(r)
        need = sorted({d - 1 for d, _ in self.rho})
        powers = {1: base}
        k = 1
        while 2 * k <= need[-1]:
            powers[2 * k] = self._bp(powers[k], powers[k])
            k *= 2
        out = np.zeros(2 * self.h + 1)
        cache = {}
        prev_e, prev = None, None
        for e in need:
            # build base^e from the previous exponent plus binary powers
            if prev is None:
                acc, rem = None, e
            else:
                acc, rem = prev, e - prev_e
            bit = 1 << max(rem.bit_length() - 1, 0)
            while rem:
                if rem >= bit:
                    acc = powers[bit] if acc is None else self._bp(acc, powers[bit])
                    rem -= bit
                bit >>= 1
            cache[e] = acc
            prev_e, prev = e, acc
        for d, a in self.rho:
            out += a * self._join(*cache[d - 1])
        out = np.maximum(out, 0.0)
        return out / out.sum()

    def run(self, chan: np.ndarray, keep_history: bool = False) -> DeRun:
        cfg = self.cfg
        f_chan = self._circ(chan)
        r = chan.copy()
        err = error_probability(r, cfg)
        history = [err] if keep_history else []
        best_err, best_it = err, 0
        monotone = True
        prev = err
        for it in range(1, cfg.max_de_iters + 1):
            if err < cfg.target_error:
                return DeRun(True, it - 1, err, monotone, history)
            q = self.check(r)
            r = self.variable(f_chan, q)
            err = error_probability(r, cfg)
            if keep_history:
                history.append(err)
            if err > prev * (1 + 1e-9) + 1e-15:
                monotone = False
            prev = err
            if err < best_err * (1 - cfg.stall_rel):
                best_err, best_it = err, it
            elif it - best_it >= cfg.stall_window:
                break   # fixed point above the target
        return DeRun(err < cfg.target_error, it, err, monotone, history)


def run_de(dd: DegreeDistribution, channel_pmf: np.ndarray, cfg: DeConfig = DeConfig(),
           keep_history: bool = False) -> DeRun:
    """Evolve one channel density; converged when the error falls below target."""
    channel_pmf = np.asarray(channel_pmf, float)
    if channel_pmf.shape != (cfg.num_bins + 1,):
        raise ValueError("channel density does not match the DE grid")
    return _Evolver(dd, cfg).run(channel_pmf, keep_history)


def _bisect(converges, good: float, bad: float, tol: float, trace: list):
    """Generic bisection between a converging and a failing parameter."""
    ok_good, ok_bad = converges(good), converges(bad)
    monotone = ok_good and not ok_bad
    if not monotone:
        return (good if ok_good else bad), False
    while abs(bad - good) > tol(good, bad):
        mid = 0.5 * (good + bad)
        if converges(mid):
            good = mid
        else:
            bad = mid
    return good, True


def _probe(dd, cfg, make_density, trace):
    ev = _Evolver(dd, cfg)

    def converges(x):
        res = ev.run(make_density(x))
        trace.append((float(x), bool(res.converged), int(res.iterations), float(res.error)))
        return res.converged
    return converges


def awgn_snr_db(sigma: float) -> float:
    """2Es/N0 in dB for unit-energy BPSK with noise std sigma (= 1/sigma^2)."""
    return -20.0 * math.log10(sigma)


def bsc_snr_db(eps: float) -> float:
    """Invert eps = Q(sqrt(2Es/N0)); returned in dB."""
    return 20.0 * math.log10(-ndtri(eps))


def de_threshold_awgn(dd: DegreeDistribution, cfg: DeConfig = DeConfig(),
                      lo: float = 0.3, hi: float = 0.8, tol: float = 1e-4) -> DeThreshold:
    trace = []
    conv = _probe(dd, cfg, lambda s: awgn_density(s, cfg), trace)
    sigma, mono = _bisect(conv, lo, hi, lambda g, b: tol, trace)
    return DeThreshold(sigma, awgn_snr_db(sigma), trace, mono, dd.name)


def de_threshold_bsc(dd: DegreeDistribution, cfg: DeConfig = DeConfig(),
                     lo: float = 1e-4, hi: float = 0.05, tol: float = 1e-6) -> DeThreshold:
    trace = []
    conv = _probe(dd, cfg, lambda e: bsc_density(e, cfg), trace)
    eps, mono = _bisect(conv, lo, hi, lambda g, b: tol, trace)
    return DeThreshold(eps, bsc_snr_db(eps), trace, mono, dd.name)


def de_threshold_dmc(dd: DegreeDistribution, channel_family, good: float, bad: float,
                     cfg: DeConfig = DeConfig(), rel_tol: float = 1e-3) -> DeThreshold:
    """Worst parameter of ``channel_family(x) -> (Dmc, BitLabeling)`` that still converges.

    ``good`` must be a parameter where decoding succeeds and ``bad`` one where
    it fails; either order of magnitude is fine.  ``monotone`` is False when
    the end points do not bracket a threshold.
    """
    trace = []
    conv = _probe(dd, cfg, lambda x: dmc_density(*channel_family(x), cfg), trace)
    x, mono = _bisect(conv, good, bad,
                      lambda g, b: rel_tol * max(abs(g), abs(b), 1e-12), trace)
    return DeThreshold(x, None, trace, mono, dd.name)


def write_trace_csv(result: DeThreshold, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["parameter", "converged", "iterations", "final_error"])
        for row in result.trace:
            w.writerow([repr(row[0]), int(row[1]), row[2], repr(row[3])])
