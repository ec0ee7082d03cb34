"""Bounded-distance BCH baseline: a frame fails iff more than t bits are wrong."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import norm

BCH_K = 8256
BCH_T = 64


def bch_length(k: int = BCH_K, rate: float = 0.9021) -> int:
    """round(k / rate): 9152 for the 8256-bit frame."""
    return int(round(k / rate))


def _log_pmf_terms(n: int, j: np.ndarray, p: float) -> np.ndarray:
    return (gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
            + j * math.log(p) + (n - j) * math.log1p(-p))


def log_binomial_tail(n: int, t: int, p: float) -> float:
    """log P(Binomial(n, p) > t), summed term by term in the log domain."""
    if p <= 0.0 or t >= n:
        return -math.inf
    if p >= 1.0:
        return 0.0
    upper = logsumexp(_log_pmf_terms(n, np.arange(t + 1, n + 1, dtype=float), p))
    return float(min(upper, 0.0))


def bch_fer_analytic(n: int, t: int, p: float) -> float:
    """P(Binomial(n, p) > t).

    Whichever tail is smaller is summed directly, so small FERs keep full
    relative precision and FERs near one stay monotone in p.
    """
    if not 0.0 <= p <= 0.5:
        raise ValueError("p must lie in [0, 1/2]")
    if n < 1 or t < 0:
        raise ValueError("need n >= 1 and t >= 0")
    if t >= n or p == 0.0:
        return 0.0
    lower = logsumexp(_log_pmf_terms(n, np.arange(0, t + 1, dtype=float), p))
    if lower < math.log(0.5):
        return float(-math.expm1(lower))
    return math.exp(log_binomial_tail(n, t, p))


def wilson_interval(errors: int, trials: int, conf: float = 0.95) -> tuple:
    if trials <= 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + conf / 2.0)
    ph = errors / trials
    den = 1.0 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / den
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return float(lo), float(hi)


@dataclass(frozen=True)
class McEstimate:
    fer: float
    errors: int
    trials: int
    ci_low: float
    ci_high: float


def bch_fer_mc(n: int, t: int, p: float, trials: int, seed: int = 0,
               block: int = 65536) -> McEstimate:
    """Monte Carlo frame failures; block b draws from SeedSequence(seed, spawn_key=(b,))
    so the estimate does not depend on how the trials are split up."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fails = 0
    done = 0
    b = 0
    while done < trials:
        size = min(block, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        fails += int(np.count_nonzero(rng.binomial(n, p, size) > t))
        done += size
        b += 1
    lo, hi = wilson_interval(fails, trials)
    return McEstimate(fails / trials, fails, trials, lo, hi)


def write_bch_csv(path, n: int, t: int, ps, header_lines=()) -> list:
    rows = []
    for p in ps:
        fer = bch_fer_analytic(n, t, float(p))
        rows.append((float(p), fer))
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["p", "fer", "ci_low", "ci_high"])
        for p, fer in rows:
            # analytic values are exact, so the interval collapses to the point
            w.writerow([repr(p), repr(fer), repr(fer), repr(fer)])
    return rows
