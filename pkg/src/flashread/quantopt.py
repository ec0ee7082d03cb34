"""Word-line voltage optimizers.

Strategies, from most to least constrained:

* ``hard``            - density crossings only (M - 1 reads)
* ``symmetric-q``     - SLC, reads at +-q (and 0 for three reads), bisection on dI/dq
* ``single-q``        - MLC, erasure regions of width 2q centred on the hard thresholds
* ``constant-ratio``  - flanking reads where the two largest weighted densities have ratio R
* ``unconstrained``   - coarse grid over ascending tuples + coordinate-wise golden section
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channel import ChannelModel, crossover_probabilities, hard_thresholds
from .mi import (mi_derivative_three_reads, mi_derivative_two_reads,
                 mutual_information, mutual_information_batch)

GOLDEN_TOL = 1e-10
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class QuantizationScheme:
    thresholds: np.ndarray
    strategy: str
    achieved_mi: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float).ravel()
        if np.any(np.diff(t) <= 0):
            raise ValueError(f"thresholds must be strictly ascending: {t}")
        t.setflags(write=False)
        object.__setattr__(self, "thresholds", t)

    @property
    def reads(self) -> int:
        return int(self.thresholds.size)

    def to_dict(self) -> dict:
        return {"strategy": self.strategy, "thresholds": self.thresholds.tolist(),
                "achieved_mi": self.achieved_mi, "params": self.params}

    @classmethod
    def from_dict(cls, doc: dict) -> "QuantizationScheme":
        return cls(np.asarray(doc["thresholds"]), doc["strategy"],
                   float(doc["achieved_mi"]), dict(doc.get("params", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        lines = [f"strategy: {self.strategy}", f"MI: {self.achieved_mi:.9g} bits"]
        lines += [f"{k}: {v:.9g}" if isinstance(v, float) else f"{k}: {v}"
                  for k, v in self.params.items()]
        lines.append("read  volts")
        lines += [f"{i + 1:>4}  {t:.9g}" for i, t in enumerate(self.thresholds)]
        return "\n".join(lines)


def mi_at(model: ChannelModel, thresholds) -> float:
    """MI of the model quantized at ``thresholds`` (duplicates are merged)."""
    t = np.unique(np.asarray(thresholds, dtype=float))
    return mutual_information(crossover_probabilities(model, t))


def _fast_mi(model: ChannelModel, thresholds: np.ndarray) -> float:
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    table = np.stack([lv.interval_prob(edges[:-1], edges[1:]) for lv in model.levels])
    return float(mutual_information_batch(np.maximum(table, 0.0), model.prior))


def golden_section_max(f, a: float, b: float, tol: float = GOLDEN_TOL):
    """Maximize a unimodal ``f`` on [a, b]; returns (x, f(x)).

    The endpoints are also compared so a boundary maximum is not lost.
    """
    if b < a:
        a, b = b, a
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    best = max(((fc, c), (fd, d), (f(a), a), (f(b), b)), key=lambda p: p[0])
    return best[1], best[0]


def hard_scheme(model: ChannelModel) -> QuantizationScheme:
    t = hard_thresholds(model)
    return QuantizationScheme(t, "hard", mi_at(model, t))


def _symmetric_thresholds(center: float, q: float, reads: int) -> np.ndarray:
    if reads == 1 or q == 0.0:
        return np.array([center])
    if reads == 2:
        return np.array([center - q, center + q])
    return np.array([center - q, center, center + q])


def optimize_symmetric_q(model: ChannelModel, reads: int) -> QuantizationScheme:
    """MMI reads at +-q (plus 0 for three reads) by bisection on the analytic dI/dq."""
    if reads not in (2, 3):
        raise ValueError("symmetric-q supports 2 or 3 reads")
    deriv = mi_derivative_two_reads if reads == 2 else mi_derivative_three_reads
    sigma = model.levels[0].sigma
    lo, hi = 0.0, sigma / 8.0
    while deriv(model, hi) > 0.0:  # an underflowed (flat) slope counts as past the peak
        lo, hi = hi, 2.0 * hi
        if hi > 20.0 * sigma:
            raise ValueError("dI/dq never turns negative; degenerate SNR")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if deriv(model, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    t = _symmetric_thresholds(model.center, q, reads)
    return QuantizationScheme(t, "symmetric-q", mi_at(model, t),
                              {"q": q, "dI_dq": deriv(model, q)})


def single_q_thresholds(model: ChannelModel, q: float) -> np.ndarray:
    h = hard_thresholds(model)
    if q == 0.0:
        return h
    return np.sort(np.concatenate((h - q, h + q)))


def optimize_single_q_mlc(model: ChannelModel) -> QuantizationScheme:
    """Equal-width erasure regions 2q centred on the hard thresholds."""
    if model.num_levels != 4:
        raise ValueError("single-q optimization is defined for four-level cells")
    h = hard_thresholds(model)
    q_max = 0.5 * float(np.min(np.diff(model.means)))

    def objective(q):
        t = np.unique(np.concatenate((h - q, h + q)))
        return _fast_mi(model, t)

    q, _ = golden_section_max(objective, 0.0, q_max)
    t = single_q_thresholds(model, q)
    return QuantizationScheme(t, "single-q", mi_at(model, t), {"q": q})


def _top2_log_ratio(model: ChannelModel, v: float) -> float:
    w = np.sort(model.weighted_logpdf(v))
    return float(w[-1] - w[-2])


def thresholds_from_ratio(model: ChannelModel, R: float) -> np.ndarray:
    """Flanking reads where the largest / second-largest weighted density equals R."""
    if R < 1.0:
        raise ValueError("R must be >= 1")
    h = hard_thresholds(model)
    if R == 1.0:
        return h
    log_r = math.log(R)
    means = model.means
    out = []
    for k, t in enumerate(h):
        for end in (means[k], means[k + 1]):
            g_end = _top2_log_ratio(model, end) - log_r
            if g_end < 0.0:
                raise ValueError(
                    f"ratio R={R} unreachable between {t:.6g} and mean {end:.6g}")
            out.append(brentq(lambda v: _top2_log_ratio(model, v) - log_r,
                              min(t, end), max(t, end), xtol=1e-14))
    return np.sort(np.array(out))


def optimize_constant_ratio(model: ChannelModel, r_grid=None) -> QuantizationScheme:
    """Grid over R, then golden-section refinement around the grid maximum."""
    r_grid = np.arange(1.0, 31.5, 0.5) if r_grid is None else np.asarray(r_grid, float)
    if r_grid.size == 0 or np.any(r_grid < 1.0) or np.any(np.diff(r_grid) <= 0):
        raise ValueError("r_grid must be ascending with all values >= 1")

    def objective(R):
        return _fast_mi(model, thresholds_from_ratio(model, R))

    values = [objective(R) for R in r_grid]
    i = int(np.argmax(values))
    best_r, best_mi = float(r_grid[i]), values[i]
    if r_grid.size > 1:
        lo = r_grid[max(i - 1, 0)]
        hi = r_grid[min(i + 1, r_grid.size - 1)]
        r, v = golden_section_max(objective, lo, hi, tol=1e-8)
        if v > best_mi:
            best_r, best_mi = float(r), v
    t = thresholds_from_ratio(model, best_r)
    return QuantizationScheme(t, "constant-ratio", mi_at(model, t),
                              {"R": best_r, "r_grid": r_grid.tolist(),
                               "mi_grid": [float(v) for v in values]})


def _grid_tables(cdf: np.ndarray, combos: np.ndarray) -> np.ndarray:
    """Transition tables for index tuples into a precomputed CDF grid (M, G)."""
    m = cdf.shape[0]
    n = combos.shape[0]
    c = cdf[:, combos]  # (M, N, k)
    padded = np.concatenate((np.zeros((m, n, 1)), c, np.ones((m, n, 1))), axis=2)
    return np.maximum(np.diff(padded, axis=2), 0.0).transpose(1, 0, 2)


def _grid_values(model, cdf, combos, batch=50_000):
    return np.concatenate([
        mutual_information_batch(_grid_tables(cdf, combos[s:s + batch]), model.prior)
        for s in range(0, combos.shape[0], batch)])


def _basin_starts(values, combos, grid, means, n_starts):
    """Best grid tuple within each of the ``n_starts`` best basins.

    A basin is identified by how many thresholds fall between each pair of
    adjacent level means; MI is far from concave across basins.
    """
    counts = np.stack([np.searchsorted(means, grid[combos[:, j]]) for j in range(combos.shape[1])],
                      axis=1)
    sig = np.stack([(counts == b).sum(axis=1) for b in range(means.size + 1)], axis=1)
    order = np.lexsort((np.arange(values.size), -values))  # MI desc, then lexicographic
    starts, seen = [], set()
    for i in order:
        key = tuple(sig[i])
        if key not in seen:
            seen.add(key)
            starts.append(int(i))
            if len(starts) == n_starts:
                break
    return starts


def _symmetric_combos(grid: np.ndarray, center: float, k: int) -> np.ndarray:
    g = grid.size
    upper = [i for i in range(g) if grid[i] > center + 1e-12]
    mid = [i for i in range(g) if abs(grid[i] - center) <= 1e-12]
    if k % 2 and not mid:
        return np.empty((0, k), dtype=int)
    rows = []
    for pairs in itertools.combinations(upper, k // 2):
        lower = [g - 1 - i for i in reversed(pairs)]
        rows.append(lower + (mid if k % 2 else []) + list(pairs))
    return np.array(sorted(rows), dtype=int).reshape(-1, k)


def _coordinate_refine(model, t, step, lo_bound, hi_bound, symmetric=False,
                       tol=1e-9, max_cycles=2000):
    t = np.array(t, dtype=float)
    k = t.size
    center = model.center
    current = _fast_mi(model, t)
    for cycle in range(max_cycles):
        start = current
        coords = range((k + 1) // 2, k) if symmetric else range(k)
        for j in coords:
            if symmetric:
                mirror = k - 1 - j
                if mirror == j:
                    continue
                left = max(t[j - 1] if j - 1 != mirror else center, t[j] - step)
                right = min(t[j + 1] if j + 1 < k else hi_bound, t[j] + step)

                def f(x, j=j, mirror=mirror):
                    u = t.copy()
                    u[j], u[mirror] = x, 2 * center - x
                    return _fast_mi(model, u) if np.all(np.diff(u) > 0) else -np.inf
            else:
                left = max(t[j - 1] if j > 0 else lo_bound, t[j] - step)
                right = min(t[j + 1] if j + 1 < k else hi_bound, t[j] + step)

                def f(x, j=j):
                    u = t.copy()
                    u[j] = x
                    return _fast_mi(model, u) if np.all(np.diff(u) > 0) else -np.inf
            eps = 1e-12 * max(1.0, abs(left), abs(right))
            x, v = golden_section_max(f, left + eps, right - eps)
            if v > current:
                t[j] = x
                if symmetric:
                    t[k - 1 - j] = 2 * center - x
                current = v
        if current - start < tol:
            return t, current, cycle + 1
    return t, current, max_cycles


def optimize_unconstrained(model: ChannelModel, num_thresholds: int,
                           grid_step: float | None = None,
                           points: int = 21, n_starts: int = 6) -> QuantizationScheme:
    """Coarse brute-force grid over ascending tuples, then golden-section polishing.

    MI is not quasi-concave in several thresholds, so the result is a grid-
    resolution local optimum; the grid spacing is reported in ``params``.
    """
    k = int(num_thresholds)
    if k < 1:
        raise ValueError("need at least one threshold")
    lo, hi = float(model.means[0]), float(model.means[-1])
    if grid_step is None:
        grid = np.linspace(lo, hi, points)
    else:
        grid = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    if grid.size < 3:
        raise ValueError("grid too coarse to bracket: fewer than 3 points per dimension")
    if grid.size < k:
        raise ValueError("grid has fewer points than thresholds")
    step = float(grid[1] - grid[0])
    cdf = np.stack([lv.cdf(grid) for lv in model.levels])
    symmetric = model.is_symmetric

    combos = _symmetric_combos(grid, model.center, k) if symmetric else None
    if combos is None or combos.shape[0] == 0:
        symmetric = False
        combos = np.array(list(itertools.combinations(range(grid.size), k)), dtype=int)
    values = _grid_values(model, cdf, combos)
    grid_mi = float(values.max())
    lo_b, hi_b = lo - step, hi + step
    best_t, best_mi, cycles = None, -np.inf, 0
    for idx in _basin_starts(values, combos, grid, model.means, n_starts):
        t = grid[combos[idx]]
        if symmetric:
            t, mi, c1 = _coordinate_refine(model, t, step, lo_b, hi_b, symmetric=True)
            # released cycle; keep the mirror-symmetric point unless it is beaten
            t_free, free_mi, c2 = _coordinate_refine(model, t, step, lo_b, hi_b)
            if free_mi > mi + 1e-12:
                t, mi = t_free, free_mi
            c = c1 + c2
        else:
            t, mi, c = _coordinate_refine(model, t, step, lo_b, hi_b)
        cycles += c
        if mi > best_mi + 1e-13:
            best_t, best_mi = t, mi
    t = best_t
    return QuantizationScheme(
        t, "unconstrained", mi_at(model, t),
        {"grid_step": step, "grid_points": int(grid.size), "grid_mi": grid_mi,
         "symmetric_start": symmetric, "starts": n_starts, "refine_cycles": cycles})


def uniform_scheme(model: ChannelModel, num_thresholds: int = 63,
                   span_sigmas: float = 4.0) -> QuantizationScheme:
    """Equally spaced reads over the outer means +- span_sigmas level widths.

    With 63 reads this is the stand-in for full-precision (soft) sensing.
    """
    k = int(num_thresholds)
    if k < 1:
        raise ValueError("need at least one threshold")
    lo = model.levels[0].mean - span_sigmas * _spread(model.levels[0])
    hi = model.levels[-1].mean + span_sigmas * _spread(model.levels[-1])
    t = np.linspace(lo, hi, k + 2)[1:-1]
    return QuantizationScheme(t, "uniform", mi_at(model, t), {"span_sigmas": span_sigmas})


def _spread(level) -> float:
    if hasattr(level, "sigma"):
        return float(level.sigma)
    g, f = level.grid, level.pdf(level.grid)
    mu = np.trapezoid(g * f, g)
    return float(np.sqrt(np.trapezoid((g - mu) ** 2 * f, g)))


STRATEGIES = ("hard", "symmetric-q", "single-q", "constant-ratio", "unconstrained", "uniform")


def optimize(model: ChannelModel, strategy: str, reads: int | None = None,
             **kwargs) -> QuantizationScheme:
    """Dispatch by strategy name (CLI and harness entry point)."""
    if strategy == "hard":
        return hard_scheme(model)
    if strategy == "symmetric-q":
        return optimize_symmetric_q(model, reads or 2)
    if strategy == "single-q":
        return optimize_single_q_mlc(model)
    if strategy in ("constant-ratio", "cr"):
        if "R" in kwargs:
            t = thresholds_from_ratio(model, float(kwargs["R"]))
            return QuantizationScheme(t, "constant-ratio", mi_at(model, t),
                                      {"R": float(kwargs["R"])})
        return optimize_constant_ratio(model, kwargs.get("r_grid"))
    if strategy == "unconstrained":
        if reads is None:
            raise ValueError("unconstrained strategy needs a read count")
        return optimize_unconstrained(model, reads, kwargs.get("grid_step"))
    if strategy == "uniform":
        return uniform_scheme(model, reads or 63, kwargs.get("span_sigmas", 4.0))
    raise ValueError(f"unknown strategy {strategy!r}")
