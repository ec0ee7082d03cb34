"""Continuous read-channel models.

Each written level has a conditional threshold-voltage density, either an
analytic Gaussian or a tabulated density on a voltage grid.  Integrating those
densities between word-line voltages gives the transition table of the
quantized channel.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .mi import BitLabeling, Dmc

MIN_TABULATED_POINTS = 512


@dataclass(frozen=True)
class GaussianLevel:
    mean: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.sigma)):
            raise ValueError("Gaussian level parameters must be finite")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def pdf(self, v):
        z = (np.asarray(v, dtype=float) - self.mean) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * np.sqrt(2 * np.pi))

    def logpdf(self, v):
        z = (np.asarray(v, dtype=float) - self.mean) / self.sigma
        return -0.5 * z * z - np.log(self.sigma * np.sqrt(2 * np.pi))

    def cdf(self, v):
        return ndtr((np.asarray(v, dtype=float) - self.mean) / self.sigma)

    def interval_prob(self, lo, hi):
        """P(lo < V <= hi), evaluated on the tail that avoids cancellation."""
        a = (np.asarray(lo, dtype=float) - self.mean) / self.sigma
        b = (np.asarray(hi, dtype=float) - self.mean) / self.sigma
        upper = ndtr(-a) - ndtr(-b)
        lower = ndtr(b) - ndtr(a)
        middle = 1.0 - ndtr(a) - ndtr(-b)
        return np.where(a >= 0, upper, np.where(b <= 0, lower, middle))

    def sample(self, rng: np.random.Generator, size):
        return self.mean + self.sigma * rng.standard_normal(size)

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "mean": self.mean, "sigma": self.sigma}


@dataclass(frozen=True, eq=False)
class TabulatedLevel:
    """Piecewise-linear density on an ascending voltage grid.

    The CDF is the exact integral of the linear interpolant, i.e. trapezoidal
    quadrature on the stored grid, normalized so the total mass is one.
    """

    grid: np.ndarray
    density: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)
    _mass: float = field(init=False, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        density = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.shape != density.shape:
            raise ValueError("grid and density must be 1-D arrays of equal length")
        if grid.size < MIN_TABULATED_POINTS:
            raise ValueError(f"tabulated densities need >= {MIN_TABULATED_POINTS} points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        if np.any(density < 0):
            raise ValueError("density must be nonnegative")
        seg = 0.5 * (density[1:] + density[:-1]) * np.diff(grid)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        if abs(cum[-1] - 1.0) > 1e-6:
            raise ValueError(f"tabulated density integrates to {cum[-1]!r}, not 1")
        for name, val in (("grid", grid), ("density", density), ("_cum", cum / cum[-1])):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "_mass", float(cum[-1]))

    @property
    def mean(self) -> float:
        g, f = self.grid, self.density / self._mass
        return float(np.trapezoid(g * f, g))

    def pdf(self, v):
        return np.interp(v, self.grid, self.density, left=0.0, right=0.0) / self._mass

    def logpdf(self, v):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(v))

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        g = self.grid
        k = np.clip(np.searchsorted(g, v, side="right") - 1, 0, g.size - 2)
        fk = self.density[k] / self._mass
        fv = self.pdf(np.clip(v, g[0], g[-1]))
        d = np.clip(v, g[0], g[-1]) - g[k]
        out = self._cum[k] + 0.5 * (fk + fv) * d
        return np.clip(np.where(v <= g[0], 0.0, np.where(v >= g[-1], 1.0, out)), 0.0, 1.0)

    def interval_prob(self, lo, hi):
        return np.maximum(self.cdf(hi) - self.cdf(lo), 0.0)

    def sample(self, rng: np.random.Generator, size):
        u = rng.random(size)
        g = self.grid
        f = self.density / self._mass
        k = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, g.size - 2)
        r = u - self._cum[k]
        slope = (f[k + 1] - f[k]) / (g[k + 1] - g[k])
        disc = np.sqrt(np.maximum(f[k] ** 2 + 2.0 * slope * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(f[k] + disc > 0, 2.0 * r / (f[k] + disc), 0.0)
        return np.minimum(g[k] + d, g[k + 1])

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "grid": self.grid.tolist(),
                "density": self.density.tolist()}


def _level_from_dict(doc: dict):
    kind = doc.get("kind", "gaussian")
    if kind == "gaussian":
        return GaussianLevel(float(doc["mean"]), float(doc["sigma"]))
    if kind == "tabulated":
        if "csv" in doc:
            return load_tabulated_csv(doc["csv"])
        return TabulatedLevel(np.asarray(doc["grid"]), np.asarray(doc["density"]))
    raise ValueError(f"unknown level kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Per-level conditional threshold-voltage densities plus an input prior."""

    levels: tuple
    prior: np.ndarray = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) < 2:
            raise ValueError("a read channel needs at least two levels")
        means = np.array([lv.mean for lv in levels])
        if np.any(np.diff(means) <= 0):
            raise ValueError(f"level means must be strictly increasing: {means}")
        m = len(levels)
        prior = (np.full(m, 1.0 / m) if self.prior is None
                 else np.asarray(self.prior, dtype=float))
        if prior.shape != (m,) or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError("prior must be a probability vector over the levels")
        prior.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "prior", prior)

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def means(self) -> np.ndarray:
        return np.array([lv.mean for lv in self.levels])

    @property
    def is_gaussian(self) -> bool:
        return all(isinstance(lv, GaussianLevel) for lv in self.levels)

    @property
    def is_symmetric(self) -> bool:
        """Mirror-symmetric about the midpoint of the outer means."""
        if not self.is_gaussian:
            return False
        mu = self.means
        sig = np.array([lv.sigma for lv in self.levels])
        c = 0.5 * (mu[0] + mu[-1])
        return bool(np.allclose(mu - c, -(mu[::-1] - c), atol=1e-12)
                    and np.allclose(sig, sig[::-1], rtol=1e-12)
                    and np.allclose(self.prior, self.prior[::-1], atol=1e-15))

    @property
    def center(self) -> float:
        return 0.5 * (self.means[0] + self.means[-1])

    def default_labeling(self) -> BitLabeling:
        return BitLabeling.default_for(self.num_levels)

    def weighted_logpdf(self, v) -> np.ndarray:
        """log(prior_i f_i(v)) stacked over levels, shape (M, ...)."""
        with np.errstate(divide="ignore"):
            return np.stack([np.log(p) + lv.logpdf(v)
                             for p, lv in zip(self.prior, self.levels)])

    def sample(self, levels_idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Threshold voltages for cells written with the given level indices."""
        out = np.empty(levels_idx.shape, dtype=float)
        for i, lv in enumerate(self.levels):
            sel = levels_idx == i
            cnt = int(sel.sum())
            if cnt:
                out[sel] = lv.sample(rng, cnt)
        return out

    def to_dict(self) -> dict:
        if self.kind in ("gaussian_slc", "gaussian_mlc") and self.params:
            return {"type": self.kind, **self.params}
        doc = {"type": self.kind if self.kind in ("surrogate", "tabulated") else "tabulated",
               "levels": [lv.to_dict() for lv in self.levels],
               "prior": self.prior.tolist()}
        if self.kind == "surrogate":
            doc["calibration_note"] = self.params.get("calibration_note", "")
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def make_slc_gaussian(snr_db: float) -> ChannelModel:
    """Two Gaussian levels at -1 and +1 (Es = 1), SNR = Es / (N0/2)."""
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    sigma = 10.0 ** (-snr_db / 20.0)
    return ChannelModel(
        (GaussianLevel(-1.0, sigma), GaussianLevel(1.0, sigma)),
        kind="gaussian_slc", params={"snr_db": float(snr_db)})


def mlc_sigma_from_snr(snr_db: float, means=(-3.0, -1.0, 1.0, 3.0)) -> float:
    """Noise sigma for SNR = Es / (N0/2) with Es the average symbol energy."""
    es = float(np.mean(np.square(means)))
    return float(np.sqrt(es / 10.0 ** (snr_db / 10.0)))


def make_mlc_gaussian(means=(-3.0, -1.0, 1.0, 3.0), sigma: float | None = None,
                      snr_db: float | None = None) -> ChannelModel:
    """Four equal-variance Gaussian levels with a uniform prior.

    Give either ``sigma`` directly or ``snr_db`` (average-symbol-energy
    convention).
    """
    means = tuple(float(m) for m in means)
    if len(means) != 4:
        raise ValueError("MLC model needs exactly four means")
    if np.any(np.diff(means) <= 0):
        raise ValueError(f"MLC means must be strictly increasing: {means}")
    if (sigma is None) == (snr_db is None):
        raise ValueError("give exactly one of sigma or snr_db")
    params = {"means": list(means)}
    if sigma is None:
        sigma = mlc_sigma_from_snr(snr_db, means)
        params["snr_db"] = float(snr_db)
    else:
        params["sigma"] = float(sigma)
    return ChannelModel(tuple(GaussianLevel(m, sigma) for m in means),
                        kind="gaussian_mlc", params=params)


@dataclass(frozen=True)
class RetentionSurrogateParams:
    """Per-level (mean, sigma) pairs for the asymmetric retention surrogate."""

    means: tuple
    sigmas: tuple
    calibration_note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if len(self.means) != 4 or len(self.sigmas) != 4:
            raise ValueError("retention surrogate has four levels")
        if any(s <= 0 for s in self.sigmas):
            raise ValueError("sigmas must be positive")
        if not all(self.sigmas[0] > s for s in self.sigmas[1:]):
            raise ValueError("the lowest level must have strictly the largest sigma")

    def scaled(self, factor: float) -> "RetentionSurrogateParams":
        return RetentionSurrogateParams(
            self.means, tuple(factor * s for s in self.sigmas), self.calibration_note)


# Shape chosen to mimic charge loss after retention: the erased level is wide
# and the programmed levels sag toward lower voltages with growing spread.
# SURROGATE_SCALE was fixed by calibrate_retention_surrogate() so that the
# unconstrained 6-read MMI is 1.885 bits.
SURROGATE_MEANS = (-3.0, -1.05, 0.9, 2.8)
SURROGATE_SHAPE = (1.6, 0.9, 0.95, 1.0)
SURROGATE_SCALE = 0.4164305144169724

DEFAULT_SURROGATE = RetentionSurrogateParams(
    SURROGATE_MEANS,
    tuple(SURROGATE_SCALE * s for s in SURROGATE_SHAPE),
    calibration_note=(
        "Gaussian levels, means (-3, -1.05, 0.9, 2.8), sigmas proportional to "
        "(1.6, 0.9, 0.95, 1.0); common scale bisected so the unconstrained "
        "6-threshold MMI equals 1.885 bits"),
)


def make_retention_surrogate(params: RetentionSurrogateParams = DEFAULT_SURROGATE
                             ) -> ChannelModel:
    levels = tuple(GaussianLevel(m, s) for m, s in zip(params.means, params.sigmas))
    return ChannelModel(levels, kind="surrogate",
                        params={"calibration_note": params.calibration_note})


def calibrate_retention_surrogate(target_mmi: float = 1.885,
                                  means=SURROGATE_MEANS, shape=SURROGATE_SHAPE,
                                  tol: float = 1e-10) -> RetentionSurrogateParams:
    """Bisect the common sigma scale so the 6-read unconstrained MMI hits target."""
    from .quantopt import optimize_unconstrained

    def mmi(scale):
        p = RetentionSurrogateParams(means, tuple(scale * s for s in shape))
        return optimize_unconstrained(make_retention_surrogate(p), 6).achieved_mi

    scale = brentq(lambda s: mmi(s) - target_mmi, 0.2, 0.8, xtol=tol)
    return RetentionSurrogateParams(
        means, tuple(scale * s for s in shape),
        calibration_note=f"common sigma scale {scale:.10f} bisected to MMI {target_mmi}")


def crossover_probabilities(model: ChannelModel, thresholds) -> Dmc:
    """Transition table of the channel quantized at the given word-line voltages."""
    t = np.asarray(thresholds, dtype=float).ravel()
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"thresholds must be strictly ascending: {t}")
    edges = np.concatenate(([-np.inf], t, [np.inf]))
    table = np.stack([lv.interval_prob(edges[:-1], edges[1:]) for lv in model.levels])
    table = np.maximum(table, 0.0)
    table /= table.sum(axis=1, keepdims=True)
    return Dmc(table, model.prior)


def hard_thresholds(model: ChannelModel) -> np.ndarray:
    """Crossing points of adjacent prior-weighted densities, between the means."""
    out = []
    means = model.means
    for i in range(model.num_levels - 1):
        lo, hi = means[i], means[i + 1]

        def gap(v, i=i):
            w = model.weighted_logpdf(v)
            return float(w[i] - w[i + 1])

        g_lo, g_hi = gap(lo), gap(hi)
        if not (g_lo > 0 > g_hi):
            raise ValueError(f"no density crossing between means {lo} and {hi}")
        out.append(brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return np.array(out)


def load_tabulated_csv(path) -> TabulatedLevel:
    """Two-column CSV (voltage, density); lines starting with '#' are skipped."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                continue  # header line
    arr = np.array(rows, dtype=float)
    return TabulatedLevel(arr[:, 0], arr[:, 1])


def model_from_dict(doc: dict) -> ChannelModel:
    kind = doc.get("type")
    if kind == "gaussian_slc":
        return make_slc_gaussian(float(doc["snr_db"]))
    if kind == "gaussian_mlc":
        means = doc.get("means", (-3.0, -1.0, 1.0, 3.0))
        if "snr_db" in doc:
            return make_mlc_gaussian(means, snr_db=float(doc["snr_db"]))
        return make_mlc_gaussian(means, sigma=float(doc["sigma"]))
    if kind == "surrogate":
        if "levels" not in doc:
            return make_retention_surrogate()
        params = RetentionSurrogateParams(
            [lv["mean"] for lv in doc["levels"]],
            [lv["sigma"] for lv in doc["levels"]],
            doc.get("calibration_note", ""))
        return make_retention_surrogate(params)
    if kind == "tabulated":
        levels = tuple(_level_from_dict(lv) for lv in doc["levels"])
        return ChannelModel(levels, doc.get("prior"), kind="tabulated")
    raise ValueError(f"unknown channel model type {kind!r}")


def load_model(path) -> ChannelModel:
    doc = json.loads(Path(path).read_text())
    base = Path(path).parent
    for lv in doc.get("levels", []):
        if "csv" in lv and not Path(lv["csv"]).is_absolute():
            lv["csv"] = str(base / lv["csv"])
    return model_from_dict(doc)


def tabulate(level: GaussianLevel, num_points: int = 1024, span: float = 8.0
             ) -> TabulatedLevel:
    """Sample a Gaussian level onto a grid (useful for exercising quadrature)."""
    grid = np.linspace(level.mean - span * level.sigma, level.mean + span * level.sigma,
                       num_points)
    dens = level.pdf(grid)
    mass = np.trapezoid(dens, grid)
    return TabulatedLevel(grid, dens / mass)
