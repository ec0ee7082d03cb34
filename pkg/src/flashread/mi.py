"""Mutual information of quantized read channels.

A read with ``K - 1`` word-line voltages turns the continuous threshold-voltage
channel into an ``M``-input, ``K``-output discrete memoryless channel (DMC).
This module holds the DMC value type, its mutual information, the closed-form
derivatives for the symmetric SLC two- and three-read cases, and the per-bit
LLR tables handed to the LDPC decoder.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr

LLR_MAX = 30.0

ROW_TOL = 1e-9


@dataclass(frozen=True)
class BitLabeling:
    """Bit strings assigned to the input levels, lowest voltage first."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be distinct: {labels}")
        widths = {len(s) for s in labels}
        if len(widths) != 1 or any(c not in "01" for s in labels for c in s):
            raise ValueError(f"labels must be equal-width bit strings: {labels}")

    @property
    def bits_per_symbol(self) -> int:
        return len(self.labels[0])

    def bit_matrix(self) -> np.ndarray:
        """(M, bits) array of label bits, MSB in column 0."""
        return np.array([[int(c) for c in s] for s in self.labels], dtype=np.int8)

    @classmethod
    def slc(cls) -> "BitLabeling":
        # the low-voltage level stores "1", the high one "0"
        return cls(("1", "0"))

    @classmethod
    def gray(cls) -> "BitLabeling":
        return cls(("00", "01", "11", "10"))

    @classmethod
    def default_for(cls, num_levels: int) -> "BitLabeling":
        if num_levels == 2:
            return cls.slc()
        if num_levels == 4:
            return cls.gray()
        raise ValueError(f"no default labeling for {num_levels} levels")


@dataclass(frozen=True)
class Dmc:
    """Transition table ``P(y | x)`` with one row per input level."""

    table: np.ndarray
    prior: np.ndarray = field(default=None)

    def __post_init__(self):
        table = np.atleast_2d(np.asarray(self.table, dtype=float))
        m = table.shape[0]
        prior = (np.full(m, 1.0 / m) if self.prior is None
                 else np.asarray(self.prior, dtype=float))
        if prior.shape != (m,):
            raise ValueError("prior length must equal the number of inputs")
        if np.any(table < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if np.any(np.abs(table.sum(axis=1) - 1.0) > ROW_TOL):
            raise ValueError("every row of the transition table must sum to 1")
        table.setflags(write=False)
        prior.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "prior", prior)

    @property
    def num_inputs(self) -> int:
        return self.table.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.table.shape[1]

    def output_distribution(self) -> np.ndarray:
        return self.prior @ self.table

    def to_dict(self, labeling: BitLabeling | None = None) -> dict:
        doc = {
            "num_inputs": self.num_inputs,
            "num_outputs": self.num_outputs,
            "table": self.table.ravel().tolist(),
            "prior": self.prior.tolist(),
        }
        if labeling is not None:
            doc["labeling"] = list(labeling.labels)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Dmc":
        table = np.asarray(doc["table"], dtype=float).reshape(
            doc["num_inputs"], doc["num_outputs"])
        return cls(table, doc.get("prior"))

    def to_json(self, labeling: BitLabeling | None = None) -> str:
        return json.dumps(self.to_dict(labeling))


def entropy_bits(p) -> float:
    """Shannon entropy in bits with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def mutual_information(dmc: Dmc) -> float:
    """I(X;Y) = H(Y) - H(Y|X) in bits."""
    h_y = entropy_bits(dmc.output_distribution())
    h_y_x = sum(px * entropy_bits(row) for px, row in zip(dmc.prior, dmc.table))
    mi = h_y - h_y_x
    return float(min(max(mi, 0.0), np.log2(dmc.num_inputs)))


def mutual_information_batch(tables: np.ndarray, prior: np.ndarray) -> np.ndarray:
    """MI of a stack of transition tables shaped (..., M, K); no validation."""
    tables = np.asarray(tables, dtype=float)
    prior = np.asarray(prior, dtype=float)
    joint = tables * prior[:, None]
    py = joint.sum(axis=-2)
    with np.errstate(divide="ignore", invalid="ignore"):
        h_y = -np.sum(np.where(py > 0, py * np.log2(py), 0.0), axis=-1)
        h_yx = -np.sum(np.where(joint > 0, joint * np.log2(tables), 0.0),
                       axis=(-2, -1))
    return h_y - h_yx


def _slc_parameters(model) -> tuple[float, float]:
    levels = model.levels
    if len(levels) != 2 or not all(hasattr(lv, "sigma") for lv in levels):
        raise ValueError("analytic derivative needs a two-level Gaussian model")
    lo, hi = levels
    if not (np.isclose(lo.sigma, hi.sigma, rtol=0, atol=1e-15)
            and np.isclose(lo.mean, -hi.mean, rtol=0, atol=1e-15)):
        raise ValueError("analytic derivative needs a symmetric SLC model")
    if not np.allclose(model.prior, 0.5, rtol=0, atol=1e-15):
        raise ValueError("analytic derivative needs equiprobable inputs")
    return hi.mean, lo.sigma


def _noise_pdf(x: float, sigma: float) -> float:
    return float(np.exp(-0.5 * (x / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi)))


def _q(x: float) -> float:
    return float(ndtr(-x))


LN2 = float(np.log(2.0))


def _log_q(x: float) -> float:
    return float(log_ndtr(-x))


def mi_derivative_two_reads(model, q: float) -> float:
    """dI/dq for the symmetric pair of reads at -q and +q (bits per volt).

    Region masses enter through their logs so deep tails do not underflow.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    amp, sigma = _slc_parameters(model)
    lp1 = float(log_ndtr((amp - q) / sigma))       # 1 - Q((amp - q)/sigma)
    lp3 = _log_q((amp + q) / sigma)
    lp13 = float(np.logaddexp(lp1, lp3))
    f_minus = _noise_pdf(amp - q, sigma)
    f_plus = _noise_pdf(amp + q, sigma)
    return float((f_plus * (lp13 - LN2 - lp3) + f_minus * (lp13 - LN2 - lp1)) / LN2)


def mi_derivative_three_reads(model, q: float) -> float:
    """dI/dq for reads at -q, 0 and +q (bits per volt).

    At q = 0 the two inner regions vanish; the limit is taken analytically
    (each inner region carries half of the merged mass).
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    amp, sigma = _slc_parameters(model)
    lp1 = float(log_ndtr((amp - q) / sigma))
    lp4 = _log_q((amp + q) / sigma)
    lp14 = float(np.logaddexp(lp1, lp4))
    f_minus = _noise_pdf(amp - q, sigma)
    f_plus = _noise_pdf(amp + q, sigma)
    if q == 0.0:
        # p2 / p23 -> f- / (f- + f+) = 1/2, likewise p3 / p23
        inner = -(f_minus + f_plus) * LN2
    else:
        p2 = _q((amp - q) / sigma) - _q(amp / sigma)
        p3 = _q(amp / sigma) - _q((amp + q) / sigma)
        p23 = p2 + p3
        inner = sum(f * np.log(p / p23) for f, p in ((f_minus, p2), (f_plus, p3)) if f > 0)
    return float((f_minus * (lp14 - lp1) + f_plus * (lp14 - lp4) + inner) / LN2)


def bit_llrs(dmc: Dmc, labeling: BitLabeling) -> np.ndarray:
    """Per-output, per-bit LLR table ``log P(b=0 | y) / P(b=1 | y)``.

    Shape is (K, bits). Infinite magnitudes are clipped to +-LLR_MAX.
    """
    if len(labeling.labels) != dmc.num_inputs:
        raise ValueError("labeling size must match the number of inputs")
    bits = labeling.bit_matrix()
    joint = dmc.table * dmc.prior[:, None]  # (M, K)
    out = np.empty((dmc.num_outputs, bits.shape[1]))
    for b in range(bits.shape[1]):
        zero = joint[bits[:, b] == 0].sum(axis=0)
        one = joint[bits[:, b] == 1].sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            llr = np.log(zero) - np.log(one)
        llr = np.where(np.isnan(llr), 0.0, llr)
        out[:, b] = np.clip(llr, -LLR_MAX, LLR_MAX)
    return out
