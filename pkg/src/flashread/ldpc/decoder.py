"""Check-serial (layered) sum-product decoding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .code import LdpcCode

MAX_ITER = 50


@dataclass(frozen=True)
class DecodeResult:
    bits: np.ndarray
    converged: bool
    iterations: int
    posterior: np.ndarray


def decode_bp(code: LdpcCode, channel_llrs, max_iter: int = MAX_ITER,
              early_stop: bool = True) -> DecodeResult:
    """Layered sum-product with exact tanh-rule check updates.

    LLRs are log P(bit=0)/P(bit=1).  Checks are processed in index order,
    each immediately refreshing the posteriors of its variables.  After every
    sweep the hard decision (L < 0 -> 1) is tested against H; decoding stops
    on the first sweep that satisfies every check unless ``early_stop`` is off.
    A posterior of exactly zero is an undecided bit and never satisfies a check.
    """
    llr = np.ascontiguousarray(channel_llrs, dtype=np.float64)
    if llr.shape != (code.n,):
        raise ValueError(f"expected {code.n} LLRs, got shape {llr.shape}")
    if not np.all(np.isfinite(llr)):
        raise ValueError("LLRs must be finite")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    posterior = np.empty(code.n, dtype=np.float64)
    edge_msg = np.empty(code.num_edges, dtype=np.float64)
    ok, iters = kernels.bp_decode_layered(code.chk_ptr, code.chk_var, llr, int(max_iter),
                                          posterior, edge_msg, bool(early_stop))
    bits = (posterior < 0.0).astype(np.uint8)
    return DecodeResult(bits, bool(ok), int(iters), posterior)
