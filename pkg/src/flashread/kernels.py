"""Backend selection for the hot loops.

The Cython extension ``flashread._kernels`` is used when it imports; otherwise
(or with ``FLASHREAD_PURE=1``) the pure-Python mirror in ``_fallback`` is used.
"""
import os

from . import _fallback

if os.environ.get("FLASHREAD_PURE"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

bp_decode_layered = _impl.bp_decode_layered
peg_construct = _impl.peg_construct
boxplus_pmf = _impl.boxplus_pmf

__all__ = ["BACKEND", "bp_decode_layered", "peg_construct", "boxplus_pmf", "_fallback"]
