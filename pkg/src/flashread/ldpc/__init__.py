"""LDPC codes: degree distributions, PEG/ACE construction, encoding, BP decoding."""
from .absorbing import AbsorbingSetReport, absorbing_profile, scan_absorbing_sets
from .code import (LdpcCode, construct_peg_ace, girth, load_code, read_alist, save_code,
                   write_alist)
from .decoder import MAX_ITER, DecodeResult, decode_bp
from .degree import (BUILTIN, CODE1, CODE2, CODE3, FRAME_K, TARGET_RATE, DegreeDistribution,
                     default_length, resolve_dd)

__all__ = [
    "AbsorbingSetReport", "absorbing_profile", "scan_absorbing_sets", "LdpcCode",
    "construct_peg_ace", "girth", "load_code", "read_alist", "save_code", "write_alist",
    "MAX_ITER", "DecodeResult", "decode_bp", "BUILTIN", "CODE1", "CODE2", "CODE3", "FRAME_K",
    "TARGET_RATE", "DegreeDistribution", "default_length", "resolve_dd",
]
