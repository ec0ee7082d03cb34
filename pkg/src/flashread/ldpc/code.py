"""Sparse parity-check codes, GF(2) encoding, PEG/ACE construction and alist I/O."""
from __future__ import annotations

import json
from functools import cached_property
from pathlib import Path

import numpy as np

from .. import kernels
from .degree import DegreeDistribution, default_length

DEFAULT_D_ACE = 4
DEFAULT_ETA_ACE = 4


class LdpcCode:
    """Binary code defined by a sparse H, stored check-major (CSR).

    Instances are treated as immutable; the encoder is built lazily on first use.
    """

    def __init__(self, n: int, chk_ptr, chk_var, metadata: dict | None = None):
        self.n = int(n)
        self.chk_ptr = np.ascontiguousarray(chk_ptr, dtype=np.int32)
        self.chk_var = np.ascontiguousarray(chk_var, dtype=np.int32)
        self.m = self.chk_ptr.size - 1
        if self.m < 0 or self.chk_ptr[0] != 0 or self.chk_ptr[-1] != self.chk_var.size:
            raise ValueError("malformed check pointer array")
        if np.any(np.diff(self.chk_ptr) < 0):
            raise ValueError("check pointers must be non-decreasing")
        if self.chk_var.size and (self.chk_var.min() < 0 or self.chk_var.max() >= self.n):
            raise ValueError("variable index out of range")
        rows = np.repeat(np.arange(self.m), np.diff(self.chk_ptr))
        if np.unique(rows.astype(np.int64) * max(self.n, 1) + self.chk_var).size != rows.size:
            raise ValueError("repeated edge in H")
        self.metadata = dict(metadata or {})
        for arr in (self.chk_ptr, self.chk_var):
            arr.flags.writeable = False

    # construction helpers -------------------------------------------------
    @classmethod
    def from_edges(cls, n: int, m: int, checks, variables, metadata=None) -> "LdpcCode":
        checks = np.asarray(checks, dtype=np.int64)
        variables = np.asarray(variables, dtype=np.int64)
        order = np.lexsort((variables, checks))
        checks, variables = checks[order], variables[order]
        ptr = np.zeros(m + 1, dtype=np.int64)
        np.add.at(ptr, checks + 1, 1)
        return cls(n, np.cumsum(ptr), variables, metadata)

    @classmethod
    def from_dense(cls, H, metadata=None) -> "LdpcCode":
        H = np.asarray(H) % 2
        r, c = np.nonzero(H)
        return cls.from_edges(H.shape[1], H.shape[0], r, c, metadata)

    def to_dense(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[self.edge_checks, self.chk_var] = 1
        return H

    # structure --------------------------------------------------------------
    @cached_property
    def edge_checks(self) -> np.ndarray:
        return np.repeat(np.arange(self.m, dtype=np.int32), np.diff(self.chk_ptr))

    @property
    def num_edges(self) -> int:
        return int(self.chk_var.size)

    @cached_property
    def check_degrees(self) -> np.ndarray:
        return np.diff(self.chk_ptr)

    @cached_property
    def variable_degrees(self) -> np.ndarray:
        return np.bincount(self.chk_var, minlength=self.n)

    @cached_property
    def var_adjacency(self) -> tuple:
        """(var_ptr, var_chk): variable-major view of the same edges."""
        order = np.argsort(self.chk_var, kind="stable")
        var_ptr = np.concatenate(([0], np.cumsum(self.variable_degrees)))
        return var_ptr, self.edge_checks[order]

    def checks_of(self, v: int) -> np.ndarray:
        ptr, chk = self.var_adjacency
        return chk[ptr[v]:ptr[v + 1]]

    def vars_of(self, c: int) -> np.ndarray:
        return self.chk_var[self.chk_ptr[c]:self.chk_ptr[c + 1]]

    def syndrome(self, bits) -> np.ndarray:
        """H·bits mod 2; ``bits`` may carry leading batch axes."""
        vals = np.asarray(bits, dtype=np.int64)[..., self.chk_var] & 1
        cs = np.concatenate((np.zeros(vals.shape[:-1] + (1,), dtype=np.int64),
                             np.cumsum(vals, axis=-1)), axis=-1)
        return (cs[..., self.chk_ptr[1:]] - cs[..., self.chk_ptr[:-1]]) & 1

    def is_codeword(self, bits) -> bool:
        return not np.any(self.syndrome(bits))

    # encoding -------------------------------------------------------------
    @cached_property
    def _encoder(self) -> "_Gf2Encoder":
        return _Gf2Encoder(self.to_dense())

    @property
    def rank(self) -> int:
        return self._encoder.rank

    @property
    def k(self) -> int:
        return self.n - self.rank

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def info_positions(self) -> np.ndarray:
        """Codeword positions that carry the message (systematic positions)."""
        return self._encoder.free

    def encode(self, message) -> np.ndarray:
        return self._encoder.encode(message)

    def __repr__(self):
        return f"LdpcCode(n={self.n}, m={self.m}, edges={self.num_edges})"


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array into little-endian uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    width = -(-bits.shape[-1] // 64) * 64
    pad = np.zeros(bits.shape[:-1] + (width,), dtype=np.uint8)
    pad[..., :bits.shape[-1]] = bits
    return np.packbits(pad, axis=-1, bitorder="little").view("<u8")


class _Gf2Encoder:
    """Gauss-Jordan reduction of H with packed rows.

    Pivot columns hold parity bits, the remaining (free) columns hold the
    message; each parity bit is the GF(2) inner product of a dense row of the
    reduced matrix with the message.
    """

    def __init__(self, H: np.ndarray):
        m, n = H.shape
        A = _pack(H) if m else np.zeros((0, 1), dtype=np.uint64)
        pivots = []
        r = 0
        for j in range(n):
            if r == m:
                break
            w, b = j >> 6, np.uint64(1 << (j & 63))
            hits = np.flatnonzero(A[r:, w] & b)
            if hits.size == 0:
                continue
            p = r + hits[0]
            if p != r:
                A[[r, p]] = A[[p, r]]
            rows = np.flatnonzero(A[:, w] & b)
            rows = rows[rows != r]
            A[rows] ^= A[r]
            pivots.append(j)
            r += 1
        self.n = n
        self.rank = r
        self.pivots = np.array(pivots, dtype=np.int64)
        mask = np.ones(n, dtype=bool)
        mask[self.pivots] = False
        self.free = np.flatnonzero(mask)
        if r:
            dense = np.unpackbits(A[:r].view(np.uint8), axis=1, bitorder="little")[:, :n]
            self.parity_block = _pack(dense[:, self.free])
        else:
            self.parity_block = np.zeros((0, 1), dtype=np.uint64)

    @property
    def k(self) -> int:
        return self.n - self.rank

    def encode(self, message) -> np.ndarray:
        msg = np.asarray(message, dtype=np.uint8)
        if msg.shape[-1] != self.k:
            raise ValueError(f"message length {msg.shape[-1]} != k = {self.k}")
        if np.any(msg > 1):
            raise ValueError("message must be binary")
        packed = _pack(msg)
        prod = packed[..., None, :] & self.parity_block
        parity = (np.bitwise_count(prod).sum(axis=-1) & 1).astype(np.uint8)
        out = np.zeros(msg.shape[:-1] + (self.n,), dtype=np.uint8)
        out[..., self.free] = msg
        out[..., self.pivots] = parity
        return out


def construct_peg_ace(dd: DegreeDistribution, n: int | None = None, seed: int = 0,
                      d_ace: int = DEFAULT_D_ACE, eta_ace: int = DEFAULT_ETA_ACE,
                      soft_check_degrees: bool = False) -> LdpcCode:
    """Progressive-edge-growth graph with ACE-based tie-breaking.

    Variable nodes are placed in increasing-degree order.  Each new edge goes
    to a check outside the current local tree (or at maximal depth), then to
    the least-loaded such check, then to the one whose closing path has the
    largest approximate cycle extrinsic message degree.  Remaining ties are
    broken by a seeded splitmix64 stream, so a (dd, n, seed) triple fixes H.
    """
    n = default_length() if n is None else int(n)
    if n < 2:
        raise ValueError("n must be >= 2")
    vcounts = dd.variable_degree_counts(n)
    var_deg = np.repeat(sorted(vcounts), [vcounts[d] for d in sorted(vcounts)]).astype(np.int32)
    num_edges = int(var_deg.sum())
    ccounts = dd.check_degree_counts(num_edges)
    chk_target = np.repeat(sorted(ccounts), [ccounts[d] for d in sorted(ccounts)]).astype(np.int32)
    if chk_target.size == 0 or chk_target.max() > n:
        raise ValueError("infeasible degree sequence")
    edge_chk, hist, viol, overflow = kernels.peg_construct(var_deg, chk_target, np.uint64(seed & (2**64 - 1)),
                                                 int(d_ace), int(eta_ace),
                                                 bool(soft_check_degrees))
    var_of_edge = np.repeat(np.arange(n), var_deg)
    closed = {int(L): int(c) for L, c in enumerate(hist) if c}
    meta = {
        "dd": dd.to_dict(),
        "n": n,
        "seed": int(seed),
        "d_ace": int(d_ace),
        "eta_ace": int(eta_ace),
        "variable_degree_counts": {str(d): int(c) for d, c in vcounts.items() if c},
        "check_degree_counts": {str(d): int(c) for d, c in ccounts.items() if c},
        "cycle_closure_histogram": {str(k): v for k, v in closed.items()},
        "girth_lower_bound": min(closed) if closed else None,
        "ace_violations": int(viol),
        "soft_check_degrees": bool(soft_check_degrees),
        "check_overflow_edges": int(overflow),
        "backend": kernels.BACKEND,
    }
    return LdpcCode.from_edges(n, chk_target.size, edge_chk, var_of_edge, meta)


def girth(code: LdpcCode, limit: int | None = None) -> float:
    """Exact girth by BFS from every variable node (small codes only)."""
    ptr, chk = code.var_adjacency
    best = np.inf
    for root in range(code.n):
        # BFS over the bipartite graph; nodes are ('v', i) / ('c', j)
        dist = {("v", root): 0}
        parent = {("v", root): None}
        queue = [("v", root)]
        head = 0
        while head < len(queue):
            node = queue[head]
            head += 1
            d = dist[node]
            if 2 * d >= best or (limit is not None and d > limit):
                break
            kind, idx = node
            nbrs = [("c", int(c)) for c in chk[ptr[idx]:ptr[idx + 1]]] if kind == "v" \
                else [("v", int(v)) for v in code.vars_of(idx)]
            for nb in nbrs:
                if nb == parent[node]:
                    continue
                if nb in dist:
                    best = min(best, d + dist[nb] + 1)
                else:
                    dist[nb] = d + 1
                    parent[nb] = node
                    queue.append(nb)
    return best


# alist ---------------------------------------------------------------------
def write_alist(code: LdpcCode, path) -> None:
    ptr, chk = code.var_adjacency
    vdeg, cdeg = code.variable_degrees, code.check_degrees
    mv, mc = int(vdeg.max(initial=0)), int(cdeg.max(initial=0))
    lines = [f"{code.n} {code.m}", f"{mv} {mc}",
             " ".join(map(str, vdeg)), " ".join(map(str, cdeg))]
    for v in range(code.n):
        row = [int(c) + 1 for c in chk[ptr[v]:ptr[v + 1]]]
        lines.append(" ".join(map(str, row + [0] * (mv - len(row)))))
    for c in range(code.m):
        row = [int(v) + 1 for v in code.vars_of(c)]
        lines.append(" ".join(map(str, row + [0] * (mc - len(row)))))
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path, metadata: dict | None = None) -> LdpcCode:
    """Read MacKay's alist format; zero padding in the index lists is optional."""
    toks = Path(path).read_text().split()
    try:
        vals = [int(t) for t in toks]
        n, m = vals[0], vals[1]
        pos = 4
        vdeg = vals[pos:pos + n]
        pos += n
        cdeg = vals[pos:pos + m]
        pos += m
        rest = vals[pos:]
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: not an alist file") from exc
    mv, mc = vals[2], vals[3]
    padded = len(rest) == n * mv + m * mc
    checks, variables = [], []
    i = 0
    for v in range(n):
        width = mv if padded else vdeg[v]
        row = [c for c in rest[i:i + width] if c > 0]
        i += width
        if len(row) != vdeg[v]:
            raise ValueError(f"{path}: column {v} degree mismatch")
        checks += [c - 1 for c in row]
        variables += [v] * len(row)
    code = LdpcCode.from_edges(n, m, checks, variables, metadata)
    # the row section must describe the same matrix
    seen = []
    for c in range(m):
        width = mc if padded else cdeg[c]
        row = sorted(x - 1 for x in rest[i:i + width] if x > 0)
        i += width
        seen.append(row)
    for c in range(m):
        if seen[c] != sorted(code.vars_of(c).tolist()):
            raise ValueError(f"{path}: row {c} disagrees with column lists")
    return code


def save_code(code: LdpcCode, path) -> Path:
    """Write ``path`` (alist) and ``path`` + '.json' metadata; returns the JSON path."""
    path = Path(path)
    write_alist(code, path)
    meta = dict(code.metadata)
    meta.update({"n": code.n, "m": code.m, "edges": code.num_edges})
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return side


def load_code(path) -> LdpcCode:
    path = Path(path)
    side = path.with_name(path.name + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return read_alist(path, meta)
