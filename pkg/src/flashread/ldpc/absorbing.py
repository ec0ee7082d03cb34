"""Enumeration of small absorbing sets among low-degree variable nodes.

A set D of variable nodes is an (a, b) absorbing set when |D| = a, exactly b
neighbouring checks see an odd number of members, and every member has more
even (satisfied) than odd (unsatisfied) neighbouring checks.  The search is
restricted to connected sets whose members all have degree <= ``max_degree``
and is exhaustive within that class (each connected set is visited once).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .code import LdpcCode


@dataclass(frozen=True)
class AbsorbingSetReport:
    sets: tuple = ()          # ((a, b, frozenset of variables), ...), sorted
    max_a: int = 5
    max_b: int = 2
    max_degree: int = 3
    searched: int = field(default=0, compare=False)

    def count(self, a: int | None = None, b: int | None = None) -> int:
        return sum(1 for aa, bb, _ in self.sets
                   if (a is None or aa == a) and (b is None or bb == b))

    def with_degree(self, code: LdpcCode, d: int) -> "AbsorbingSetReport":
        """Only the sets that contain at least one member of degree ``d``."""
        deg = code.variable_degrees
        keep = tuple(s for s in self.sets if any(deg[v] == d for v in s[2]))
        return AbsorbingSetReport(keep, self.max_a, self.max_b, self.max_degree, self.searched)

    def summary(self) -> dict:
        return {f"({a},{b})": c for (a, b), c in sorted(Counter((a, b) for a, b, _ in self.sets).items())}

    def to_dict(self) -> dict:
        return {"max_a": self.max_a, "max_b": self.max_b, "max_degree": self.max_degree,
                "searched": self.searched, "summary": self.summary(),
                "sets": [{"a": a, "b": b, "variables": sorted(int(v) for v in s)}
                         for a, b, s in self.sets]}


def absorbing_profile(code: LdpcCode, members) -> tuple:
    """(is_absorbing, b) for a candidate variable set."""
    members = set(int(v) for v in members)
    hits = Counter()
    for v in members:
        for c in code.checks_of(v):
            hits[int(c)] += 1
    odd = {c for c, k in hits.items() if k % 2}
    for v in members:
        chk = code.checks_of(v)
        unsat = sum(1 for c in chk if int(c) in odd)
        if not unsat < len(chk) - unsat:
            return False, len(odd)
    return bool(members), len(odd)


def scan_absorbing_sets(code: LdpcCode, max_a: int = 5, max_b: int = 2,
                        max_degree: int = 3) -> AbsorbingSetReport:
    """Exhaustive connected-subset search (ESU order) from low-degree seeds."""
    if max_a > 6:
        raise ValueError("max_a > 6 is outside the supported search size")
    deg = code.variable_degrees
    eligible = [v for v in range(code.n) if 1 <= deg[v] <= max_degree]
    ok = set(eligible)
    nbrs = {}
    for v in eligible:
        s = set()
        for c in code.checks_of(v):
            s.update(int(u) for u in code.vars_of(c) if int(u) in ok)
        s.discard(v)
        nbrs[v] = s

    found = []
    visited = 0

    def extend(sub, closed, ext, root):
        nonlocal visited
        visited += 1
        good, b = absorbing_profile(code, sub)
        if good and b <= max_b:
            found.append((len(sub), b, frozenset(sub)))
        if len(sub) == max_a:
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            excl = [u for u in nbrs[w] if u > root and u not in closed]
            extend(sub | {w}, closed | nbrs[w] | {w}, ext + excl, root)

    for v in eligible:
        start = {u for u in nbrs[v] if u > v}
        extend({v}, nbrs[v] | {v}, sorted(start), v)
    found.sort(key=lambda t: (t[0], t[1], sorted(t[2])))
    return AbsorbingSetReport(tuple(found), max_a, max_b, max_degree, visited)
