"""Edge-perspective degree distributions and node-count rounding."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TARGET_RATE = 0.9021
FRAME_K = 8225


@dataclass(frozen=True)
class DegreeDistribution:
    """``lam``/``rho`` are ((degree, edge_fraction), ...) for variable/check nodes."""

    lam: tuple
    rho: tuple
    name: str = ""
    target_rate: float | None = None

    def __post_init__(self):
        lam = _normalized(self.lam, "lambda")
        rho = _normalized(self.rho, "rho")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "rho", rho)
        for side, terms in (("lambda", lam), ("rho", rho)):
            if any(d < 1 for d, _ in terms) or any(a < 0 for _, a in terms):
                raise ValueError(f"{side}: degrees must be >= 1, fractions >= 0")
            if abs(sum(a for _, a in terms) - 1.0) > 1e-9:
                raise ValueError(f"{side} fractions sum to {sum(a for _, a in terms)!r}")
            if len({d for d, _ in terms}) != len(terms):
                raise ValueError(f"{side}: repeated degree")
        if self.target_rate is not None and abs(self.design_rate - self.target_rate) > 2e-3:
            raise ValueError(f"design rate {self.design_rate:.5f} misses target "
                             f"{self.target_rate}")

    @property
    def design_rate(self) -> float:
        return 1.0 - self._inv_avg(self.rho) / self._inv_avg(self.lam)

    @staticmethod
    def _inv_avg(terms) -> float:
        return sum(a / d for d, a in terms)

    def node_fractions(self, side: str = "variable") -> dict:
        terms = self.lam if side == "variable" else self.rho
        tot = self._inv_avg(terms)
        return {d: (a / d) / tot for d, a in terms}

    @property
    def max_variable_degree(self) -> int:
        return max(d for d, a in self.lam if a > 0)

    def has_variable_degree(self, d: int) -> bool:
        return any(dd == d and a > 0 for dd, a in self.lam)

    def variable_degree_counts(self, n: int) -> dict:
        return _largest_remainder(self.node_fractions("variable"), n)

    def check_degree_counts(self, num_edges: int) -> dict:
        """Check-degree counts whose degrees sum exactly to ``num_edges``."""
        fr = self.node_fractions("check")
        avg = sum(d * f for d, f in fr.items())
        m = max(1, int(round(num_edges / avg)))
        lo_d, hi_d = min(fr), max(fr)
        # nearest m whose degree range can carry the edges
        for step in range(3):
            ok = [c for c in (m - step, m + step) if c >= 1 and lo_d * c <= num_edges <= hi_d * c]
            if ok:
                m = ok[0]
                break
        else:
            # short frames: the support cannot hold the edges, split them evenly
            q, r = divmod(num_edges, m)
            return {d: c for d, c in ((q, m - r), (q + 1, r)) if c > 0}
        counts = _largest_remainder(fr, m)
        degs = sorted(counts)
        # move single nodes between adjacent degrees until the edge totals agree
        for _ in range(10 * m):
            diff = num_edges - sum(d * c for d, c in counts.items())
            if diff == 0:
                return {d: c for d, c in counts.items() if c > 0}
            if diff > 0:
                src = next((d for d in degs[:-1] if counts[d] > 0), None)
                if src is None:
                    counts[degs[-1]] += 1
                    continue
                dst = degs[degs.index(src) + 1]
                step = dst - src
                if step > diff:
                    counts[degs[-1]] += 1
                    continue
                counts[src] -= 1
                counts[dst] += 1
            else:
                src = next((d for d in reversed(degs[1:]) if counts[d] > 0), None)
                if src is None:
                    raise ValueError("infeasible check degree sequence")
                dst = degs[degs.index(src) - 1]
                counts[src] -= 1
                counts[dst] += 1
        raise ValueError("infeasible check degree sequence")

    def without_degree_one(self) -> "DegreeDistribution":
        lam = [(d, a) for d, a in self.lam if d != 1]
        tot = sum(a for _, a in lam)
        return DegreeDistribution(tuple((d, a / tot) for d, a in lam), self.rho,
                                  self.name + "-nodeg1")

    def to_dict(self) -> dict:
        return {"name": self.name, "lambda": [list(t) for t in self.lam],
                "rho": [list(t) for t in self.rho], "target_rate": self.target_rate}

    @classmethod
    def from_dict(cls, doc: dict) -> "DegreeDistribution":
        return cls(tuple(map(tuple, doc["lambda"])), tuple(map(tuple, doc["rho"])),
                   doc.get("name", ""), doc.get("target_rate"))


def _normalized(terms, side: str, slack: float = 1e-4) -> tuple:
    """Sorted terms rescaled to sum to one; published coefficients are rounded."""
    terms = sorted((int(d), float(a)) for d, a in terms)
    tot = sum(a for _, a in terms)
    if abs(tot - 1.0) > slack:
        raise ValueError(f"{side} fractions sum to {tot!r}")
    return tuple((d, a / tot) for d, a in terms)


def _largest_remainder(fractions: dict, total: int) -> dict:
    raw = {d: f * total for d, f in fractions.items()}
    counts = {d: int(np.floor(v)) for d, v in raw.items()}
    short = total - sum(counts.values())
    order = sorted(raw, key=lambda d: (-(raw[d] - counts[d]), d))
    for d in order[:short]:
        counts[d] += 1
    return counts


def _poly(*terms):
    """Polynomial terms a * x^(d-1) given as (exponent, a) -> (degree, a)."""
    return tuple((e + 1, a) for e, a in terms)


# Coefficients as published; the x^k exponent is degree - 1.
CODE1 = DegreeDistribution(
    lam=_poly((0, 2.0054e-5), (1, 3.5776e-2), (2, 0.39869), (8, 8.4827e-3),
              (9, 3.7701e-2), (18, 0.51933)),
    rho=_poly((54, 0.15662), (55, 0.84338)),
    name="code1", target_rate=TARGET_RATE)

CODE2 = DegreeDistribution(
    lam=_poly((0, 1.7701e-5), (1, 3.1579e-2), (3, 0.46923), (8, 7.4877e-3),
              (9, 3.3278e-2), (18, 0.45841)),
    rho=_poly((61, 1.0975e-3), (62, 0.73267), (63, 0.26623)),
    name="code2", target_rate=TARGET_RATE)

CODE3 = DegreeDistribution(
    lam=_poly((1, 3.2172e-2), (2, 2.681e-3), (3, 0.55764), (23, 0.40751)),
    rho=_poly((57, 0.10366), (58, 0.89634)),
    name="code3", target_rate=TARGET_RATE)

BUILTIN = {"1": CODE1, "2": CODE2, "3": CODE3}


def resolve_dd(spec: str) -> DegreeDistribution:
    """Built-in id ('1', '2', '3') or a JSON file path."""
    spec = str(spec)
    if spec in BUILTIN:
        return BUILTIN[spec]
    return DegreeDistribution.from_dict(json.loads(Path(spec).read_text()))


def default_length(k: int = FRAME_K, rate: float = TARGET_RATE) -> int:
    """round(k / rate); 9118 for the published frame, giving 893 checks."""
    return int(round(k / rate))
