"""Monte Carlo frame-error-rate engine.

Each frame draws a random message, encodes it, writes the codeword into cells
(labeling bits -> level), draws threshold voltages from the channel model,
quantizes them against the read thresholds, maps each region to per-bit LLRs
and decodes.  Frame ``i`` uses its own generator seeded by
``SeedSequence(seed, spawn_key=(i,))``; frames are tallied strictly in index
order and the run stops at the frame that reaches the error target, so the
result does not depend on chunking or on the number of worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import wilson_interval
from .channel import ChannelModel, crossover_probabilities, hard_thresholds, model_from_dict
from .ldpc import BUILTIN, LdpcCode, construct_peg_ace, decode_bp, load_code, save_code
from .mi import bit_llrs
from .quantopt import QuantizationScheme, mi_at, optimize


@dataclass(frozen=True)
class SimConfig:
    channel: dict
    strategy: str = "hard"
    reads: int | None = None
    strategy_params: dict = field(default_factory=dict)
    thresholds: tuple | None = None
    code: str = "2"
    code_n: int | None = None
    code_seed: int = 7
    max_frames: int = 100_000
    target_frame_errors: int = 100
    seed: int = 0
    workers: int = 1
    chunk: int = 64
    max_iter: int = 50
    label: str = ""

    def __post_init__(self):
        if self.target_frame_errors < 1:
            raise ValueError("target_frame_errors must be >= 1")
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")
        if self.workers < 1 or self.chunk < 1 or self.max_iter < 1:
            raise ValueError("workers, chunk and max_iter must be >= 1")
        if self.thresholds is not None:
            object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        if "channel" not in doc:
            raise ValueError("config needs a 'channel' entry")
        return cls(**doc)

    def key(self) -> str:
        """Hash of everything that affects the outcome (not workers/chunk/label)."""
        doc = self.to_dict()
        for k in ("workers", "chunk", "label"):
            doc.pop(k)
        blob = json.dumps(doc, sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SimResult:
    fer: float
    ber: float
    frames: int
    frame_errors: int
    bit_errors: int
    mean_iterations: float
    ci_low: float
    ci_high: float
    channel_ber: float
    mi: float
    thresholds: list
    undetected_errors: int
    code_n: int
    code_k: int
    config: dict
    config_key: str
    wall_time: float
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)


CSV_FIELDS = ("label", "axis", "fer", "ci_low", "ci_high", "ber", "frames", "frame_errors",
              "bit_errors", "mean_iterations", "channel_ber", "mi", "config_key", "wall_time")


# resolution -----------------------------------------------------------------
def _cache_dir() -> Path | None:
    d = os.environ.get("FLASHREAD_CACHE")
    return Path(d) if d else None


@lru_cache(maxsize=8)
def resolve_code(spec: str, n: int | None = None, seed: int = 7) -> LdpcCode:
    """Built-in degree distribution id (constructed with PEG/ACE) or an alist path.

    Constructed codes are kept on disk under $FLASHREAD_CACHE when it is set.
    """
    spec = str(spec)
    if spec in BUILTIN:
        cache = _cache_dir()
        name = f"dd{spec}_n{n or 'default'}_s{seed}.alist"
        if cache is not None and (cache / name).exists():
            return load_code(cache / name)
        code = construct_peg_ace(BUILTIN[spec], n, seed)
        if cache is not None:
            cache.mkdir(parents=True, exist_ok=True)
            save_code(code, cache / name)
        return code
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"code {spec!r} is neither a built-in id nor a file")
    return load_code(path)


def resolve_scheme(model: ChannelModel, cfg: SimConfig) -> QuantizationScheme:
    if cfg.thresholds is not None:
        t = np.array(cfg.thresholds)
        return QuantizationScheme(t, "explicit", mi_at(model, t))
    return optimize(model, cfg.strategy, cfg.reads, **cfg.strategy_params)


def hard_channel_ber(model: ChannelModel, labeling=None) -> float:
    """Bit error probability of a single hard read (computed, not simulated)."""
    labeling = labeling or model.default_labeling()
    dmc = crossover_probabilities(model, hard_thresholds(model))
    bits = labeling.bit_matrix()
    ham = (bits[:, None, :] != bits[None, :, :]).sum(axis=2) / bits.shape[1]
    return float(np.sum(model.prior[:, None] * dmc.table * ham))


# frame simulation ---------------------------------------------------------------
class _Context:
    def __init__(self, cfg: SimConfig, code: LdpcCode | None = None):
        self.cfg = cfg
        self.model = model_from_dict(cfg.channel)
        self.code = code or resolve_code(cfg.code, cfg.code_n, cfg.code_seed)
        self.scheme = resolve_scheme(self.model, cfg)
        self.labeling = self.model.default_labeling()
        dmc = crossover_probabilities(self.model, self.scheme.thresholds)
        self.llr_table = bit_llrs(dmc, self.labeling)           # (regions, bits)
        self.bps = self.labeling.bits_per_symbol
        bits = self.labeling.bit_matrix()
        weights = 1 << np.arange(self.bps - 1, -1, -1)
        self.level_of_word = np.empty(1 << self.bps, dtype=np.int64)
        self.level_of_word[bits @ weights] = np.arange(bits.shape[0])
        self.weights = weights

    def frame(self, idx: int) -> tuple:
        cfg, code = self.cfg, self.code
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(idx,)))
        msg = rng.integers(0, 2, code.k, dtype=np.uint8)
        cw = code.encode(msg)
        ncell = -(-code.n // self.bps)
        pad = rng.integers(0, 2, ncell * self.bps - code.n, dtype=np.uint8)
        words = np.concatenate((cw, pad)).reshape(ncell, self.bps) @ self.weights
        levels = self.level_of_word[words]
        volts = self.model.sample(levels, rng)
        region = np.searchsorted(self.scheme.thresholds, volts)
        llr = self.llr_table[region].reshape(-1)[:code.n]
        res = decode_bp(code, llr, cfg.max_iter)
        if res.converged and not code.is_codeword(res.bits):
            raise RuntimeError(f"frame {idx}: decoder reported convergence off the code")
        nerr = int(np.count_nonzero(res.bits != cw))
        return nerr, res.iterations, res.converged

    def chunk(self, start: int, stop: int) -> list:
        return [self.frame(i) for i in range(start, stop)]


_WORKER_CTX = None


def _init_worker(cfg_dict, code):
    global _WORKER_CTX
    _WORKER_CTX = _Context(SimConfig.from_dict(cfg_dict), code)


def _run_chunk(bounds):
    return _WORKER_CTX.chunk(*bounds)


def run_fer(cfg: SimConfig, progress=None) -> SimResult:
    """Simulate until ``target_frame_errors`` frame errors or ``max_frames`` frames."""
    t0 = time.perf_counter()
    ctx = _Context(cfg)
    frames = errors = bit_errors = iters = undetected = 0

    def consume(rows) -> bool:
        nonlocal frames, errors, bit_errors, iters, undetected
        for nerr, it, conv in rows:
            frames += 1
            iters += it
            if nerr:
                errors += 1
                bit_errors += nerr
                undetected += int(conv)
            if errors >= cfg.target_frame_errors or frames >= cfg.max_frames:
                return True
        return False

    bounds = [(s, min(s + cfg.chunk, cfg.max_frames)) for s in range(0, cfg.max_frames, cfg.chunk)]
    if cfg.workers == 1:
        for b in bounds:
            if consume(ctx.chunk(*b)):
                break
            if progress:
                progress(frames, errors)
    else:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker,
                                 initargs=(cfg.to_dict(), ctx.code)) as pool:
            wave = cfg.workers * 2
            done = False
            for w in range(0, len(bounds), wave):
                for rows in pool.map(_run_chunk, bounds[w:w + wave]):
                    if consume(rows):
                        done = True
                        break
                if done:
                    break
                if progress:
                    progress(frames, errors)
    lo, hi = wilson_interval(errors, frames)
    return SimResult(
        fer=errors / frames, ber=bit_errors / (frames * ctx.code.n), frames=frames,
        frame_errors=errors, bit_errors=bit_errors, mean_iterations=iters / frames,
        ci_low=lo, ci_high=hi, channel_ber=hard_channel_ber(ctx.model, ctx.labeling),
        mi=float(ctx.scheme.achieved_mi), thresholds=ctx.scheme.thresholds.tolist(),
        undetected_errors=undetected, code_n=ctx.code.n, code_k=ctx.code.k,
        config=cfg.to_dict(), config_key=cfg.key(), wall_time=time.perf_counter() - t0)


# sweeps --------------------------------------------------------------------------
def provenance_lines(extra: dict | None = None) -> list:
    lines = [f"flashread {__version__}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    return lines


def _axis_value(cfg: SimConfig, axis: str | None):
    if not axis:
        return ""
    doc = cfg.to_dict()
    for part in axis.split("."):
        if not isinstance(doc, dict) or part not in doc:
            return ""
        doc = doc[part]
    return doc


def sweep(configs, axis: str | None = None, out_csv=None, progress=None) -> list:
    """Run configs in order; with ``out_csv`` results are appended as they finish.

    A ``<out_csv>.json`` sidecar holds full results keyed by config hash and
    doubles as the progress manifest: already-finished points are loaded, not rerun.
    """
    configs = list(configs)
    results = []
    sidecar = Path(str(out_csv) + ".json") if out_csv else None
    done = json.loads(sidecar.read_text()) if sidecar and sidecar.exists() else {}
    if out_csv and not Path(out_csv).exists():
        sweep_key = hashlib.sha256(json.dumps([c.key() for c in configs]).encode()).hexdigest()[:16]
        with open(out_csv, "w", newline="") as fh:
            for line in provenance_lines({"config_hash": sweep_key, "axis": axis or ""}):
                fh.write(f"# {line}\n")
            csv.writer(fh).writerow(CSV_FIELDS)
    for cfg in configs:
        key = cfg.key()
        if key in done:
            res = SimResult(**done[key])
        else:
            res = run_fer(cfg, progress)
            if out_csv:
                append_csv(out_csv, res, cfg.label, _axis_value(cfg, axis))
                done[key] = res.to_dict()
                tmp = sidecar.with_suffix(".tmp")
                tmp.write_text(json.dumps(done, indent=1))
                tmp.replace(sidecar)
        results.append(res)
    return results


def append_csv(path, res: SimResult, label: str = "", axis_value="") -> None:
    row = {"label": label, "axis": axis_value, **{k: getattr(res, k) for k in CSV_FIELDS
                                                 if k not in ("label", "axis")}}
    new = not Path(path).exists()
    with open(path, "a", newline="") as fh:
        if new:
            for line in provenance_lines({"config_hash": res.config_key}):
                fh.write(f"# {line}\n")
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if new:
            w.writeheader()
        w.writerow(row)


def wilson_relative_halfwidth(res: SimResult) -> float:
    if res.fer == 0:
        return math.inf
    return 0.5 * (res.ci_high - res.ci_low) / res.fer
