"""``flashread`` command line: mi-sweep, optimize, de, construct, fer, bch-fer.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _header(args) -> list:
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    return [f"flashread {__version__}", f"config_hash: {_hash(flags)}",
            "args: " + json.dumps(flags, sort_keys=True, default=str)]


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def parse_range(text: str) -> np.ndarray:
    """'a:b:step' (inclusive of b within rounding) or comma list; '' is empty."""
    text = text.strip()
    if not text:
        return np.array([])
    if ":" in text:
        try:
            a, b, step = (float(x) for x in text.split(":"))
        except ValueError as exc:
            raise ConfigError(f"bad range {text!r}; expected start:stop:step") from exc
        if step <= 0:
            raise ConfigError("range step must be positive")
        count = int(np.floor((b - a) / step + 1e-9)) + 1
        return a + step * np.arange(max(count, 0))
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad value list {text!r}") from exc


def _load_model(path):
    from .channel import load_model
    try:
        return load_model(path)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load model {path}: {exc}") from exc


# mi-sweep --------------------------------------------------------------------
def cmd_mi_sweep(args) -> int:
    from .mi import mi_derivative_three_reads, mi_derivative_two_reads
    from .quantopt import mi_at
    model = _load_model(args.model)
    name, _, grid = args.param_grid.partition(":")
    if name not in ("q", "R"):
        raise ConfigError("--param-grid must look like q:start:stop:step or R:start:stop:step")
    values = parse_range(grid)
    slc = model.num_levels == 2
    analytic = slc and model.is_symmetric and name == "q" and args.reads in (2, 3)
    out, close = _open_out(args.out)
    try:
        for line in _header(args):
            out.write(f"# {line}\n")
        w = csv.writer(out)
        w.writerow([name, "mi"] + (["dmi_dq"] if analytic else []))
        for x in values:
            t = _sweep_thresholds(model, args.reads, name, float(x))
            mi = mi_at(model, np.asarray(t))
            row = [repr(float(x)), repr(mi)]
            if analytic:
                d = (mi_derivative_two_reads(model, x) if args.reads == 2
                     else mi_derivative_three_reads(model, x))
                row.append(repr(d))
            w.writerow(row)
    finally:
        if close:
            out.close()
    return 0


def _sweep_thresholds(model, reads, name, x):
    from .channel import hard_thresholds
    from .quantopt import single_q_thresholds, thresholds_from_ratio
    if name == "R":
        return thresholds_from_ratio(model, x)
    c = model.center
    if model.num_levels == 2:
        if reads == 1 or x == 0:
            return [c]
        if reads == 2:
            return [c - x, c + x]
        if reads == 3:
            return [c - x, c, c + x]
        raise ConfigError("SLC q sweeps support 1, 2 or 3 reads")
    return hard_thresholds(model) if x == 0 else single_q_thresholds(model, x)


# optimize --------------------------------------------------------------------
def cmd_optimize(args) -> int:
    from .quantopt import optimize
    model = _load_model(args.model)
    strategy = {"cr": "constant-ratio"}.get(args.strategy, args.strategy)
    kwargs = {}
    if args.R is not None:
        kwargs["R"] = args.R
    try:
        scheme = optimize(model, strategy, args.reads, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    doc = scheme.to_dict()
    doc["provenance"] = _header(args)
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2))
    else:
        print(json.dumps(doc, indent=2))
    print(scheme.table(), file=sys.stderr if not args.out else sys.stdout)
    return 0


# de --------------------------------------------------------------------------
def cmd_de(args) -> int:
    from . import density_evolution as de
    from .ldpc import resolve_dd
    try:
        dd = resolve_dd(args.dd)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot resolve degree distribution {args.dd}: {exc}") from exc
    if dd.has_variable_degree(1) and not args.keep_degree_one:
        dd = dd.without_degree_one()
    cfg = de.DeConfig(num_bins=args.bins, max_de_iters=args.max_iters)
    bracket = {}
    if args.bracket:
        try:
            bracket = dict(zip(("lo", "hi"), map(float, args.bracket.split(",", 1))))
        except ValueError as exc:
            raise ConfigError(f"bad --bracket {args.bracket!r}") from exc
    if args.channel == "awgn":
        res = de.de_threshold_awgn(dd, cfg, **bracket)
        label = "sigma"
    elif args.channel == "bsc":
        res = de.de_threshold_bsc(dd, cfg, **bracket)
        label = "epsilon"
    elif args.channel.startswith("dmc:"):
        res = _de_dmc(args.channel[4:], dd, cfg)
        label = "parameter"
    else:
        raise ConfigError("--channel must be awgn, bsc or dmc:<family.json>")
    summary = {"dd": dd.name, "channel": args.channel, label: res.parameter,
               "snr_db": res.snr_db, "monotone": res.monotone}
    print(json.dumps(summary))
    if args.out:
        de.write_trace_csv(res, args.out, _header(args))
    return 0 if res.monotone else EXIT_RUNTIME


def _de_dmc(path, dd, cfg):
    """Family file: {"model": {...with snr_db...}, "strategy": ..., "reads": r,
    "parameter": "snr_db", "good": x_good, "bad": x_bad}."""
    from . import density_evolution as de
    from .channel import crossover_probabilities, model_from_dict
    from .quantopt import optimize
    try:
        spec = json.loads(Path(path).read_text())
        base, param = dict(spec["model"]), spec.get("parameter", "snr_db")
        good, bad = float(spec["good"]), float(spec["bad"])
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad dmc family file {path}: {exc}") from exc

    def family(x):
        model = model_from_dict({**base, param: x})
        scheme = optimize(model, spec.get("strategy", "hard"), spec.get("reads"),
                          **spec.get("strategy_params", {}))
        return crossover_probabilities(model, scheme.thresholds), model.default_labeling()
    return de.de_threshold_dmc(dd, family, good, bad, cfg)


# construct -------------------------------------------------------------------
def cmd_construct(args) -> int:
    from .ldpc import construct_peg_ace, resolve_dd, save_code
    try:
        dd = resolve_dd(args.dd)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot resolve degree distribution {args.dd}: {exc}") from exc
    try:
        code = construct_peg_ace(dd, args.n, args.seed, args.d_ace, args.eta_ace)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    code.metadata["k"] = code.k
    code.metadata["rate"] = code.rate
    side = save_code(code, args.out)
    print(json.dumps({"alist": str(args.out), "metadata": str(side), "n": code.n,
                      "m": code.m, "k": code.k, "rate": code.rate}))
    return 0


# fer -------------------------------------------------------------------------
def cmd_fer(args) -> int:
    from .harness import SimConfig, sweep
    try:
        doc = json.loads(Path(args.config).read_text())
        docs = doc if isinstance(doc, list) else [doc]
        configs = [SimConfig.from_dict(d) for d in docs]
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad simulation config {args.config}: {exc}") from exc
    if args.workers:
        configs = [SimConfig.from_dict({**c.to_dict(), "workers": args.workers}) for c in configs]
    out = args.out or str(Path(args.config).with_suffix(".csv"))
    results = sweep(configs, args.axis, out)
    for r in results:
        print(json.dumps({"fer": r.fer, "frames": r.frames, "frame_errors": r.frame_errors,
                          "channel_ber": r.channel_ber, "mi": r.mi}))
    return 0


# bch-fer ---------------------------------------------------------------------
def cmd_bch_fer(args) -> int:
    from .baselines import bch_fer_mc, write_bch_csv
    ps = parse_range(args.p)
    if np.any(ps < 0) or np.any(ps > 0.5):
        raise ConfigError("p values must lie in [0, 1/2]")
    header = _header(args) + [f"bch n={args.n} t={args.t} (bounded-distance)"]
    if args.trials:
        out, close = _open_out(args.out)
        try:
            for line in header:
                out.write(f"# {line}\n")
            w = csv.writer(out)
            w.writerow(["p", "fer", "ci_low", "ci_high"])
            for p in ps:
                est = bch_fer_mc(args.n, args.t, float(p), args.trials, args.seed)
                w.writerow([repr(float(p)), repr(est.fer), repr(est.ci_low), repr(est.ci_high)])
        finally:
            if close:
                out.close()
    else:
        if args.out in (None, "-"):
            import tempfile
            with tempfile.TemporaryDirectory() as tmp:
                path = Path(tmp) / "bch.csv"
                write_bch_csv(path, args.n, args.t, ps, header)
                sys.stdout.write(path.read_text())
        else:
            write_bch_csv(args.out, args.n, args.t, ps, header)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flashread", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"flashread {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mi-sweep", help="MI (and dI/dq) along a threshold parameter")
    s.add_argument("--model", required=True, help="channel model JSON")
    s.add_argument("--reads", type=int, default=2)
    s.add_argument("--param-grid", required=True, help="q:start:stop:step or R:start:stop:step")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_mi_sweep)

    s = sub.add_parser("optimize", help="optimize word-line voltages")
    s.add_argument("--model", required=True)
    s.add_argument("--strategy", required=True,
                   choices=["hard", "symmetric-q", "single-q", "cr", "constant-ratio",
                            "unconstrained", "uniform"])
    s.add_argument("--reads", type=int, default=None)
    s.add_argument("--R", type=float, default=None, help="fixed ratio for the cr strategy")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("de", help="density-evolution threshold")
    s.add_argument("--dd", required=True, help="1, 2, 3 or a JSON file")
    s.add_argument("--channel", default="awgn", help="awgn | bsc | dmc:<family.json>")
    s.add_argument("--bins", type=int, default=4096)
    s.add_argument("--max-iters", type=int, default=2000)
    s.add_argument("--keep-degree-one", action="store_true",
                   help="keep degree-1 variable nodes (DE then stalls on an error floor)")
    s.add_argument("--bracket", default=None, metavar="GOOD,BAD",
                   help="awgn sigma or bsc epsilon bracket (defaults suit rate-0.9 codes)")
    s.add_argument("--out", default=None, help="CSV trace of the bisection probes")
    s.set_defaults(func=cmd_de)

    s = sub.add_parser("construct", help="PEG/ACE code construction")
    s.add_argument("--dd", required=True)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--d-ace", type=int, default=4)
    s.add_argument("--eta-ace", type=int, default=4)
    s.add_argument("--out", required=True, help="alist path (metadata goes to <out>.json)")
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("fer", help="Monte Carlo FER for one config or a list of configs")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None, help="results CSV (default: config path .csv)")
    s.add_argument("--axis", default=None, help="config field reported in the axis column")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_fer)

    s = sub.add_parser("bch-fer", help="bounded-distance BCH frame error rate")
    s.add_argument("--n", type=int, default=9152)
    s.add_argument("--t", type=int, default=64)
    s.add_argument("--p", required=True, help="start:stop:step or comma list")
    s.add_argument("--trials", type=int, default=0, help="Monte Carlo trials (0 = analytic)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_bch_fer)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"flashread: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"flashread: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
