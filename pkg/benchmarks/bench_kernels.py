"""Time the compiled kernels against their pure-Python mirrors.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel gets identical inputs on both backends; outputs are compared
before any timing is reported.
"""
import argparse
import time

import numpy as np

from flashread import _fallback, kernels
from flashread.density_evolution import DeConfig, _boxplus_table
from flashread.ldpc import CODE2, construct_peg_ace


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_bp(impl, code, llr):
    post = np.empty(code.n)
    msg = np.empty(code.num_edges)
    ok, it = impl.bp_decode_layered(code.chk_ptr, code.chk_var, llr, 20, post, msg, False)
    return it, post


def bench_peg(impl, var_deg, chk_target):
    return impl.peg_construct(var_deg, chk_target, np.uint64(7), 4, 4, False)[0]


def bench_boxplus(impl, args):
    return impl.boxplus_pmf(*args)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=1000, help="frame length for BP and PEG")
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        raise SystemExit("compiled extension not importable; build it first")
    compiled = kernels._impl

    code = construct_peg_ace(CODE2, args.n, seed=1)
    rng = np.random.default_rng(0)
    llr = 2 * (1 + 0.55 * rng.standard_normal(code.n)) / 0.55 ** 2

    vcounts = CODE2.variable_degree_counts(args.n)
    var_deg = np.repeat(sorted(vcounts), [vcounts[d] for d in sorted(vcounts)]).astype(np.int32)
    ccounts = CODE2.check_degree_counts(int(var_deg.sum()))
    chk_target = np.repeat(sorted(ccounts), [ccounts[d] for d in sorted(ccounts)]).astype(np.int32)

    cfg = DeConfig(num_bins=512)
    table, jcut = _boxplus_table(cfg.half, cfg.step)
    ap_, am, bp, bm = (rng.random(cfg.half + 1) for _ in range(4))

    cases = [
        (f"layered BP, n={code.n}, 20 sweeps",
         lambda m: bench_bp(m, code, llr),
         lambda a, b: a[0] == b[0] and np.allclose(a[1], b[1], rtol=1e-9, atol=1e-9)),
        (f"PEG/ACE, n={args.n}",
         lambda m: bench_peg(m, var_deg, chk_target),
         lambda a, b: np.array_equal(a, b)),
        (f"box-plus of pmfs, {cfg.num_bins} bins",
         lambda m: bench_boxplus(m, (ap_, am, bp, bm, table, jcut) if m is compiled
                                 else (ap_, am, bp, bm, table)),
         lambda a, b: all(np.allclose(x, y, rtol=1e-12, atol=1e-15) for x, y in zip(a, b))),
    ]
    print(f"{'kernel':<34}{'cython s':>12}{'python s':>12}{'speedup':>10}")
    for name, run, same in cases:
        tc, oc = best_of(lambda: run(compiled), args.repeat)
        tp, op = best_of(lambda: run(_fallback), 1)
        if not same(oc, op):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<34}{tc:>12.4f}{tp:>12.3f}{tp / tc:>9.0f}x")


if __name__ == "__main__":
    main()
