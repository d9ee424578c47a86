#!/usr/bin/env python3
"""Benchmark the compiled decoding kernels against the numpy fallback.

Runs identical decode workloads through both backends, checks that the
decoded matrices agree, and reports throughput (matrices/second).

Usage: python benchmarks/bench_kernels.py [--trials N] [--sigma S]
"""

import argparse
import time

import numpy as np

from tpcharq import _kernels_py
from tpcharq.codec import component_code, encode_product
from tpcharq.channel import modulate
from tpcharq.decoder import ALPHA_DEFAULT, BETA_DEFAULT
from tpcharq.kernels import available_backends


def make_workload(code, trials, sigma, seed=0):
    rng = np.random.default_rng(seed)
    softs = []
    for _ in range(trials):
        info = rng.integers(0, 2, (code.k, code.k), dtype=np.uint8)
        cw = encode_product(code, info)
        softs.append(modulate(cw) + rng.normal(0.0, sigma, cw.shape))
    return softs


def bench(impl, fn_name, code, inputs, **kw):
    fn = getattr(impl, fn_name)
    start = time.perf_counter()
    outs = [fn(x, code.synd_col, code.pos_of_synd, **kw) for x in inputs]
    elapsed = time.perf_counter() - start
    return outs, elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--sigma", type=float, default=0.8)
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; benchmarking fallback only")

    alpha = np.array(ALPHA_DEFAULT)
    beta = np.array(BETA_DEFAULT)
    print(f"{'code':>16} {'kernel':>6} {'backend':>9} {'mat/s':>10} {'speedup':>8}")
    for m in (4, 5, 6):
        code = component_code(m)
        softs = make_workload(code, args.trials, args.sigma, seed=m)
        hards = [(s < 0).astype(np.uint8) for s in softs]

        rows = {}
        for name, impl in backends.items():
            outs_h, t_h = bench(impl, "hiho_decode_matrix", code, hards,
                                max_half_iters=8)
            outs_c, t_c = bench(impl, "chase_decode_matrix", code, softs,
                                p=4, max_half_iters=8, alpha=alpha, beta=beta)
            rows[name] = {"hiho": (outs_h, t_h), "chase": (outs_c, t_c)}

        if "compiled" in rows:
            for kernel in ("hiho", "chase"):
                ref = rows["python"][kernel][0]
                got = rows["compiled"][kernel][0]
                agree = all(np.array_equal(a[0], b[0]) and a[1:] == b[1:]
                            for a, b in zip(ref, got))
                if not agree:
                    raise SystemExit(f"backend outputs differ for {kernel} "
                                     f"on {code.name}")

        base = {k: rows["python"][k][1] for k in ("hiho", "chase")}
        for kernel in ("hiho", "chase"):
            for name in rows:
                _, t = rows[name][kernel]
                speed = args.trials / t
                rel = base[kernel] / t
                print(f"{code.name:>16} {kernel:>6} {name:>9} "
                      f"{speed:10.1f} {rel:7.1f}x")


if __name__ == "__main__":
    main()
