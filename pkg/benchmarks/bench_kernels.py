"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--rows N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from shipfreq import kernels


def demean_case(n_rows, seed=0):
    rng = np.random.default_rng(seed)
    codes = np.vstack([
        rng.integers(0, n_rows // 25, n_rows),
        rng.integers(0, 150, n_rows),
    ]).astype(np.int64)
    n_groups = codes.max(axis=1).astype(np.int64) + 1
    data = rng.normal(size=(n_rows, 4))
    weights = rng.uniform(0.5, 2.0, n_rows)
    return data, codes, n_groups, weights


def bench(backend, n_rows, repeat):
    mod = kernels.get_backend(backend)
    data, codes, n_groups, weights = demean_case(n_rows)
    xs = -np.exp(-1.0) + np.geomspace(1e-10, 30.0, 20_000)
    lower = xs[xs < 0]

    def run_demean():
        mod.demean(data.copy(), codes, n_groups, weights, 1e-10)

    def run_w():
        for x in xs:
            mod.lambert_w(float(x), 0)
        for x in lower:
            mod.lambert_w(float(x), -1)

    t_d = min(timeit.repeat(run_demean, number=1, repeat=repeat))
    t_w = min(timeit.repeat(run_w, number=1, repeat=repeat))
    return t_d, t_w, len(xs) + len(lower)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=50_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    results = {b: bench(b, args.rows, args.repeat) for b in kernels.available_backends()}
    print(f"default backend: {kernels.BACKEND}")
    print(f"{'backend':<10}{'demean (s)':>14}{'lambert_w (s)':>16}{'W calls':>10}")
    for name, (t_d, t_w, calls) in results.items():
        print(f"{name:<10}{t_d:>14.4f}{t_w:>16.4f}{calls:>10}")
    if len(results) == 2:
        (cd, cw, _), (pd, pw, _) = results["compiled"], results["python"]
        print(f"speedup: demean x{pd / cd:.1f}, lambert_w x{pw / cw:.1f}")


if __name__ == "__main__":
    main()
