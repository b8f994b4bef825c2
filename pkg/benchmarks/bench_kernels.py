"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]

Prints one line per (kernel, operation, backend) with the best wall time and
the speedup of the compiled backend. Both backends are fed identical inputs
and their outputs are compared before timing.
"""
import argparse
import time

import numpy as np

from hierlat import kernels


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(args.seed)
    pool = 0.5 + rng.random(args.n)
    cases = [
        ("diamond", kernels.KIND_DIAMOND, np.ones(4), 4),
        ("mean", kernels.KIND_LP, np.array([1.0, 0.5, 0.5]), 2),
        ("series L-1", kernels.KIND_LP, np.array([-1.0, 1.0, 1.0]), 2),
        ("L2", kernels.KIND_LP, np.array([2.0, 1.0, 1.0]), 2),
        ("L3", kernels.KIND_LP, np.array([3.0, 1.0, 1.0]), 2),
    ]
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<12}{'op':<14}{'backend':<9}{'seconds':>10}{'speedup':>9}")
    for name, kind, params, k in cases:
        idx = rng.integers(0, args.n, size=(args.n, k))
        X = pool[idx]
        for op, call in (
            ("eval_rows", lambda b: kernels.eval_rows(kind, params, X, backend=backends[b])),
            ("gather_eval", lambda b: kernels.gather_eval(kind, params, pool, idx, backend=backends[b])),
        ):
            ref = call("numpy")
            times = {}
            for b in backends:
                got = call(b)
                if not np.allclose(got, ref, rtol=1e-13, atol=0):
                    raise SystemExit(f"{name}/{op}: backend {b} disagrees with numpy")
                times[b] = best_of(lambda: call(b), args.repeat)
            for b, t in times.items():
                speed = times["numpy"] / t
                print(f"{name:<12}{op:<14}{b:<9}{t:>10.4f}{speed:>8.2f}x")


if __name__ == "__main__":
    main()
