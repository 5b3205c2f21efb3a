#!/usr/bin/env python3
"""Benchmark the compiled stencil kernels against the NumPy fallback.

Times the two primitives on the shapes the experiments actually hit (the
conjugated-operator stencils on 2-D annulus boxes) and prints a table with
the speedup of the compiled path.

Usage: python benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from carlat import _kernels as K


def bench(fn, repeats):
    fn()  # warm up (plan cache, allocation)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if "compiled" not in K.available_backends():
        print("compiled backend not built; nothing to compare")
        return

    rng = np.random.default_rng(0)
    cases = [
        ("d=1 laplacian, 16k sites", (16385,), 3),
        ("d=2 conjugated stencil, 257^2", (257, 257), 5),
        ("d=2 conjugated stencil, 513^2", (513, 513), 5),
        ("d=3 conjugated stencil, 65^3", (65, 65, 65), 7),
    ]
    print(f"{'case':38} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, shape, k in cases:
        d = len(shape)
        f = rng.standard_normal(shape)
        offsets = np.zeros((k, d), dtype=np.int64)
        for i in range(1, k):
            offsets[i, (i - 1) % d] = 1 if i % 2 else -1
        weights = rng.standard_normal(k)
        coeffs = [rng.standard_normal(shape) for _ in range(k)]

        for label, call in [
            ("const", lambda b: K.apply_stencil_const(f, offsets, weights, backend=b)),
            ("var", lambda b: K.apply_stencil_var(f, offsets, coeffs, backend=b)),
        ]:
            t_py = bench(lambda: call("python"), args.repeats)
            t_cy = bench(lambda: call("compiled"), args.repeats)
            out_py = call("python")
            out_cy = call("compiled")
            assert np.allclose(out_py, out_cy, rtol=0, atol=1e-12)
            print(f"{name + ' [' + label + ']':38} {t_py*1e3:9.2f}ms {t_cy*1e3:9.2f}ms "
                  f"{t_py / t_cy:7.2f}x")


if __name__ == "__main__":
    main()
