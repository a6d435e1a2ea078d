"""Time the compiled kernels against their pure-Python twins.

Run with ``python3 benchmarks/bench_kernels.py``.
"""
import argparse
import timeit

import numpy as np

from causticq import _pykernels

try:
    from causticq import _kernels
except ImportError:          # extension not built
    _kernels = None


def flow_case(n_steps):
    z0 = np.zeros(12)
    z0[:2] = (-1.2, 0.9)
    z0[6] = z0[11] = 1.0
    return (1.21, 1.0, -0.11, 1.0, z0, 0.01, n_steps, 30.0, True)


def shoot_case(n):
    x = np.linspace(-6.0, 6.0, 2 * n - 1)
    gh = np.sqrt(1.0 + (0.1 * x) ** 2)
    ah = gh * 2.0 * (0.5 * x * x - 3.5)
    return (gh, ah, x[2] - x[0], 1e-8, 6e-8)


def bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--grid", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    cases = [("flow", "flow", flow_case(args.steps)), ("shoot", "shoot", shoot_case(args.grid))]
    print(f"{'kernel':8s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for label, name, fargs in cases:
        tp = bench(getattr(_pykernels, name), fargs, args.repeat)
        if _kernels is None:
            print(f"{label:8s} {tp:12.4f} {'n/a':>12s} {'n/a':>9s}")
            continue
        tc = bench(getattr(_kernels, name), fargs, args.repeat)
        print(f"{label:8s} {tp:12.4f} {tc:12.5f} {tp / tc:8.0f}x")


if __name__ == "__main__":
    main()
