"""Compare the compiled smoothing kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 100 10000 1000000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from pleak import _kernels_py

try:
    from pleak import _kernels
except ImportError:
    _kernels = None


def bench(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 10_000, 1_000_000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the numpy fallback is timed")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'n':>10}{'numpy (us)':>14}{'compiled (us)':>16}{'speedup':>10}")
    for n in args.sizes:
        t = rng.normal(size=n)
        v = rng.uniform(0, 100, size=n)
        g = rng.uniform(0, 1, size=n)
        cases = [("sigmoid", lambda m: (lambda: m.sigmoid(t, 10.0)))]
        cases += [(f"reduce {k}", lambda m, k=k: (lambda: m.smooth_reduce(k, v, g, 10.0)))
                  for k in ("SUM", "MIN", "MAX")]
        for name, make in cases:
            py = bench(make(_kernels_py), args.repeat) * 1e6
            if _kernels is None:
                print(f"{name:<18}{n:>10}{py:>14.1f}{'-':>16}{'-':>10}")
            else:
                c = bench(make(_kernels), args.repeat) * 1e6
                print(f"{name:<18}{n:>10}{py:>14.1f}{c:>16.1f}{py / c:>9.2f}x")


if __name__ == "__main__":
    main()
