"""Time the compiled and NumPy local linear kernels on the same inputs.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 250 1000 4000]

Prints one row per (kernel, n, d) with the best-of-``repeat`` time for each
backend, the speed-up, and the largest absolute difference between them.
"""
import argparse
import time

import numpy as np

from shapley_curves.kernels import available_backends, get_backend


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n, d, rng):
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    y = np.sin(X[:, 0]) + rng.normal(size=n)
    h = np.full(d, 0.5 * n ** (-1 / (4 + d)) * 2.0)
    Q = np.ascontiguousarray(rng.normal(size=(200, d)))
    return {
        "loclin_eval": lambda b: b.loclin_eval(X, y, h, Q)[0],
        "loclin_weights": lambda b: b.loclin_weights(X, h, Q)[0],
        "loo_predict": lambda b: b.loo_predict(X, y, h)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 1000, 4000])
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 3])
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the NumPy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<15}{'n':>6}{'d':>3}" + "".join(f"{b + ' (s)':>14}" for b in backends)
          + f"{'speed-up':>10}{'max |diff|':>12}")
    for d in args.dims:
        for n in args.sizes:
            for name, run in cases(n, d, rng).items():
                times, outs = [], []
                for b in backends:
                    t, out = best_time(lambda: run(get_backend(b)), args.repeat)
                    times.append(t)
                    outs.append(np.nan_to_num(np.asarray(out)))
                row = f"{name:<15}{n:>6}{d:>3}" + "".join(f"{t:>14.4f}" for t in times)
                if len(times) == 2:
                    speed = times[backends.index("python")] / times[backends.index("cython")]
                    row += f"{speed:>10.1f}{float(np.max(np.abs(outs[0] - outs[1]))):>12.1e}"
                print(row)


if __name__ == "__main__":
    main()
