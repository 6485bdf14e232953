"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--samples 1000] [--repeat 5] [--json out.json]

Each kernel runs on identical inputs under both backends; the script reports
the best wall time of ``--repeat`` runs, the speedup, and whether the outputs
agree bit for bit.
"""

import argparse
import json
import time

import numpy as np

from deqflow import kernels
from deqflow.rng import data_stream


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases(n):
    X = data_stream(0).random((n, 2))
    theta1 = np.array([1.5, 1.0])
    S = np.full((3, 3), 0.25) + np.eye(3) / 12.0
    y = kernels.get_backend("python").solve_batch(1, theta1, 0.5, X, 0, 1e-12, 100_000)[0]
    f = 1.0 / (1.0 + np.exp(-(X @ theta1)))
    return {
        f"solve_batch picard sigmoid n={n}": lambda b: b.solve_batch(1, theta1, 0.5, X, 0, 1e-12, 100_000),
        f"solve_batch brent tanh n={n}": lambda b: b.solve_batch(2, theta1, 0.5, X, 1, 1e-12, 100_000),
        f"risk_grad_batch sigmoid n={n}": lambda b: b.risk_grad_batch(1, theta1, 0.5, X, f, y),
        "linear_rk4 d=3, 10^4 steps": lambda b: b.linear_rk4(S, np.array([1.0, -0.5, 0.3]),
                                                            np.array([0.2, 0.1, -0.1, 0.3]),
                                                            1e-3, 10_000, 100, 0.0, 1e-8),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)
    if not kernels.compiled_available():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    py, cc = kernels.get_backend("python"), kernels.get_backend("compiled")
    rows = []
    print(f"{'kernel':40s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>9s}  identical")
    for name, fn in cases(args.samples).items():
        tp, op = _best(lambda: fn(py), args.repeat)
        tc, oc = _best(lambda: fn(cc), args.repeat)
        same = _same(op, oc)
        rows.append({"kernel": name, "python_s": tp, "compiled_s": tc, "speedup": tp / tc, "identical": same})
        print(f"{name:40s} {tp:11.5f} {tc:13.6f} {tp / tc:9.1f}  {same}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
