"""Time the compiled and pure-Python kernels on the same inputs.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
also checked for agreement between the two backends before timing.
"""

import argparse
import timeit

import numpy as np

from taskmarket import kernels


def _demeaned(b, X, codes, levels):
    out = X.copy()
    b.demean_alternating(out, codes, levels, 1e-10, 1000)
    return out


def cases(rng):
    occ = (0.8, 0.2, 1.6, 1.0, False, 0.5, 6.0, 2.0, 1.5)
    n, k = 20000, 3
    levels = np.array([50, 5, 30], dtype=np.int64)
    codes = np.column_stack([rng.integers(0, lv, size=n) for lv in levels]).astype(np.int64)
    X = rng.normal(size=(n, k))
    return {
        "cost_gap x10000": (lambda b: [b.cost_gap(z, *occ) for z in np.linspace(0, 1, 10000)], None),
        "bisect_cost_gap x500": (
            lambda b: [b.bisect_cost_gap(0.0, 1.0, *occ[:6], th, *occ[7:], 1e-12, 200)
                       for th in np.linspace(2, 20, 500)], None),
        "demean_alternating 20000x3, 3 factors": (
            lambda b: _demeaned(b, X, codes, levels), None),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    py, c = kernels.python_backend, kernels.compiled_backend
    if c is None:
        print("compiled extension not built; only the Python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}")
    for name, (fn, _) in cases(rng).items():
        if c is not None:
            a, b = fn(py), fn(c)
            if isinstance(a, tuple):
                a, b = a[0], b[0]
            np.testing.assert_allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                                       rtol=1e-12, atol=1e-12)
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        if c is None:
            print(f"{name:40s} {t_py:10.4f} {'-':>11s} {'-':>8s}")
            continue
        t_c = min(timeit.repeat(lambda: fn(c), number=1, repeat=args.repeat))
        print(f"{name:40s} {t_py:10.4f} {t_c:11.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
