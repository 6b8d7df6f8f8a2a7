"""Compare the compiled kernel core against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 200 900 1800] [--repeat 5]

Prints best-of-N wall time per kernel and the speedup, and checks that both
backends agree.
"""

import argparse
import timeit

import numpy as np

from uwb_ranger import _kernels_py

try:
    from uwb_ranger import _kernels_core
except ImportError:
    _kernels_core = None

CASES = {
    "sqdist_sym": lambda b, x: b.sqdist_sym(x),
    "sqexp_lin_sym": lambda b, x: b.sqexp_lin_sym(x, 64.6, 0.57, 1.59),
    "poly_sym(c=3)": lambda b, x: b.poly_sym(x, 3, 1.0),
    "poly(c=3) cross": lambda b, x: b.poly(x[:200], x, 3, 1.0),
}


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 900, 1800])
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels_core is None:
        print("compiled core not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'N':>6}{'python ms':>12}{'compiled ms':>13}{'speedup':>9}")
    for n in args.sizes:
        x = np.ascontiguousarray(rng.standard_normal((n, args.dim)))
        for name, case in CASES.items():
            t_py = best_time(lambda: case(_kernels_py, x), args.repeat)
            if _kernels_core is None:
                print(f"{name:<18}{n:>6}{t_py * 1e3:>12.2f}{'-':>13}{'-':>9}")
                continue
            ref, got = case(_kernels_py, x), case(_kernels_core, x)
            err = np.max(np.abs(ref - got)) / max(np.max(np.abs(ref)), 1e-300)
            assert err < 1e-12, f"{name}: backends disagree ({err:.2e})"
            t_c = best_time(lambda: case(_kernels_core, x), args.repeat)
            print(f"{name:<18}{n:>6}{t_py * 1e3:>12.2f}{t_c * 1e3:>13.2f}{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
