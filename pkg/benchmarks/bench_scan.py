"""Compare the compiled and numpy grid-scan kernels.

    python benchmarks/bench_scan.py [--price-points 2001] [--qos-points 1001] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from cloudmarket import _kernels


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--price-points", type=int, default=2001)
    parser.add_argument("--qos-points", type=int, default=1001)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    prices = np.linspace(2.0, 20.0, args.price_points)
    qos = np.linspace(0.0, 2.0 * (1 - 1e-6), args.qos_points)
    call = (prices, qos, 10.0, 1.0, 2.0, 2.0, 1.0, 2.0)
    cells = prices.size * qos.size

    backends = {"python": _kernels.python_scan_profit_grid}
    if _kernels.compiled_scan_profit_grid is not None:
        backends["cython"] = _kernels.compiled_scan_profit_grid
    else:
        print("compiled kernel unavailable; timing the numpy fallback only")

    results = {}
    for name, fn in backends.items():
        fn(*call)
        best = min(timeit.repeat(lambda: fn(*call), number=1, repeat=args.repeat))
        results[name] = (best, fn(*call))
        print(f"{name:>7}: {best * 1e3:8.2f} ms  ({cells / best / 1e6:7.1f} Mcells/s)  argmax={results[name][1][1:]}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"speedup: {py[0] / cy[0]:.1f}x   max |value diff| = {abs(py[1][0] - cy[1][0]):.2e}")


if __name__ == "__main__":
    main()
