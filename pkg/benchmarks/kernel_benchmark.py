"""Compare the compiled nearest-neighbor kernel against the numpy fallback.

Both backends must agree bitwise on every instance; this script checks that
while timing them, since the fallback is the reference semantics and the
extension exists purely for speed.

Usage: python3 benchmarks/kernel_benchmark.py [--sizes 256,1024,2048] [--repeats 5]
"""

import argparse
import time

import numpy as np

from fpt.kernels import BACKEND, available_backends


def _time_one(fn, query, target, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        idx, d2 = fn(query, target)
        best = min(best, time.perf_counter() - t0)
    return best, idx, d2


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="256,1024,2048",
                        help="comma-separated point counts")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats, best-of")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    print(f"active backend: {BACKEND}; available: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled extension not built; timing the fallback only")

    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    header = f"{'n':>6}  " + "".join(f"{name:>14}" for name in backends) + "  speedup"
    print(header)
    print("-" * len(header))
    for n in sizes:
        query = rng.normal(size=(n, 3))
        target = rng.normal(size=(n, 3))
        results = {}
        for name, fn in backends.items():
            results[name] = _time_one(fn, query, target, args.repeats)
        ref_idx, ref_d2 = next(iter(results.values()))[1:]
        for name, (_, idx, d2) in results.items():
            if idx.tobytes() != ref_idx.tobytes() or d2.tobytes() != ref_d2.tobytes():
                raise SystemExit(f"backend {name} disagrees at n={n}")
        row = f"{n:>6}  " + "".join(
            f"{results[name][0] * 1e3:>11.3f} ms" for name in backends)
        if len(results) == 2:
            times = [t for t, _, _ in results.values()]
            row += f"  {max(times) / min(times):>6.1f}x"
        print(row)
    print("all backends bitwise-identical on every instance")


if __name__ == "__main__":
    main()
