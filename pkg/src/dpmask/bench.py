"""Benchmark the compiled Haar trace-sampling kernel against the fallback.

Run as `python -m dpmask.bench`.  The hot loop is the nested Monte Carlo in
the masked-setting audits: sampling Haar-orthogonal matrices and reducing
them to traces against fixed targets.
"""

import argparse
import time

import numpy as np

from ._kernel import BACKEND, available_backends


def time_backend(module, n: int, count: int, repeats: int) -> float:
    targets = np.random.Generator(np.random.PCG64(7)).standard_normal((2, n, n))
    best = float("inf")
    for rep in range(repeats):
        start = time.perf_counter()
        module.haar_trace_samples(targets, count, seed=rep)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, nargs="*", default=[4, 8, 16], help="matrix sizes")
    parser.add_argument("--count", type=int, default=100_000, help="Haar draws per run")
    parser.add_argument("--repeats", type=int, default=3, help="runs per timing (best kept)")
    args = parser.parse_args(argv)

    backends = available_backends()
    print(f"active kernel: {BACKEND}; available: {', '.join(backends)}")
    print(f"{'n':>4} {'count':>9} " + " ".join(f"{name + ' (s)':>14}" for name in backends)
          + ("  speedup" if len(backends) > 1 else ""))
    for n in args.n:
        timings = {name: time_backend(mod, n, args.count, args.repeats)
                   for name, mod in backends.items()}
        line = f"{n:>4} {args.count:>9} " + " ".join(f"{timings[name]:>14.4f}" for name in backends)
        if len(timings) > 1:
            names = list(timings)
            line += f"  {timings[names[0]] / timings[names[1]]:.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
