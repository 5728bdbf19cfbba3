"""Compiled kernel against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--big 10000000] [--small 100000]

Both backends sort the same geometric(1/2) sequences; the compiled kernel
also runs the large size, which the pure loop would take minutes on.
"""

from __future__ import annotations

import argparse
import json
import platform
import time

import numpy as np

from heaptrees import _pure, kernels
from heaptrees.distributions import OffspringDistribution


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n: int, backend, track_dead: bool, repeat: int, seed: int = 0) -> dict:
    gen = np.random.default_rng(seed)
    ranks = gen.permutation(n)
    lives = OffspringDistribution.geometric(0.5).sample(gen, n)
    cps = np.array([n])
    roots = kernels.root_counts(ranks, lives, cps, track_dead, backend=backend)[0][0]
    secs = _time(lambda: kernels.root_counts(ranks, lives, cps, track_dead, backend=backend), repeat)
    return {"n": n, "track_dead": track_dead, "seconds": secs, "items_per_second": n / secs,
            "roots": int(roots)}


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--big", type=int, default=10_000_000)
    ap.add_argument("--small", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rows = []
    if kernels.BACKEND == "compiled":
        from heaptrees import _kernels

        rows.append(("compiled", bench(args.small, _kernels, False, args.repeat)))
        rows.append(("compiled", bench(args.small, _kernels, True, args.repeat)))
        rows.append(("compiled", bench(args.big, _kernels, False, 1)))
        rows.append(("compiled", bench(args.big, _kernels, True, 1)))
    else:
        print("compiled extension not built; pure backend only")
    rows.append(("pure", bench(args.small, _pure, False, 1)))
    rows.append(("pure", bench(args.small, _pure, True, 1)))

    print(f"{'backend':<10}{'n':>12}{'track_dead':>12}{'seconds':>12}{'items/s':>14}{'roots':>8}")
    for name, r in rows:
        print(f"{name:<10}{r['n']:>12}{str(r['track_dead']):>12}{r['seconds']:>12.4f}"
              f"{r['items_per_second']:>14.3g}{r['roots']:>8}")
    small = {(name, r["track_dead"]): r["seconds"] for name, r in rows if r["n"] == args.small}
    if ("compiled", False) in small:
        print(f"speedup at n={args.small}: {small[('pure', False)] / small[('compiled', False)]:.1f}x "
              f"(plain), {small[('pure', True)] / small[('compiled', True)]:.1f}x (with dead tracking)")
    print(json.dumps({"python": platform.python_version(), "machine": platform.machine(),
                      "results": [dict(backend=name, **r) for name, r in rows]}))


if __name__ == "__main__":
    main()
