"""Time the numba and numpy implementations of each simulation kernel.

    python3 benchmarks/bench_kernels.py [--replications R] [--horizon H] [--repeat K]

Inputs are shaped like a simulate run (a 24-year panel, ``R`` replications
of ``H`` seasons). The first numba call compiles (or loads the on-disk
cache) and is excluded from timing. The script also checks that the two
paths agree before reporting times.
"""

import argparse
import timeit

import numpy as np

from droughtrate import _accel


def make_inputs(R, h, n=24, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.normal(300.0, 120.0, n)
    idx = rng.integers(0, n, size=(R, h)).astype(np.int64)
    flags = values > 450.0
    declared = rng.random((R, h)) < 2 / 3
    return {
        "row_mean_var": (values, idx),
        "row_count": (flags, idx),
        "scheme_paths": (values, idx, declared, 1008.0, 0.15, 0.2),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replications", type=int, default=10_000)
    ap.add_argument("--horizon", type=int, default=25)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    inputs = make_inputs(args.replications, args.horizon)
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    print(f"R={args.replications} h={args.horizon} repeat={args.repeat} "
          f"(active backend: {_accel.backend()})")
    print(f"{'kernel':<14}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for name, kargs in inputs.items():
        results, times = {}, {}
        for b in backends:
            fn = _accel.KERNELS[b][name]
            results[b] = fn(*kargs)
            times[b] = min(timeit.repeat(lambda: fn(*kargs), number=1, repeat=args.repeat))
        if len(backends) == 2:
            for a, c in zip(results["numpy"], results["numba"]):
                np.testing.assert_allclose(a, c, rtol=1e-12)
        row = f"{name:<14}" + "".join(f"{1e3 * times[b]:>12.3f}ms" for b in backends)
        if "numba" in times:
            row += f"{times['numpy'] / times['numba']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
