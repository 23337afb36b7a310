"""Time the compiled and pure-Python path-sample kernels on the same inputs.

Run ``python3 benchmarks/bench_kernels.py [--paths N] [--repeat R]``.  Each
kernel is checked for agreement between the backends before it is timed.
"""
import argparse
import timeit

import numpy as np

from utilmax.kernels import COSH, POWER, backends


def _inputs(n_paths, steps, d, seed):
    rng = np.random.default_rng(seed)
    inc = rng.standard_t(1.5, size=(n_paths, steps, d))
    paths = np.concatenate([np.ones((n_paths, 1, d)), 1.0 + np.cumsum(inc, axis=1)], axis=1)
    phi = rng.uniform(0.1, 1.0, size=(n_paths, steps))
    vals = rng.standard_normal(n_paths)
    w = np.full(n_paths, 1.0 / n_paths)
    return paths, inc, phi, vals, w


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--assets", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)

    paths, inc, phi, vals, w = _inputs(args.paths, args.steps, args.assets, args.seed)
    mods = backends()
    cases = {
        "maximal_paths": lambda m: m.maximal_paths(paths),
        "integral_maximal": lambda m: m.integral_maximal(inc, phi),
        "young_mean[x^2]": lambda m: m.young_mean(POWER, 2.0, vals, w, 0.7),
        "young_mean[cosh]": lambda m: m.young_mean(COSH, 1.0, vals, w, 0.7),
    }
    print(f"{args.paths} paths, {args.steps} steps, {args.assets} assets; "
          f"backends: {', '.join(mods)}")
    print(f"{'kernel':<20}" + "".join(f"{name:>14}" for name in mods) + f"{'speedup':>10}")
    for label, fn in cases.items():
        ref = np.asarray(fn(mods["python"]))
        for name, mod in mods.items():
            out = np.asarray(fn(mod))
            if not np.allclose(out, ref, rtol=1e-12, atol=1e-14):
                raise SystemExit(f"{label}: backend {name} disagrees with python")
        times = {name: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
                 for name, mod in mods.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<20}" + "".join(f"{t * 1e3:>12.2f}ms" for t in times.values())
              + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
