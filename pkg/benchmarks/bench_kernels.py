"""Time the numba and numpy implementations of the hot kernels side by side.

    python benchmarks/bench_kernels.py [--samples 2000000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from molstore import _kernels as K


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2_000_000)
    ap.add_argument("--bases", type=int, default=1_000_000)
    ap.add_argument("--window", type=int, default=1001)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    res = rng.choice([20.0, 26.7, 33.3, 40.0], args.bases)
    x = rng.normal(120.0, 4.0, args.samples)
    for s in rng.integers(0, args.samples - 200, args.samples // 2000):
        x[s : s + 100] = 20.0
    mask = x > 60.0
    half = args.window // 2
    anchors = np.arange(0, args.samples, max(1, half // 10), dtype=np.int64)
    thr = np.full(args.samples, 60.0)

    cases = {
        f"window_means ({args.bases} bases, W=29)": (
            lambda: K.window_means_numpy(res, 29),
            lambda: K.window_means_numba(res, 29),
        ),
        f"masked_rolling_median ({anchors.size} anchors, window {args.window})": (
            lambda: K.masked_rolling_median_numpy(x, mask, anchors, half),
            lambda: K.masked_rolling_median_numba(x, mask, anchors, half),
        ),
        f"threshold_spans ({args.samples} samples)": (
            lambda: K.threshold_spans_numpy(x, thr),
            lambda: K.threshold_spans_numba(x, thr),
        ),
    }
    print(f"backend in use: {K.backend()}")
    print(f"{'kernel':<58} {'numpy s':>9} {'numba s':>9} {'speedup':>8}")
    for name, (np_fn, nb_fn) in cases.items():
        t_np = best_of(np_fn, args.repeat)
        if K.HAVE_NUMBA:
            nb_fn()  # compile outside the timing
            t_nb = best_of(nb_fn, args.repeat)
            print(f"{name:<58} {t_np:9.4f} {t_nb:9.4f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:<58} {t_np:9.4f} {'n/a':>9} {'':>8}")


if __name__ == "__main__":
    main()
