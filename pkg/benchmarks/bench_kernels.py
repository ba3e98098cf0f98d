#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel on a representative workload and prints one row per
kernel.  The numba column disappears when the compiled path is unavailable
(or when the script itself runs with BOXCERT_NO_NUMBA=1).
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from boxcert import kernels  # noqa: E402


def bench(fn, args, repeats):
    fn(*args)  # warm-up (and jit compilation)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    rng = np.random.default_rng(0)
    rows = []

    x = rng.normal(0, 1, (8, 64, 64))
    k = rng.normal(0, 1, (16, 8, 3, 3))
    b = rng.normal(0, 1, 16)
    rows.append(("conv2d 8x64x64 -> 16ch", (x, k, b, 1, 1),
                 kernels.conv2d_numpy, getattr(kernels, "_conv2d_numba", None), 20))

    xp = rng.normal(0, 1, (16, 64, 64))
    rows.append(("avgpool2d 16x64x64 w2", (xp, 2, 2),
                 kernels.avgpool2d_numpy, getattr(kernels, "_avgpool2d_numba", None), 50))

    zx0 = rng.uniform(0, 5, 13)
    zx2 = zx0 + rng.uniform(0.1, 5, 13)
    zy1 = rng.uniform(0, 5, 13)
    zy3 = zy1 + rng.uniform(0.1, 5, 13)
    rows.append(("iou extrema 13x13 candidates", (zx0, zx2, zy1, zy3, (1.0, 1.0, 4.0, 4.0)),
                 kernels.iou_pair_extrema_numpy, getattr(kernels, "_iou_pair_extrema_numba", None),
                 2000))

    n = 410
    args = (rng.uniform(0, 1, n), rng.uniform(1, 2, n), rng.uniform(0.5, 3, n),
            rng.uniform(0, 1, n), rng.uniform(1, 2, n), rng.uniform(0.5, 3, n), 4.0)
    rows.append((f"grid extrema {n}x{n} diff pairs", args,
                 kernels.grid_pair_extrema_numpy, getattr(kernels, "_grid_pair_extrema_numba", None),
                 100))

    have_numba = kernels.HAVE_NUMBA
    header = f"{'kernel':34s} {'numpy':>12s}"
    if have_numba:
        header += f" {'numba':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, args, np_fn, nb_fn, repeats in rows:
        t_np = bench(np_fn, args, repeats)
        line = f"{name:34s} {t_np * 1e3:10.3f}ms"
        if have_numba and nb_fn is not None:
            t_nb = bench(nb_fn, args, repeats)
            line += f" {t_nb * 1e3:10.3f}ms {t_np / t_nb:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
