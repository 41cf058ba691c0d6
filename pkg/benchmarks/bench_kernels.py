"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Also checks that both paths agree before timing them.
"""

import argparse
import time

import numpy as np

from fmixcert import _kernels as K
from fmixcert.augment import AffineParams, FourierMixConfig, fouriermix
from fmixcert.numerics import Rng


def best_of(fn, repeat):
    fn()  # warm-up (includes JIT compile on first call)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        print("numba not importable; only the numpy path can be timed")

    rng = np.random.default_rng(0)
    rows = rng.standard_normal((96, 32)) + 1j * rng.standard_normal((96, 32))
    odd = rng.standard_normal((96, 24)) + 0j
    img = rng.uniform(size=(32, 32, 3))
    inv = np.linalg.inv(AffineParams(0.2, 0.05, -0.03, 1.05, 0.1).matrix())[::-1, ::-1].copy()
    center = np.array([15.5, 15.5])
    shift = np.array([1.2, -0.7])

    cases = [
        ("fft_rows radix-2 96x32", lambda nb: K.fft_rows(rows, use_numba=nb)),
        ("fft_rows direct 96x24", lambda nb: K.fft_rows(odd, use_numba=nb)),
        ("warp_bilinear 32x32x3", lambda nb: K.warp_bilinear(img, inv, center, shift, use_numba=nb)),
    ]
    paths = [False, True] if K.HAVE_NUMBA else [False]
    print(f"{'kernel':28s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, fn in cases:
        if K.HAVE_NUMBA:
            err = np.max(np.abs(fn(False) - fn(True)))
            assert err < 1e-9, f"{name}: paths disagree by {err}"
        t = [best_of(lambda: fn(nb), args.repeat) for nb in paths]
        nb_col = f"{t[1] * 1e6:8.1f}us" if len(t) > 1 else "       n/a"
        sp = f"{t[0] / t[1]:7.2f}x" if len(t) > 1 else "     n/a"
        print(f"{name:28s} {t[0] * 1e6:8.1f}us {nb_col} {sp}")

    # end-to-end: the augmentation that drives training
    cfg = FourierMixConfig()
    saved = K.USE_NUMBA
    t = []
    for nb in paths:
        K.USE_NUMBA = nb
        t.append(best_of(lambda: fouriermix(img, cfg, Rng(1)), args.repeat))
    K.USE_NUMBA = saved
    nb_col = f"{t[1] * 1e3:8.2f}ms" if len(t) > 1 else "       n/a"
    print(f"{'fouriermix 32x32x3':28s} {t[0] * 1e3:8.2f}ms {nb_col}")


if __name__ == "__main__":
    main()
