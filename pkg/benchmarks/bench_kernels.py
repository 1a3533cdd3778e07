#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Sizes mirror the real workload: attention-map softmax rows, token-map
upsampling to frame resolution, normalize/threshold over full candidate
grids, elementwise blends, and IoU counting.
"""

import argparse
import time

import numpy as np

from maskmatch.kernels import _pykernels

try:
    from maskmatch.kernels import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, args, repeats):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    rows = np.ascontiguousarray(rng.normal(size=(4 * 256, 256)))
    token_map = np.ascontiguousarray(rng.random((16, 16)))
    flat = np.ascontiguousarray(rng.random(4 * 64 * 64))
    src = np.ascontiguousarray(rng.normal(size=4 * 64 * 64))
    edit = np.ascontiguousarray(rng.normal(size=src.shape))
    mask = np.ascontiguousarray((rng.random(src.shape) < 0.5).astype(np.float64))
    bits_a = np.ascontiguousarray((rng.random(4 * 64 * 64) < 0.3).astype(np.uint8))
    bits_b = np.ascontiguousarray((rng.random(4 * 64 * 64) < 0.3).astype(np.uint8))

    cases = [
        ("softmax 1024x256 rows", "softmax_lastaxis", (rows,)),
        ("bilinear 16->512 square", "resize_bilinear_2d", (token_map, 512, 512)),
        ("minmax 16k cells", "minmax_normalize_flat", (flat,)),
        ("threshold 16k cells", "threshold_binarize_flat", (flat, 0.3)),
        ("lerp 16k cells", "lerp_flat", (src, edit, mask)),
        ("iou counts 16k cells", "mask_counts", (bits_a, bits_b)),
    ]

    print(f"{'kernel':<28} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for label, name, call_args in cases:
        t_py = bench(getattr(_pykernels, name), call_args, args.repeats)
        if _ckernels is None:
            print(f"{label:<28} {t_py * 1e3:>8.3f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_cy = bench(getattr(_ckernels, name), call_args, args.repeats)
        print(
            f"{label:<28} {t_py * 1e3:>8.3f}ms {t_cy * 1e3:>8.3f}ms {t_py / t_cy:>7.1f}x"
        )
    if _ckernels is None:
        print("\ncompiled backend not built; install with the Cython extension to compare")


if __name__ == "__main__":
    main()
