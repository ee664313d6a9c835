"""Time each hot kernel on the compiled and the numpy backend.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 5] [--threads 4]
"""
from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from automatte import kernels
from automatte.raster import rgb_to_lab
from automatte.segmentation import _init_centers


def cases(size: int, threads: int):
    rng = np.random.default_rng(0)
    binary = (rng.random((size, size)) < 0.7).astype(np.uint8)
    rgb = rng.integers(0, 256, (size, size, 3)).astype(np.uint8)
    lab = rgb_to_lab(rgb)
    centers, step = _init_centers(lab, 300)
    labels = np.full((size, size), -1, np.int32)
    dist = np.empty((size, size))
    colors = rgb / 255.0
    active = np.ones((size - 2, size - 2), np.uint8)

    def assign(mod):
        return lambda: mod.slic_assign(lab, centers, step, (10 / step) ** 2, labels, dist)

    return [
        ("erode r=5", lambda mod: lambda: mod.morph_disk(binary, 5, True, 1)),
        ("dilate r=10", lambda mod: lambda: mod.morph_disk(binary, 10, False, 1)),
        (f"dilate r=10 x{threads} threads", lambda mod: lambda: mod.morph_disk(binary, 10, False, threads)),
        ("slic assign sweep", assign),
        ("slic accumulate", lambda mod: lambda: mod.slic_accumulate(lab, np.zeros((size, size), np.int32), centers.shape[0])),
        ("laplacian bands", lambda mod: lambda: mod.laplacian_bands(colors, active, 1e-5)),
    ]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--size", type=int, default=256, help="square image side")
    ap.add_argument("--repeat", type=int, default=5, help="best-of repeats per kernel")
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"image {args.size}x{args.size}, best of {args.repeat}; backends: {', '.join(names)}")
    header = f"{'kernel':28s}" + "".join(f"{n + ' ms':>14s}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for label, make in cases(args.size, args.threads):
        row = []
        for n in names:
            fn = make(backends[n])
            fn()  # warm up
            row.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3)
        line = f"{label:28s}" + "".join(f"{t:14.2f}" for t in row)
        if len(row) == 2 and row[0] > 0:
            line += f"{row[1] / row[0]:9.1f}x" if not math.isclose(row[0], 0) else ""
        print(line)


if __name__ == "__main__":
    main()
