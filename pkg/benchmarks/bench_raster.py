"""Benchmark the compiled scanline kernel against the pure-python one.

Renders the same randomly generated documents with both kernels, reports
best-of-N wall times, and verifies the outputs are bitwise identical.

    python benchmarks/bench_raster.py --size 512 --paths 40 --repeat 5
"""

import argparse
import random
import time

import numpy as np

from svgforge.model import Arc, CanonicalDocument, CanonicalPath, Close, Line, Move
from svgforge.parse import Rgb
from svgforge.raster.image import rasterize
from svgforge.raster.scanfill import ACTIVE_KERNEL, HAVE_COMPILED


def random_document(rng: random.Random, paths: int) -> CanonicalDocument:
    out = []
    for _ in range(paths):
        fill = Rgb(rng.randrange(256), rng.randrange(256), rng.randrange(256))
        cx, cy = rng.uniform(20, 180), rng.uniform(20, 180)
        r = rng.uniform(5, 60)
        if rng.random() < 0.5:
            n = rng.randint(5, 12)
            pts = []
            for k in range(n):
                ang = 2 * 3.141592653589793 * k / n
                rad = r * rng.uniform(0.5, 1.0)
                pts.append((cx + rad * np.cos(ang), cy + rad * np.sin(ang)))
            cmds = [Move(*pts[0])] + [Line(*p) for p in pts[1:]] + [Close()]
        else:
            cmds = [
                Move(cx + r, cy),
                Arc(r, r, 0.0, 1, 1, cx - r, cy),
                Arc(r, r, 0.0, 1, 1, cx + r, cy),
                Close(),
            ]
        out.append(CanonicalPath(fill=fill, commands=tuple(cmds)))
    return CanonicalDocument(paths=out)


def bench(doc: CanonicalDocument, size: int, repeat: int, impl: str) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        rasterize(doc, size, size, impl=impl)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--paths", type=int, default=40)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=20240817)
    args = parser.parse_args()

    doc = random_document(random.Random(args.seed), args.paths)
    print(f"active kernel: {ACTIVE_KERNEL} (compiled available: {HAVE_COMPILED})")
    print(f"{args.paths} paths at {args.size}x{args.size}, best of {args.repeat}")

    py_time = bench(doc, args.size, args.repeat, "python")
    print(f"  python    {py_time * 1000:8.2f} ms")
    if not HAVE_COMPILED:
        print("  compiled  unavailable; build the extension to compare")
        return 0

    c_time = bench(doc, args.size, args.repeat, "compiled")
    print(f"  compiled  {c_time * 1000:8.2f} ms")
    print(f"  speedup   {py_time / c_time:8.2f}x")

    a = rasterize(doc, args.size, args.size, impl="python")
    b = rasterize(doc, args.size, args.size, impl="compiled")
    identical = np.array_equal(a.pixels, b.pixels)
    print(f"  outputs bitwise identical: {identical}")
    return 0 if identical else 1


if __name__ == "__main__":
    raise SystemExit(main())
