"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import math
import timeit

import numpy as np

from pushgrasp.kernels import compiled_backend, python_backend


def cases():
    rng = np.random.default_rng(0)
    img = rng.random((20, 64, 64))
    tri = np.array([[0.20, 0.20], [0.235, 0.20], [0.2175, 0.23]])
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    return {
        "raster_polygon": lambda b: b.raster_polygon(tri, 0.0, 0.0, 0.01, 64, 64),
        "raster_disc": lambda b: b.raster_disc(0.3, 0.3, 0.015, 0.0, 0.0, 0.01, 64, 64),
        "rotate_bilinear 20x64x64": lambda b: b.rotate_bilinear(img, c, s),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    backends = [("python", python_backend)]
    if compiled_backend is not None:
        backends.append(("compiled", compiled_backend))
    else:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<26}" + "".join(f"{n:>14}" for n, _ in backends) + "   speedup")
    for name, fn in cases().items():
        times = []
        for _, b in backends:
            fn(b)  # warm up
            times.append(min(timeit.repeat(lambda: fn(b), number=args.repeat, repeat=3)) / args.repeat)
        cols = "".join(f"{t * 1e6:>12.1f}us" for t in times)
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{name:<26}{cols}{speed}")


if __name__ == "__main__":
    main()
