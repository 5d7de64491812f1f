"""Compare the compiled and NumPy kernel backends.

Usage: ``python benchmarks/bench_kernels.py [--sizes 32 64 128] [--repeat 3]``

For each grid size the script times bicubic interpolation at ``N^2`` scattered
points and the log-ball-average kernel of the flow functional, checks that
both backends agree, and prints a table of best-of-``repeat`` timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mixlab import _kernels
from mixlab.estimates import _offsets, g_radii
from mixlab.transport import flow_map
from mixlab.velocity import alternating_shear


def best_of(fn, repeat: int) -> tuple[float, np.ndarray]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(sizes, repeat: int) -> None:
    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the NumPy backend is timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'N':>6}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max diff':>11}")
    for N in sizes:
        samples = rng.standard_normal((N, N))
        x = rng.uniform(0, 1, (N, N))
        y = rng.uniform(0, 1, (N, N))
        fl = flow_map(alternating_shear(1.0, 0.5), 0.0, 1.0, 0.01, N)
        px, py = (np.ascontiguousarray(v) for v in fl.torus_positions())
        radii = g_radii(N)
        a, b, jmin, counts = _offsets(N, tuple(float(r) for r in radii))
        cases = {
            "bicubic": lambda: _kernels.bicubic_periodic(samples, x, y),
            "log_ball_means": lambda: _kernels.log_ball_averages(px, py, a, b, jmin, radii, counts),
        }
        for name, fn in cases.items():
            times, outs = [], []
            for backend in backends:
                _kernels.use_backend(backend)
                t, out = best_of(fn, repeat)
                times.append(t)
                outs.append(out)
            speed = f"{times[0] / times[-1]:.1f}x" if len(times) > 1 else "-"
            diff = f"{np.max(np.abs(outs[0] - outs[-1])):.1e}" if len(outs) > 1 else "-"
            print(f"{name:<18}{N:>6}" + "".join(f"{t:>11.4f}s" for t in times) + f"{speed:>10}{diff:>11}")
    _kernels.use_backend(backends[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    run(args.sizes, args.repeat)


if __name__ == "__main__":
    main()
