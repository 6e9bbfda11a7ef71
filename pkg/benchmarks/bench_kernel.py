"""Compare the compiled and pure-Python integration kernels.

Run with ``python3 benchmarks/bench_kernel.py [--steps N] [--repeat R]``.
Both kernels integrate the same walk run; the script reports wall time per
backend, the speedup, and whether the final states are bit-identical.
"""
import argparse
import time

import numpy as np

from stein_cpg.integrator import SimConfig, Simulation
from stein_cpg.kernel import get_backend
from stein_cpg.model import gait_params


def run(backend_name: str, steps: int, repeat: int) -> tuple:
    backend = get_backend(backend_name)
    best = float("inf")
    final = None
    for _ in range(repeat):
        cfg = SimConfig(gait=gait_params("walk"), duration=steps * 1e-4)
        sim = Simulation(cfg, backend=backend)
        t0 = time.perf_counter()
        sim.advance(steps)
        best = min(best, time.perf_counter() - t0)
        final = sim.state.copy()
    return best, final


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000, help="RK4 steps per run (dt = 1e-4 s)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    try:
        get_backend("cython")
    except ImportError:
        print("compiled kernel not built; only the Python backend is available")
        return 1

    t_c, s_c = run("cython", args.steps, args.repeat)
    t_py, s_py = run("python", args.steps, max(1, args.repeat // 3))
    print(f"steps            {args.steps}")
    print(f"cython   {t_c:10.4f} s  {args.steps / t_c:12.0f} steps/s")
    print(f"python   {t_py:10.4f} s  {args.steps / t_py:12.0f} steps/s")
    print(f"speedup  {t_py / t_c:10.1f}x")
    print(f"bit-identical final state: {np.array_equal(s_c, s_py)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
