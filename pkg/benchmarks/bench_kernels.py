"""Compare the compiled and NumPy kernels on the two hot loops.

Times the fused 13-point stencil and batched tridiagonal sweeps along both
axes over a few grid sizes, then one full ADI-Milstein step. Each figure is
the best of ``--repeats`` runs.

    python3 benchmarks/bench_kernels.py --sizes 64 256 512
"""

import argparse
import timeit

import numpy as np

from zakai_fd import kernels
from zakai_fd.model import Field, Grid2D, ModelParams
from zakai_fd.schemes import step_adi_milstein
from zakai_fd.solvers import factor_lines
from zakai_fd.stochastic import PathStep


def best(fn, repeats, number):
    return min(timeit.repeat(fn, repeat=repeats, number=number)) / number


def bench_size(n, repeats, backends):
    rng = np.random.default_rng(0)
    v = rng.standard_normal((n, n))
    w = rng.standard_normal(13)
    lo = np.full(n, -0.3)
    d = np.full(n, 1.6)
    up = np.full(n, -0.3)
    fx = factor_lines(lo, d, up, axis=0)
    fy = factor_lines(lo, d, up, axis=1)
    g = Grid2D.square(0.0, 1.0, 1.0 / (n + 1))
    u = Field(v, g)
    p = ModelParams(0.0809, 0.0809, 0.2, 0.2, 0.45)
    s = PathStep(0.3, -0.7)
    number = max(1, 200_000 // (n * n))
    rows = []
    for name in backends:
        cases = {
            "stencil13": lambda: kernels.stencil13(v, w, name),
            "solve_axis0": lambda: kernels.solve_lines(fx, v, name),
            "solve_axis1": lambda: kernels.solve_lines(fy, v, name),
            "adi_step": lambda: step_adi_milstein(u, p, 2.0 ** -8, s, backend=name),
        }
        for case, fn in cases.items():
            rows.append((n, case, name, best(fn, repeats, number)))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 512])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; timing the NumPy fallback only")
    else:
        backends.insert(0, "cython")

    print(f"{'n':>5} {'kernel':<12} " + " ".join(f"{b:>12}" for b in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for n in args.sizes:
        rows = bench_size(n, args.repeats, backends)
        for case in ("stencil13", "solve_axis0", "solve_axis1", "adi_step"):
            t = [r[3] for r in rows if r[1] == case]
            line = f"{n:>5} {case:<12} " + " ".join(f"{x * 1e3:>10.3f}ms" for x in t)
            if len(t) == 2:
                line += f" {t[1] / t[0]:>10.1f}x"
            print(line)


if __name__ == "__main__":
    main()
