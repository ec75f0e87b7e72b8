"""Time the compiled and pure-Python Darcy solves on each grid of the hierarchy.

Usage::

    python3 benchmarks/bench_solver.py --repeats 50
"""

import argparse
import timeit

import numpy as np

from mlda.darcy import DarcyProblem, _pykernels, solver


def backends():
    out = {"python": _pykernels}
    if solver.BACKEND == "cython":
        from mlda.darcy import _kernels

        out["cython"] = _kernels
    return out


def bench(problem, repeats, seed=0):
    """Median wall time per solve, per grid and backend."""
    rng = np.random.default_rng(seed)
    thetas = rng.standard_normal((repeats, problem.basis.n_modes))
    rows = []
    for fm in problem.forward_maps:
        fields = [fm.log_permeability(t) for t in thetas]
        times = {}
        for name, impl in backends().items():
            solver.solve_darcy(fields[0], backend=impl)  # warm-up
            samples = [timeit.timeit(lambda f=f: solver.solve_darcy(f, backend=impl), number=1) for f in fields]
            times[name] = float(np.median(samples))
        rows.append((fm.grid.m, times))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=30, help="random fields per grid")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    problem = DarcyProblem.build()
    rows = bench(problem, args.repeats, args.seed)
    names = list(rows[0][1])
    print("grid    " + "  ".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for m, times in rows:
        line = f"{m:>2}x{m:<4} " + "  ".join(f"{times[n] * 1e3:9.3f} ms" for n in names)
        if len(names) == 2:
            line += f"  {times['python'] / times['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
