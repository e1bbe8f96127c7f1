"""Compare the numba and numpy kernel backends on star operators.

    python benchmarks/bench_kernels.py [--edges 3 5] [--h 0.01 0.005] [--repeat 5]

Prints one TSV row per (kernel, N, h): median seconds for each backend, the
speedup, and whether both backends agree (identical inertia counts, solves
to 1e-12 relative).
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from qglt import _kernels
from qglt.discretize import assemble_star
from qglt.eigensolve import PIVOT_TOL, negative_spectrum
from qglt.graph import EdgePotential, GridSpec, PotentialField, StarGraph


def random_field(n_edges: int, rng: np.random.Generator) -> PotentialField:
    edges = []
    for _ in range(n_edges):
        segs = [(0.1 * rng.integers(1, 11), -rng.uniform(0.5, 40.0)) for _ in range(rng.integers(1, 4))]
        edges.append(EdgePotential(segs))
    return PotentialField(StarGraph(n_edges), tuple(edges))


def _args(op):
    return (op.diag, op.off, op.mass, op.coup, op.chain_block, op.vdiag, op.vmass, op.has_vertex)


def timed(fn, repeat: int) -> float:
    fn()  # warm-up (and JIT compile)
    samples = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t)
    return statistics.median(samples)


def bench_op(op, repeat: int, n_shifts: int = 256):
    shifts = np.linspace(op.min_potential_value() - 1.0, 0.0, n_shifts)
    tol = PIVOT_TOL * op.scale()
    rng = np.random.default_rng(1)
    rv = rng.standard_normal(op.n_blocks)
    rc = rng.standard_normal(op.diag.shape)
    shift = 0.5 * op.min_potential_value() + 1e-3
    rows = []

    ref = _kernels.inertia_many_numpy(*_args(op), shifts, tol)
    t_np = timed(lambda: _kernels.inertia_many_numpy(*_args(op), shifts, tol), repeat)
    if _kernels.HAVE_NUMBA:
        got = _kernels.inertia_many_numba(*_args(op), shifts, tol)
        t_nb = timed(lambda: _kernels.inertia_many_numba(*_args(op), shifts, tol), repeat)
        rows.append(("inertia_many", t_np, t_nb, bool(np.array_equal(ref, got))))
    else:
        rows.append(("inertia_many", t_np, float("nan"), True))

    xv, xc = _kernels.solve_shifted_numpy(*_args(op), shift, rv, rc)
    t_np = timed(lambda: _kernels.solve_shifted_numpy(*_args(op), shift, rv, rc), repeat)
    if _kernels.HAVE_NUMBA:
        yv, yc = _kernels.solve_shifted_numba(*_args(op), shift, rv, rc)
        scale = max(np.max(np.abs(xc)), np.max(np.abs(xv)), 1e-300)
        ok = max(np.max(np.abs(xc - yc)), np.max(np.abs(xv - yv))) <= 1e-12 * scale
        t_nb = timed(lambda: _kernels.solve_shifted_numba(*_args(op), shift, rv, rc), repeat)
        rows.append(("solve_shifted", t_np, t_nb, bool(ok)))
    else:
        rows.append(("solve_shifted", t_np, float("nan"), True))
    return rows


def bench_spectrum(op, repeat: int):
    """End-to-end negative_spectrum with each backend swapped in."""
    saved = _kernels.inertia_many
    out = {}
    try:
        backends = [("numpy", _kernels.inertia_many_numpy)]
        if _kernels.HAVE_NUMBA:
            backends.append(("numba", _kernels.inertia_many_numba))
        for name, fn in backends:
            _kernels.inertia_many = fn
            out[name] = (timed(lambda: negative_spectrum(op), repeat), negative_spectrum(op).eigenvalues)
    finally:
        _kernels.inertia_many = saved
    agree = True
    if "numba" in out:
        agree = bool(np.array_equal(out["numpy"][1], out["numba"][1]))
    return out["numpy"][0], out.get("numba", (float("nan"),))[0], agree


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--edges", type=int, nargs="+", default=[3, 5])
    p.add_argument("--h", type=float, nargs="+", default=[0.01, 0.005])
    p.add_argument("--len", type=float, default=20.0)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)

    print(f"# numba available: {_kernels.HAVE_NUMBA}; active backend: {_kernels.BACKEND}")
    print("kernel\tN\th\tnumpy_s\tnumba_s\tspeedup\tagree")
    rng = np.random.default_rng(a.seed)
    for N in a.edges:
        fld = random_field(N, rng)
        for h in a.h:
            op = assemble_star(fld.graph, fld, GridSpec.from_length(h, a.len))
            rows = bench_op(op, a.repeat)
            rows.append(("negative_spectrum", *bench_spectrum(op, a.repeat)))
            for name, t_np, t_nb, ok in rows:
                print(f"{name}\t{N}\t{h:g}\t{t_np:.3e}\t{t_nb:.3e}\t{t_np / t_nb:.1f}\t{ok}")


if __name__ == "__main__":
    main()
