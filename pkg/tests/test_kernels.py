import importlib.util
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_field
from qglt import _kernels
from qglt.discretize import assemble_cut_even, assemble_star, direct_sum
from qglt.graph import GridSpec

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _args(op):
    return (op.diag, op.off, op.mass, op.coup, op.chain_block, op.vdiag, op.vmass, op.has_vertex)


def _ops(rng):
    g = GridSpec.from_length(0.05, 3.0)
    f = random_field(rng, 4, min_segments=1)
    return [assemble_star(f.graph, f, g), direct_sum(assemble_cut_even(f.graph, f, g))]


@needs_numba
def test_inertia_backends_agree(rng):
    for op in _ops(rng):
        shifts = np.linspace(op.min_potential_value() - 1, 1.0, 101)
        a = _kernels.inertia_many_numpy(*_args(op), shifts, 1e-14)
        b = _kernels.inertia_many_numba(*_args(op), shifts, 1e-14)
        assert np.array_equal(a, b)


@needs_numba
def test_solve_backends_agree(rng):
    for op in _ops(rng):
        rv = rng.standard_normal(op.n_blocks)
        rc = rng.standard_normal(op.diag.shape)
        a = _kernels.solve_shifted_numpy(*_args(op), -0.37, rv, rc)
        b = _kernels.solve_shifted_numba(*_args(op), -0.37, rv, rc)
        assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-12)
        assert np.allclose(a[1], b[1], rtol=1e-12, atol=1e-12)


def test_solve_matches_dense(rng):
    for op in _ops(rng):
        rv = rng.standard_normal(op.n_blocks) * op.has_vertex
        rc = rng.standard_normal(op.diag.shape)
        A, M = op.to_dense()
        for solve in (_kernels.solve_shifted_numpy, _kernels.solve_shifted):
            xv, xc = solve(*_args(op), -0.37, rv, rc)
            ref = np.linalg.solve(A + 0.37 * M, op.flatten(rv, rc))
            assert np.allclose(op.flatten(xv, xc), ref, rtol=1e-9, atol=1e-12)


def test_zero_pivot_is_flagged():
    g = GridSpec.from_length(0.5, 1.0)
    from qglt.discretize import assemble_half_line
    from qglt.graph import DIRICHLET, EdgePotential
    # single interior node with diag 2/h = 4 and mass h = 0.5: pivot vanishes at shift 8
    op = assemble_half_line(EdgePotential.zero(), g, DIRICHLET)
    assert _kernels.inertia_many_numpy(*_args(op), np.array([8.0]), 1e-12)[0] == -1
    assert _kernels.inertia_many(*_args(op), np.array([8.0]), 1e-12)[0] == -1


def test_env_flag_forces_numpy_backend():
    code = ("from qglt import _kernels, negative_spectrum, assemble_half_line, GridSpec, EdgePotential;"
            "op = assemble_half_line(EdgePotential([(1.0, -5.0)]), GridSpec.from_length(0.05, 6.0));"
            "print(_kernels.BACKEND, repr(list(negative_spectrum(op, 1e-12).eigenvalues)))")
    out = {}
    for flag in ("1", ""):
        env = dict(os.environ, QGLT_NO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, vals = res.stdout.strip().split(" ", 1)
        out[flag] = (backend, eval(vals))
    assert out["1"][0] == "numpy"
    # the parent may itself run with the flag set, so ask whether numba is installed
    assert out[""][0] == ("numba" if importlib.util.find_spec("numba") else "numpy")
    assert np.allclose(out["1"][1], out[""][1], atol=1e-12)
