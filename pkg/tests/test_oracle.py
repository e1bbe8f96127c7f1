import math
import warnings

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from conftest import random_field
from qglt.discretize import assemble_star
from qglt.eigensolve import negative_spectrum
from qglt.errors import NonpositiveAlpha, NonpositiveKappa
from qglt.graph import EdgePotential, GridSpec, LinePotential, PotentialField, StarGraph, radial_field
from qglt.discretize import assemble_half_line
from qglt.eigensolve import inertia
from qglt.oracle import (ScanTooCoarse, boundary_data, delta_line_eigenvalue, dirichlet_count, dtn_value,
                         half_line_bound_states, line_bound_states, radial_bound_states,
                         secular_bound_states, secular_scan)


def square_well_states(V0, a):
    """Bound states of depth V0 on [-a, a]: even k tan(ka) = kappa, odd -k cot(ka) = kappa."""
    even, odd = [], []
    z0 = a * math.sqrt(V0)
    f_even = lambda z: z * math.tan(z) - math.sqrt(z0 ** 2 - z ** 2)
    f_odd = lambda z: -z / math.tan(z) - math.sqrt(z0 ** 2 - z ** 2)
    n = 0
    while n * math.pi / 2 < z0:
        lo, hi = n * math.pi / 2 + 1e-12, min((n + 1) * math.pi / 2 - 1e-12, z0)
        f = f_even if n % 2 == 0 else f_odd
        if f(lo) * f(hi) < 0:
            z = brentq(f, lo, hi, xtol=1e-15)
            (even if n % 2 == 0 else odd).append(-(V0 - (z / a) ** 2))
        n += 1
    return np.array(even), np.array(odd)


@pytest.mark.parametrize("V0, a", [(1.0, 1.0), (10.0, 0.5), (50.0, 1.5), (0.3, 2.0)])
def test_line_square_well(V0, a):
    even, odd = square_well_states(V0, a)
    ref = np.sort(np.concatenate([even, odd]))
    prof = EdgePotential([(a, -V0)])
    got = line_bound_states(LinePotential(prof, prof)).eigenvalues
    assert got.shape == ref.shape and np.allclose(got, ref, atol=1e-10)
    # half-line: Neumann keeps the even states, Dirichlet the odd ones
    assert np.allclose(half_line_bound_states(prof, "neumann").eigenvalues, np.sort(even), atol=1e-10)
    assert np.allclose(half_line_bound_states(prof, "dirichlet").eigenvalues, np.sort(odd), atol=1e-10)


def test_radial_star_multiplicity():
    prof = EdgePotential([(1.0, -6.0), (0.5, 1.0)])
    for N in (3, 5):
        got = radial_bound_states(StarGraph(N), prof).eigenvalues
        neu = half_line_bound_states(prof, "neumann").eigenvalues
        dir_ = half_line_bound_states(prof, "dirichlet").eigenvalues
        ref = np.sort(np.concatenate([neu] + [dir_] * (N - 1)))
        assert np.allclose(got, ref, atol=1e-9)


def test_boundary_data_matches_ode_shooting():
    prof = EdgePotential([(0.7, -4.0), (0.4, 2.0), (0.6, -9.0)])
    kappa = 1.3
    L = prof.support

    def rhs(x, y):
        return [y[1], (prof(x) + kappa ** 2) * y[0]]

    # start from the decaying tail at the end of the support and integrate back
    sol = solve_ivp(rhs, [L, 0.0], [1.0, -kappa], rtol=1e-12, atol=1e-14, max_step=0.01)
    u, du = sol.y[0, -1], sol.y[1, -1]
    bu, bdu = boundary_data(prof, kappa)
    assert math.isclose(bdu / bu, du / u, rel_tol=1e-8)
    assert math.isclose(dtn_value(prof, kappa), du / u, rel_tol=1e-8)


def test_free_edge_dtn_is_minus_kappa():
    assert math.isclose(dtn_value(EdgePotential.zero(), 2.0), -2.0)
    with pytest.raises(NonpositiveKappa):
        boundary_data(EdgePotential.zero(), 0.0)


def test_delta_eigenvalue():
    assert delta_line_eigenvalue(2.0) == -1.0
    with pytest.raises(NonpositiveAlpha):
        delta_line_eigenvalue(0.0)


def test_coarse_scan_is_refined():
    prof = EdgePotential([(3.0, -400.0)])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        coarse = secular_bound_states(StarGraph(3), radial_field(StarGraph(3), prof), n_scan=8)
    assert any(issubclass(w.category, ScanTooCoarse) for w in rec)
    fine = secular_bound_states(StarGraph(3), radial_field(StarGraph(3), prof), n_scan=4000)
    assert np.allclose(coarse.eigenvalues, fine.eigenvalues, atol=1e-9)


def test_scan_reports_dirichlet_type_roots():
    prof = EdgePotential([(1.0, -6.0)])
    scan = secular_scan(StarGraph(4), radial_field(StarGraph(4), prof))
    assert len(scan.dirichlet_type_roots) == 1 and scan.dirichlet_type_roots[0][1] == 3


def test_non_radial_star_agrees_with_fine_discretization(rng):
    for N in (2, 3, 4):
        f = random_field(rng, N, min_segments=1, depth_max=20)
        ref = secular_bound_states(f.graph, f).eigenvalues
        ref = ref[ref < -0.01]  # keep states well inside the truncated box
        op = assemble_star(f.graph, f, GridSpec.from_length(0.002, 40.0))
        got = negative_spectrum(op, 1e-12).eigenvalues[:ref.size]
        assert np.allclose(got, ref, atol=max(1e-6, 5 * 0.002 ** 2) * 10)


def test_dirichlet_oscillation_count_matches_inertia(rng):
    for _ in range(40):
        segs = [(0.1 * rng.integers(1, 11), rng.uniform(-40, 5)) for _ in range(rng.integers(1, 4))]
        p = EdgePotential(segs)
        kappa = rng.uniform(0.05, 3.0)
        op = assemble_half_line(p, GridSpec.from_length(0.002, 25.0), "dirichlet")
        assert dirichlet_count(p, kappa) == inertia(op, -kappa ** 2)
