import numpy as np
import pytest

from qglt import search
from qglt.errors import DegenerateSpectrum
from qglt.functionals import check_theorem1, lt_ratio
from qglt.graph import EdgePotential, GridSpec, StarGraph, radial_field
from qglt.search import (SearchConfig, cells_to_field, evaluate_ratio, field_to_cells, maximize_ratio,
                         ratio_and_gradient, ratio_gradient)

GRID = GridSpec.from_length(0.02, 8.0)
W = 0.08


def fd_gradient(graph, x, gamma, symmetrize=False, dv=1e-5):
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += dv
        xm[idx] -= dv
        fd[idx] = (evaluate_ratio(graph, xp, gamma, GRID, W, symmetrize, 1e-13)
                   - evaluate_ratio(graph, xm, gamma, GRID, W, symmetrize, 1e-13)) / (2 * dv)
    return fd


@pytest.mark.parametrize("N, symmetrize, gamma", [(2, False, 0.5), (3, False, 1.5), (3, True, 0.5),
                                                  (4, False, 2.0)])
def test_gradient_matches_finite_differences(N, symmetrize, gamma):
    rng = np.random.default_rng(N)
    x = -rng.uniform(0.5, 20.0, (5,) if symmetrize else (N, 5))
    R, g, deg = ratio_and_gradient(StarGraph(N), x, gamma, GRID, W, symmetrize, tol_eig=1e-13)
    assert deg == 0
    fd = fd_gradient(StarGraph(N), x, gamma, symmetrize)
    assert np.max(np.abs(g - fd)) <= 1e-5 * np.max(np.abs(fd))


def test_single_cell_well_on_line():
    x = np.zeros((2, 4))
    x[0, 1:3] = [-15.0, -4.0]
    g = ratio_gradient(StarGraph(2), x, 0.5, GRID, W, on_degenerate="raise")
    fd = fd_gradient(StarGraph(2), x, 0.5)
    # zero cells carry a one-sided derivative; compare on the well cells
    well = x < 0
    assert np.max(np.abs(g[well] - fd[well])) <= 1e-5 * np.max(np.abs(fd[well]))


def test_radial_gradient_identical_across_edges():
    prof = EdgePotential([(0.08, -5.0), (0.08, -9.0)])
    f = radial_field(StarGraph(3), prof)
    g = ratio_gradient(StarGraph(3), f, 0.5, GRID, W, cells_per_edge=2, symmetrize=True)
    assert g.shape == (2,)
    # the non-symmetrized field gradient, summed over edges, matches the radial one
    g_full = ratio_gradient(StarGraph(3), f, 0.5, GRID, W, cells_per_edge=2, on_degenerate="average")
    assert np.allclose(g_full, g_full[0]) and np.allclose(g_full.sum(axis=0), g, rtol=1e-6)


def test_degenerate_spectrum_raises():
    f = radial_field(StarGraph(3), EdgePotential([(0.8, -10.0)]))
    with pytest.raises(DegenerateSpectrum):
        ratio_gradient(StarGraph(3), f, 0.5, GRID, W, cells_per_edge=10)


def test_no_bound_states_gives_zero_gradient():
    x = np.full((2, 3), 0.0)
    R, g, _ = ratio_and_gradient(StarGraph(2), x, 0.5, GRID, W)
    assert R == 0.0 and np.all(g == 0.0)
    # positive cells are not admissible, but T = 0 keeps the gradient of T at zero
    x = np.full((2, 3), -1e-6)
    grid = GridSpec.from_length(0.02, 1.0)
    R, g, _ = ratio_and_gradient(StarGraph(2), x, 1.5, grid, W)
    assert R == 0.0 and np.all(g == 0.0)


def test_field_cells_roundtrip():
    x = -np.arange(1.0, 7.0).reshape(2, 3)
    f = cells_to_field(StarGraph(2), x, W)
    assert np.array_equal(field_to_cells(f, W, 3), x)
    with pytest.raises(ValueError):
        field_to_cells(radial_field(StarGraph(2), EdgePotential([(0.05, -1.0)])), W, 3)


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(cells_per_edge=0)
    with pytest.raises(ValueError):
        SearchConfig(step_init=0.0)
    with pytest.raises(ValueError):
        SearchConfig(cells_per_edge=500).resolved(GRID)
    with pytest.raises(ValueError):
        SearchConfig(cell_width=0.03).resolved(GRID)
    cfg = SearchConfig().resolved(GRID)
    assert cfg.cell_width == pytest.approx(0.08) and cfg.min_value == pytest.approx(-0.02 / 0.02 ** 2)


@pytest.fixture(scope="module")
def small_search():
    cfg = SearchConfig(cells_per_edge=10, max_iters=25, restarts=2, seed=7)
    return cfg, maximize_ratio(StarGraph(3), 0.5, cfg, GRID)


def test_search_result_invariants(small_search):
    cfg, res = small_search
    ratios = [v for _, _, v in res.iterate_trace]
    assert res.best_ratio == max(ratios)
    assert res.terminated_by in ("GradTol", "MaxIters", "StepUnderflow")
    again = lt_ratio(StarGraph(3), res.best_field, 0.5, GRID, tol_eig=1e-12).ratio
    assert abs(again - res.best_ratio) < 1e-8
    assert all(v <= 0.0 for p in res.best_field.per_edge for v in p.values())
    assert len(res.restart_ratios) == 2


def test_iterates_respect_theorem1(small_search):
    cfg, res = small_search
    bound = check_theorem1(StarGraph(3), res.best_field, 0.5, GRID).bound
    assert max(v for _, _, v in res.iterate_trace) <= bound + 1e-4


def test_search_is_deterministic(small_search):
    cfg, res = small_search
    res2 = maximize_ratio(StarGraph(3), 0.5, cfg, GRID)
    a = np.array([v for _, _, v in res.iterate_trace])
    b = np.array([v for _, _, v in res2.iterate_trace])
    assert a.shape == b.shape and np.max(np.abs(a - b)) <= 1e-12


def test_scaling_neutrality(small_search):
    cfg, res = small_search
    lam = 2.0
    r = lt_ratio(StarGraph(3), res.best_field.scaled(lam), 0.5, GRID.scaled(lam), tol_eig=1e-12).ratio
    assert abs(r - res.best_ratio) < 10 * GRID.step ** 2


def test_degenerate_steps_fall_back_to_perturbation(monkeypatch):
    real = search.ratio_and_gradient
    calls = {"n": 0}

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] == 1:
            raise DegenerateSpectrum("forced")
        return real(*a, **kw)

    monkeypatch.setattr(search, "ratio_and_gradient", flaky)
    res = maximize_ratio(StarGraph(2), 1.5, SearchConfig(cells_per_edge=5, max_iters=5, restarts=1), GRID)
    assert res.degenerate_warnings >= 1 and res.iterate_trace


def test_trace_tsv_and_json(small_search):
    cfg, res = small_search
    lines = res.trace_tsv().splitlines()
    assert lines[0] == "restart\titeration\tratio" and len(lines) == len(res.iterate_trace) + 1
    d = res.to_json()
    assert d["best_field"]["n_edges"] == 3 and d["terminated_by"] == res.terminated_by
