"""Projected gradient ascent of the Lieb-Thirring ratio over cellwise potentials.

Potentials are nonpositive and constant on cells of width ``cell_width``
along each edge.  Eigenvalue derivatives come from first-order perturbation
theory of the discrete pencil, so the gradient is exact for the discrete ratio
whenever the negative eigenvalues are simple.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .discretize import DiscreteOperator, assemble_half_line, assemble_star
from .eigensolve import cluster_basis, eigenvector, negative_spectrum
from .errors import DegenerateSpectrum, NoConvergence
from .graph import DIRICHLET, NEUMANN, EdgePotential, GridSpec, PotentialField, StarGraph

log = logging.getLogger(__name__)

GRAD_TOL = "GradTol"
MAX_ITERS = "MaxIters"
STEP_UNDERFLOW = "StepUnderflow"


@dataclass(frozen=True)
class SearchConfig:
    cells_per_edge: int = 50
    cell_width: Optional[float] = None  # default 4h
    max_iters: int = 200
    step_init: float = 1.0
    step_shrink: float = 0.5
    tol_grad: float = 1e-9
    restarts: int = 3
    symmetrize: bool = False
    seed: int = 0
    # floor on cell values, default -0.02/h^2 (keeps |V| h^2 small)
    min_value: Optional[float] = None
    init_depth: float = 2.0
    tol_eig: float = 1e-11

    def __post_init__(self):
        if self.cells_per_edge < 1:
            raise ValueError("cells_per_edge must be >= 1")
        if not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")

    def resolved(self, grid: GridSpec) -> "SearchConfig":
        w = self.cell_width if self.cell_width is not None else 4 * grid.step
        floor = self.min_value if self.min_value is not None else -0.02 / grid.step ** 2
        k = w / grid.step
        if abs(k - round(k)) > 1e-9:
            raise ValueError("cell_width must be a multiple of the grid step")
        if self.cells_per_edge * w > grid.edge_length:
            raise ValueError("cells do not fit on the truncated edge")
        return replace(self, cell_width=w, min_value=floor)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SearchResult:
    best_field: PotentialField
    best_ratio: float
    iterate_trace: list
    terminated_by: str
    degenerate_warnings: int = 0
    restart_ratios: list = field(default_factory=list)

    def trace_tsv(self) -> str:
        rows = ["restart\titeration\tratio"]
        rows += [f"{r}\t{i}\t{v:.15g}" for r, i, v in self.iterate_trace]
        return "\n".join(rows) + "\n"

    def to_json(self) -> dict:
        return {
            "best_ratio": self.best_ratio,
            "best_field": self.best_field.to_json(),
            "terminated_by": self.terminated_by,
            "degenerate_warnings": self.degenerate_warnings,
            "restart_ratios": self.restart_ratios,
            "n_iterates": len(self.iterate_trace),
        }


def cells_to_profile(values, cell_width: float) -> EdgePotential:
    return EdgePotential(tuple((cell_width, float(v)) for v in values))


def cells_to_field(graph: StarGraph, cells, cell_width: float) -> PotentialField:
    cells = np.atleast_2d(cells)
    if cells.shape[0] == 1 and graph.n_edges > 1:
        cells = np.repeat(cells, graph.n_edges, axis=0)
    return PotentialField(graph, tuple(cells_to_profile(c, cell_width) for c in cells))


def field_to_cells(field: PotentialField, cell_width: float, cells_per_edge: int) -> np.ndarray:
    """Cell values (N, m) of a field that is constant on each cell."""
    mids = cell_width * (np.arange(cells_per_edge) + 0.5)
    out = np.array([[p(x) for x in mids] for p in field.per_edge])
    for j, p in enumerate(field.per_edge):
        if p.support > cells_per_edge * cell_width + 1e-12:
            raise ValueError(f"edge {j + 1} support exceeds the cell grid")
        for b in p.breakpoints():
            k = b / cell_width
            if abs(k - round(k)) > 1e-9:
                raise ValueError(f"edge {j + 1} has a breakpoint {b} off the cell grid")
    return out


def _overlap_weights(grid: GridSpec, m: int, w: float):
    """Dual-cell / potential-cell overlap lengths: (chain nodes x cells, vertex x cells)."""
    h = grid.step
    x = grid.nodes()
    lo = x - 0.5 * h
    hi = np.minimum(x + 0.5 * h, grid.edge_length)
    a = w * np.arange(m)
    b = a + w
    W = np.clip(np.minimum(hi[:, None], b[None, :]) - np.maximum(lo[:, None], a[None, :]), 0, None)
    wv = np.clip(np.minimum(0.5 * h, b) - np.maximum(0.0, a), 0, None)
    return W, wv


def _norm_and_grad(cells: np.ndarray, gamma: float, w: float, mult: float = 1.0):
    neg = np.clip(-cells, 0, None)
    I = mult * w * np.sum(neg ** (gamma + 0.5))
    # one-sided (V -> 0^-) derivative at zero cells; 0**0 = 1 covers gamma = 1/2
    dI = -mult * w * (gamma + 0.5) * neg ** (gamma - 0.5)
    return I, dI


def _clusters(ev: np.ndarray, gap: float) -> list:
    groups = []
    for k, e in enumerate(ev):
        if groups and e - ev[groups[-1][-1]] < gap:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def _trace_grad(op: DiscreteOperator, gamma: float, W, wv, tol_eig: float, on_degenerate: str,
                seed: int):
    """tr(op)_-^gamma and d/d(cell) per chain: arrays (C, m)."""
    spec = negative_spectrum(op, tol_eig=tol_eig)
    ev = spec.eigenvalues
    C = op.n_chains
    grad = np.zeros((C, W.shape[1]))
    T = float(np.sum((-ev) ** gamma)) if ev.size else 0.0
    degenerate = 0
    for group in _clusters(ev, 10 * tol_eig):
        if len(group) > 1:
            if on_degenerate == "raise":
                raise DegenerateSpectrum(
                    f"{len(group)} eigenvalues within {10 * tol_eig:g} near {ev[group[0]]:.6g}")
            funcs = cluster_basis(op, ev[group], tol_eig, seed=seed)
            degenerate += 1
        else:
            funcs = [eigenvector(op, ev[group[0]], tol_eig, seed=seed)]
        e = float(np.mean(ev[group]))
        fac = -gamma * (-e) ** (gamma - 1.0)
        for f in funcs:
            dE = (f.chains ** 2) @ W
            vb = f.vertex[op.chain_block] ** 2 * op.has_vertex[op.chain_block]
            dE += vb[:, None] * wv[None, :]
            grad += fac * dE
    return T, grad, degenerate


def ratio_and_gradient(graph: StarGraph, cells, gamma: float, grid: GridSpec, cell_width: float,
                       symmetrize: bool = False, tol_eig: float = 1e-11,
                       on_degenerate: str = "raise", seed: int = 0):
    """Return (R, dR/dcells, n_degenerate_clusters).

    ``cells`` has shape ``(m,)`` when ``symmetrize`` (radial profile) and
    ``(N, m)`` otherwise.
    """
    cells = np.asarray(cells, dtype=float)
    N = graph.n_edges
    m = cells.shape[-1]
    W, wv = _overlap_weights(grid, m, cell_width)
    if symmetrize:
        prof = cells_to_profile(cells, cell_width)
        T0, g0, d0 = _trace_grad(assemble_half_line(prof, grid, NEUMANN), gamma, W, wv, tol_eig,
                                 on_degenerate, seed)
        T, dT, deg = T0, g0[0], d0
        if N > 1:
            T1, g1, d1 = _trace_grad(assemble_half_line(prof, grid, DIRICHLET), gamma, W, wv,
                                     tol_eig, on_degenerate, seed)
            T += (N - 1) * T1
            dT = dT + (N - 1) * g1[0]
            deg += d1
        I, dI = _norm_and_grad(cells, gamma, cell_width, mult=N)
    else:
        if cells.shape != (N, m):
            raise ValueError(f"cells must have shape ({N}, m)")
        op = assemble_star(graph, cells_to_field(graph, cells, cell_width), grid)
        T, g, deg = _trace_grad(op, gamma, W, wv, tol_eig, on_degenerate, seed)
        dT = np.zeros_like(cells)
        dT[op.chain_edge] = g
        I, dI = _norm_and_grad(cells, gamma, cell_width)
    if I == 0.0:
        return 0.0, np.zeros_like(cells), deg
    R = T / I
    return R, (dT * I - T * dI) / I ** 2, deg


def ratio_gradient(graph: StarGraph, field, gamma: float, grid: GridSpec,
                   cell_width: Optional[float] = None, cells_per_edge: Optional[int] = None,
                   symmetrize: bool = False, tol_eig: float = 1e-11,
                   on_degenerate: str = "raise") -> np.ndarray:
    """Per-cell gradient of the discrete Lieb-Thirring ratio.

    ``field`` is either a cell array or a PotentialField constant on cells of
    width ``cell_width`` (default 4h); the result has shape (N, m), or (m,)
    for a symmetrized profile.
    """
    w = cell_width if cell_width is not None else 4 * grid.step
    if isinstance(field, PotentialField):
        if cells_per_edge is None:
            cells_per_edge = max(1, int(round(max(field.support, w) / w)))
        field = field_to_cells(field, w, cells_per_edge)
        if symmetrize:
            field = field[0]
    return ratio_and_gradient(graph, field, gamma, grid, w, symmetrize, tol_eig, on_degenerate)[1]


def evaluate_ratio(graph, cells, gamma, grid, cell_width, symmetrize=False, tol_eig=1e-11) -> float:
    """The ratio alone (no eigenvectors)."""
    from .functionals import riesz_mean

    cells = np.asarray(cells, dtype=float)
    N = graph.n_edges
    if symmetrize:
        prof = cells_to_profile(cells, cell_width)
        T = riesz_mean(negative_spectrum(assemble_half_line(prof, grid, NEUMANN), tol_eig), gamma)
        if N > 1:
            T += (N - 1) * riesz_mean(negative_spectrum(assemble_half_line(prof, grid, DIRICHLET),
                                                        tol_eig), gamma)
        I = _norm_and_grad(cells, gamma, cell_width, mult=N)[0]
    else:
        op = assemble_star(graph, cells_to_field(graph, cells, cell_width), grid)
        T = riesz_mean(negative_spectrum(op, tol_eig), gamma)
        I = _norm_and_grad(cells, gamma, cell_width)[0]
    return T / I if I > 0 else 0.0


def _projected(g, x, floor):
    pg = g.copy()
    pg[(x >= 0.0) & (g > 0)] = 0.0
    pg[(x <= floor) & (g < 0)] = 0.0
    return pg


def _ascend(graph, gamma, cfg: SearchConfig, grid, x, rng, restart: int):
    trace = []
    floor = cfg.min_value
    t = cfg.step_init
    degenerate = 0
    R, g = None, None
    best_R, best_x = -math.inf, x.copy()
    reason = MAX_ITERS
    for it in range(cfg.max_iters):
        if g is None:
            try:
                R, g, d = ratio_and_gradient(graph, x, gamma, grid, cfg.cell_width, cfg.symmetrize,
                                             cfg.tol_eig, on_degenerate="average", seed=cfg.seed)
                degenerate += d
            except (NoConvergence, DegenerateSpectrum):
                degenerate += 1
                x = np.clip(x + rng.uniform(-1, 1, x.shape) * cfg.step_init / 100, floor, 0.0)
                continue
        trace.append((restart, it, float(R)))
        if R > best_R:
            best_R, best_x = R, x.copy()
        pg = _projected(g, x, floor)
        gmax = np.max(np.abs(pg))
        if gmax <= cfg.tol_grad:
            reason = GRAD_TOL
            break
        d = pg / gmax
        while True:
            x_new = np.clip(x + t * d, floor, 0.0)
            R_new = evaluate_ratio(graph, x_new, gamma, grid, cfg.cell_width, cfg.symmetrize, cfg.tol_eig)
            if R_new >= R + 1e-4 * float(np.sum(g * (x_new - x))) and R_new > R:
                break
            t *= cfg.step_shrink
            if t < 1e-12 * (1.0 + np.max(np.abs(x))):
                reason = STEP_UNDERFLOW
                break
        if reason == STEP_UNDERFLOW:
            break
        x = x_new
        g = None
        t = min(2.0 * t, abs(floor))
    return best_R, best_x, trace, reason, degenerate


def _restart(args):
    graph, gamma, cfg, grid, r = args
    shape = (cfg.cells_per_edge,) if cfg.symmetrize else (graph.n_edges, cfg.cells_per_edge)
    rng = np.random.default_rng([cfg.seed, r])
    x0 = -rng.uniform(0.0, cfg.init_depth, shape)
    return _ascend(graph, gamma, cfg, grid, x0, rng, r)


def maximize_ratio(graph: StarGraph, gamma: float, config: SearchConfig, grid: GridSpec,
                   jobs: int = 1) -> SearchResult:
    """Best ratio over ``config.restarts`` seeded random starts.

    Restarts are independent and may run in ``jobs`` worker processes; the
    merge order does not depend on completion order.
    """
    cfg = config.resolved(grid)
    tasks = [(graph, gamma, cfg, grid, r) for r in range(cfg.restarts)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            outs = list(pool.map(_restart, tasks))
    else:
        outs = [_restart(t) for t in tasks]
    results = []
    trace, warnings_ = [], 0
    for r, (R, x, tr, reason, deg) in enumerate(outs):
        log.info("restart %d: ratio %.8f (%s, %d iterates)", r, R, reason, len(tr))
        results.append((R, r, x, reason))
        trace += tr
        warnings_ += deg
    R, r, x, reason = max(results, key=lambda t: (t[0], -t[1]))
    return SearchResult(cells_to_field(graph, x, cfg.cell_width), float(R), trace, reason, warnings_,
                        [float(t[0]) for t in results])
