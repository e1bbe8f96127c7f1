"""Rotation sectors of star graphs and the radial reduction.

For a radial potential the star pencil splits exactly into one Neumann
half-line pencil (the rotation-invariant sector) and N-1 copies of the
Dirichlet half-line pencil.  With N=2 this is the even/odd split of the line.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .discretize import DiscreteOperator, assemble_half_line, assemble_line, assemble_star
from .eigensolve import EdgeFunction, Spectrum, negative_spectrum, riesz_mean
from .errors import SectorOutOfRange
from .functionals import TOL_REPORT, LTConstants, lt_ratio
from .graph import (DIRICHLET, NEUMANN, EdgePotential, GridSpec, LinePotential, StarGraph,
                    potential_norm, radial_field, symmetric_extension, transplant)


@dataclass(frozen=True)
class SectorDecomposition:
    neumann_op: DiscreteOperator
    dirichlet_op: DiscreteOperator
    multiplicity: int
    grid: GridSpec
    profile: EdgePotential

    def spectra(self, tol_eig: float = 1e-10, tol_zero: Optional[float] = None):
        return (negative_spectrum(self.neumann_op, tol_eig, tol_zero),
                negative_spectrum(self.dirichlet_op, tol_eig, tol_zero))

    def merged_eigenvalues(self, tol_eig: float = 1e-10, tol_zero: Optional[float] = None) -> np.ndarray:
        neu, dir_ = self.spectra(tol_eig, tol_zero)
        return np.sort(np.concatenate([neu.eigenvalues] + [dir_.eigenvalues] * self.multiplicity))


def project_sector(psi: EdgeFunction, ell: int) -> EdgeFunction:
    """psi_k^(l) = (1/N) sum_j w^(l (k - j)) psi_j,  w = exp(2 pi i / N)."""
    op = psi.op
    N = op.n_chains
    if not 0 <= ell < N:
        raise SectorOutOfRange(f"sector {ell} out of range 0..{N - 1}")
    if op.n_blocks != 1 or not op.has_vertex[0]:
        raise ValueError("sector projection needs a single star with a shared vertex")
    order = np.argsort(op.chain_edge)
    chains = np.asarray(psi.chains, dtype=complex)[order]
    k = np.arange(N)
    F = np.exp(2j * np.pi * ell * (k[:, None] - k[None, :]) / N) / N
    out = np.empty_like(chains)
    out[order] = F @ chains
    vertex = np.asarray(psi.vertex, dtype=complex) * (1.0 if ell == 0 else 0.0)
    return EdgeFunction(vertex, out, op)


def decompose_radial(graph: StarGraph, profile: EdgePotential, grid: GridSpec) -> SectorDecomposition:
    return SectorDecomposition(assemble_half_line(profile, grid, NEUMANN),
                               assemble_half_line(profile, grid, DIRICHLET),
                               graph.n_edges - 1, grid, profile)


def multiset_distance(a, b) -> float:
    a, b = np.sort(np.asarray(a, dtype=float)), np.sort(np.asarray(b, dtype=float))
    if a.size != b.size:
        return math.inf
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def verify_sector_identity(graph: StarGraph, profile: EdgePotential, grid: GridSpec, gamma: float,
                           tol_eig: float = 1e-10, tol_zero: Optional[float] = None) -> dict:
    """tr H_-^g = tr(H0)_-^g + (N-1) tr(H1)_-^g, plus its line form."""
    N = graph.n_edges
    star = negative_spectrum(assemble_star(graph, radial_field(graph, profile), grid), tol_eig, tol_zero)
    dec = decompose_radial(graph, profile, grid)
    neu, dir_ = dec.spectra(tol_eig, tol_zero)
    lhs = riesz_mean(star, gamma)
    t_neu, t_dir = riesz_mean(neu, gamma), riesz_mean(dir_, gamma)
    rhs = t_neu + (N - 1) * t_dir
    out = {
        "identity": "sector",
        "n_edges": N,
        "gamma": gamma,
        "lhs": lhs,
        "rhs": rhs,
        "trace_neumann": t_neu,
        "trace_dirichlet": t_dir,
        "abs_residual": abs(lhs - rhs),
        "rel_residual": abs(lhs - rhs) / (1.0 + lhs),
        "multiset_distance": multiset_distance(star.eigenvalues, dec.merged_eigenvalues(tol_eig, tol_zero)),
        "grid": {"h": grid.step, "L": grid.edge_length},
    }
    if N >= 2:
        line = negative_spectrum(assemble_line(symmetric_extension(profile), grid), tol_eig, tol_zero)
        t_line = riesz_mean(line, gamma)
        key_rhs = t_line + (N - 2) * t_dir
        out["trace_line"] = t_line
        out["key_identity_residual"] = abs(lhs - key_rhs) / (1.0 + lhs)
    return out


def verify_neumann_dirichlet_split(profile: EdgePotential, grid: GridSpec, gamma: float,
                                   tol_eig: float = 1e-10, tol_zero: Optional[float] = None) -> dict:
    """tr(Neu)_-^g + tr(Dir)_-^g = tr(line with symmetric extension)_-^g."""
    line = negative_spectrum(assemble_line(symmetric_extension(profile), grid), tol_eig, tol_zero)
    neu = negative_spectrum(assemble_half_line(profile, grid, NEUMANN), tol_eig, tol_zero)
    dir_ = negative_spectrum(assemble_half_line(profile, grid, DIRICHLET), tol_eig, tol_zero)
    t_line, t_neu, t_dir = (riesz_mean(s, gamma) for s in (line, neu, dir_))
    merged = np.concatenate([neu.eigenvalues, dir_.eigenvalues])
    half_norm = profile.negative_norm(gamma + 0.5)
    const = LTConstants.for_gamma(gamma)
    # tr(Dir) >= 0 turns the line bound into a bound on the Neumann half alone
    neu_bound = 2.0 * const.reference * half_norm
    return {
        "identity": "lemma",
        "gamma": gamma,
        "trace_line": t_line,
        "trace_neumann": t_neu,
        "trace_dirichlet": t_dir,
        "abs_residual": abs(t_line - t_neu - t_dir),
        "rel_residual": abs(t_line - t_neu - t_dir) / (1.0 + t_line),
        "multiset_distance": multiset_distance(line.eigenvalues, merged),
        "half_line_norm": half_norm,
        "neumann_bound": neu_bound,
        "neumann_bound_ok": bool(t_neu <= neu_bound + TOL_REPORT * max(neu_bound, 1e-300))
        if const.calibrated else True,
        "provenance": const.provenance,
        "grid": {"h": grid.step, "L": grid.edge_length},
    }


@dataclass(frozen=True)
class TranslationSweep:
    offsets: np.ndarray
    ratios: np.ndarray
    line_ratio: float
    gamma: float

    @property
    def rel_gaps(self) -> np.ndarray:
        return np.abs(self.ratios - self.line_ratio) / self.line_ratio

    def to_tsv(self) -> str:
        lines = ["a\tratio\tline_ratio\trel_gap"]
        for a, r, g in zip(self.offsets, self.ratios, self.rel_gaps):
            lines.append(f"{a:.12g}\t{r:.12g}\t{self.line_ratio:.12g}\t{g:.6e}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"gamma": self.gamma, "line_ratio": self.line_ratio,
                "rows": [{"a": float(a), "ratio": float(r), "rel_gap": float(g)}
                         for a, r, g in zip(self.offsets, self.ratios, self.rel_gaps)]}


def _sweep_point(args):
    line, graph, a, gamma, grid, radial, tol_eig, tol_zero = args
    field = transplant(line, graph, 1, a, radial=radial)
    return lt_ratio(graph, field, gamma, grid, tol_eig, tol_zero).ratio


def line_ground_kappa(line: LinePotential, grid: GridSpec, tol_eig: float = 1e-10) -> float:
    ev = negative_spectrum(assemble_line(line, grid), tol_eig).eigenvalues
    return math.sqrt(-ev[-1]) if ev.size else 0.0


def sweep_grid(line: LinePotential, offsets: Sequence[float], step: float, buffer: float = 15.0) -> GridSpec:
    """Edge length covering the farthest translate plus ``buffer`` decay lengths."""
    probe = GridSpec.from_length(step, step * math.ceil((line.left.support + line.right.support + 40) / step))
    kappa = line_ground_kappa(line, probe)
    reach = max(offsets) + line.right.support
    extra = buffer / kappa if kappa > 0 else 40.0
    return GridSpec.from_length(step, step * math.ceil((reach + extra) / step))


def translation_sweep(line: LinePotential, graph: StarGraph, offsets: Sequence[float], gamma: float,
                      grid: GridSpec, radial: bool = True, tol_eig: float = 1e-10,
                      tol_zero: Optional[float] = None, jobs: int = 1) -> TranslationSweep:
    """Ratios of V(x - a) placed on Gamma_N (every edge if ``radial``, else edge 1)."""
    offsets = np.asarray(sorted(offsets), dtype=float)
    if np.any(np.diff(offsets) <= 0):
        raise ValueError("offsets must be strictly increasing")
    line_rep = lt_ratio(StarGraph(2), line.as_field(), gamma, grid, tol_eig, tol_zero)
    tasks = [(line, graph, a, gamma, grid, radial, tol_eig, tol_zero) for a in offsets]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            ratios = list(pool.map(_sweep_point, tasks))
    else:
        ratios = [_sweep_point(t) for t in tasks]
    return TranslationSweep(offsets, np.array(ratios), line_rep.ratio, gamma)


def sector_operator_apply(dec: SectorDecomposition, psi: EdgeFunction, ell: int):
    """Apply M^-1 A of sector ``ell``'s half-line operator edge by edge."""
    op = dec.neumann_op if ell == 0 else dec.dirichlet_op
    N = psi.op.n_chains
    out_c = np.empty_like(psi.chains)
    out_v = np.zeros_like(psi.vertex)
    for c in range(N):
        v = psi.vertex[:1] if ell == 0 else np.zeros(1, dtype=psi.chains.dtype)
        yv, yc = op.matvec(v, psi.chains[c:c + 1])
        out_c[c] = yc[0] / op.mass[0]
        if ell == 0:
            out_v[0] = yv[0] / op.vmass[0]
    return out_v, out_c
