"""Trapezoid-mass Galerkin discretization of H on stars, half-lines and the line.

The quadratic form  int |psi'|^2 + V |psi|^2  is discretized with piecewise
linear elements and a lumped (trapezoid) mass.  The potential enters as the
exact integral of V over each node's dual cell, so that summing the diagonal
potential entries reproduces int V exactly and cut/sector operators are exact
restrictions of the star pencil.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySplit, OddEdgeCount, SupportExceedsGrid
from .graph import (DIRICHLET, NEUMANN, EdgePotential, GridSpec, LinePotential, PotentialField,
                    StarGraph)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Pencil (A, M) with A = kinetic + potential, M diagonal.

    Storage: ``C`` chains of length ``n`` (arrays of shape ``(C, n)``) and
    ``B`` blocks, each with at most one vertex unknown coupled to the first
    node of every chain in the block.
    """

    structure: str
    grid: GridSpec
    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray
    pot: np.ndarray
    coup: np.ndarray
    chain_block: np.ndarray
    chain_edge: np.ndarray
    vdiag: np.ndarray
    vmass: np.ndarray
    vpot: np.ndarray
    has_vertex: np.ndarray
    block_labels: tuple

    @property
    def n_chains(self) -> int:
        return self.diag.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.vdiag.shape[0]

    @property
    def vertex_count(self) -> int:
        return int(self.has_vertex.sum())

    @property
    def n_unknowns(self) -> int:
        return self.diag.size + self.vertex_count

    def min_potential_value(self) -> float:
        vals = [np.min(self.pot / self.mass)] if self.pot.size else [0.0]
        if self.vertex_count:
            vals.append(np.min(self.vpot[self.has_vertex] / self.vmass[self.has_vertex]))
        return float(min(vals))

    def scale(self) -> float:
        """Magnitude used for relative pivot and residual thresholds."""
        return float(max(np.max(np.abs(self.diag) / self.mass), 1.0))

    def kinetic(self) -> "DiscreteOperator":
        return _replace(self, diag=self.diag - self.pot, pot=np.zeros_like(self.pot),
                        vdiag=self.vdiag - self.vpot, vpot=np.zeros_like(self.vpot))

    # dense views, for tests and debugging -------------------------------------------------

    def index_map(self):
        """Dense ordering: per block, the vertex (if any) then each chain's nodes."""
        n = self.diag.shape[1]
        vidx = np.full(self.n_blocks, -1)
        cidx = np.empty((self.n_chains, n), dtype=int)
        k = 0
        for b in range(self.n_blocks):
            if self.has_vertex[b]:
                vidx[b] = k
                k += 1
            for c in np.flatnonzero(self.chain_block == b):
                cidx[c] = np.arange(k, k + n)
                k += n
        return vidx, cidx

    def to_dense(self):
        vidx, cidx = self.index_map()
        N = self.n_unknowns
        A = np.zeros((N, N))
        M = np.zeros(N)
        for b in range(self.n_blocks):
            if self.has_vertex[b]:
                A[vidx[b], vidx[b]] = self.vdiag[b]
                M[vidx[b]] = self.vmass[b]
        for c in range(self.n_chains):
            idx = cidx[c]
            A[idx, idx] = self.diag[c]
            A[idx[:-1], idx[1:]] = self.off[c, :-1]
            A[idx[1:], idx[:-1]] = self.off[c, :-1]
            M[idx] = self.mass[c]
            b = self.chain_block[c]
            if self.has_vertex[b]:
                A[vidx[b], idx[0]] = A[idx[0], vidx[b]] = self.coup[c]
        return A, np.diag(M)

    def flatten(self, vertex_values, chain_values) -> np.ndarray:
        vidx, cidx = self.index_map()
        x = np.zeros(self.n_unknowns, dtype=np.result_type(vertex_values, chain_values))
        x[vidx[self.has_vertex]] = np.asarray(vertex_values)[self.has_vertex]
        x[cidx] = chain_values
        return x

    def matvec(self, vertex_values, chain_values, shift: float = 0.0):
        """(A - shift*M) x on the structured layout; complex input allowed."""
        xv = np.asarray(vertex_values)
        xc = np.asarray(chain_values)
        diag = self.diag - shift * self.mass
        yc = diag * xc
        yc[:, :-1] += self.off[:, :-1] * xc[:, 1:]
        yc[:, 1:] += self.off[:, :-1] * xc[:, :-1]
        yc[:, 0] += self.coup * xv[self.chain_block]
        yv = (self.vdiag - shift * self.vmass) * xv
        np.add.at(yv, self.chain_block, self.coup * xc[:, 0])
        yv = np.where(self.has_vertex, yv, 0)
        return yv, yc

    def to_json(self) -> dict:
        blocks = []
        for b in range(self.n_blocks):
            chains = []
            for c in np.flatnonzero(self.chain_block == b):
                chains.append({
                    "edge": int(self.chain_edge[c]) + 1,
                    "diag": self.diag[c].tolist(),
                    "offdiag": self.off[c, :-1].tolist(),
                    "mass": self.mass[c].tolist(),
                    "vertex_coupling": float(self.coup[c]),
                })
            vertex = None
            if self.has_vertex[b]:
                vertex = {"diag": float(self.vdiag[b]), "mass": float(self.vmass[b]),
                          "potential": float(self.vpot[b])}
            blocks.append({"label": self.block_labels[b], "vertex": vertex, "chains": chains})
        return {"structure": self.structure, "grid": self.grid.to_dict(), "blocks": blocks}


def _replace(op: DiscreteOperator, **kw) -> DiscreteOperator:
    data = {k: getattr(op, k) for k in DiscreteOperator.__dataclass_fields__}
    data.update(kw)
    return DiscreteOperator(**data)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _check_support(profile: EdgePotential, grid: GridSpec, where: str) -> None:
    if profile.support > grid.edge_length * (1 + 1e-12):
        raise SupportExceedsGrid(
            f"{where}: potential support {profile.support:g} exceeds edge length {grid.edge_length:g}")


def _chain(profile: EdgePotential, grid: GridSpec):
    h = grid.step
    x = grid.nodes()
    m = x.size
    kin = np.full(m, 2.0 / h)
    mass = np.full(m, h)
    lo = x - 0.5 * h
    hi = np.minimum(x + 0.5 * h, grid.edge_length)
    if grid.far_bc == NEUMANN:
        kin[-1] = 1.0 / h
        mass[-1] = 0.5 * h
    pot = profile.integral(hi) - profile.integral(lo)
    off = np.full(m, -1.0 / h)
    off[-1] = 0.0
    return kin, off, mass, pot


def _vertex_pot(profile: EdgePotential, grid: GridSpec) -> float:
    return float(profile.integral(0.5 * grid.step))


def _build(structure: str, grid: GridSpec, blocks) -> DiscreteOperator:
    """``blocks``: list of (label, has_vertex, [(edge_index, profile), ...])."""
    h = grid.step
    diag, off, mass, pot, coup, cblock, cedge = [], [], [], [], [], [], []
    vdiag, vmass, vpot, hasv, labels = [], [], [], [], []
    for b, (label, with_vertex, chains) in enumerate(blocks):
        vp = 0.0
        for edge, profile in chains:
            _check_support(profile, grid, f"edge {edge + 1}")
            kin, o, ms, p = _chain(profile, grid)
            diag.append(kin + p)
            off.append(o)
            mass.append(ms)
            pot.append(p)
            coup.append(-1.0 / h if with_vertex else 0.0)
            cblock.append(b)
            cedge.append(edge)
            if with_vertex:
                vp += _vertex_pot(profile, grid)
        k = len(chains)
        labels.append(label)
        hasv.append(bool(with_vertex))
        vpot.append(vp if with_vertex else 0.0)
        vdiag.append(k / h + vp if with_vertex else 0.0)
        vmass.append(0.5 * k * h if with_vertex else 1.0)
    return DiscreteOperator(
        structure=structure, grid=grid,
        diag=np.array(diag), off=np.array(off), mass=np.array(mass), pot=np.array(pot),
        coup=np.array(coup), chain_block=np.array(cblock, dtype=np.int64),
        chain_edge=np.array(cedge, dtype=np.int64),
        vdiag=np.array(vdiag), vmass=np.array(vmass), vpot=np.array(vpot),
        has_vertex=np.array(hasv, dtype=np.bool_), block_labels=tuple(labels),
    )


def assemble_star(graph: StarGraph, field: PotentialField, grid: GridSpec) -> DiscreteOperator:
    if field.graph != graph:
        raise ValueError(f"field lives on {field.n_edges} edges, graph has {graph.n_edges}")
    label = f"Star({graph.n_edges})"
    return _build(label, grid, [(label, True, list(enumerate(field.per_edge)))])


def assemble_half_line(profile: EdgePotential, grid: GridSpec, bc: str = NEUMANN) -> DiscreteOperator:
    bc = bc.lower()
    if bc not in (NEUMANN, DIRICHLET):
        raise ValueError(f"unknown boundary condition {bc!r}")
    label = f"HalfLine({bc})"
    return _build(label, grid, [(label, bc == NEUMANN, [(0, profile)])])


def assemble_line(line: LinePotential, grid: GridSpec) -> DiscreteOperator:
    """Line on [-L, L]; chain 0 carries x < 0, chain 1 carries x > 0."""
    return _build("Line", grid, [("Line", True, [(0, line.left), (1, line.right)])])


def assemble_cut_even(graph: StarGraph, field: PotentialField, grid: GridSpec) -> list:
    N = graph.n_edges
    if N % 2:
        raise OddEdgeCount(f"cut into lines needs an even edge count, got {N}")
    n = N // 2
    ops = []
    for i in range(n):
        # edge i on the positive half, edge n+i reflected onto the negative half
        chains = [(n + i, field.per_edge[n + i]), (i, field.per_edge[i])]
        ops.append(_build("Line", grid, [(f"Line(e{i + 1}|e{n + i + 1})", True, chains)]))
    return ops


def assemble_cut_split(graph: StarGraph, field: PotentialField, grid: GridSpec, subset) -> tuple:
    N = graph.n_edges
    S = sorted({int(s) for s in subset})
    if not S or len(S) >= N or S[0] < 1 or S[-1] > N:
        raise EmptySplit(f"subset {subset!r} must be a nonempty proper subset of 1..{N}")
    rest = [j for j in range(1, N + 1) if j not in S]
    ops = []
    for part in (S, rest):
        label = f"Star({len(part)})"
        chains = [(j - 1, field.per_edge[j - 1]) for j in part]
        ops.append(_build(label, grid, [(label, True, chains)]))
    return tuple(ops)


def direct_sum(ops: Sequence[DiscreteOperator]) -> DiscreteOperator:
    ops = list(ops)
    if not ops:
        raise ValueError("empty direct sum")
    grid = ops[0].grid
    if any(op.grid != grid for op in ops):
        raise ValueError("direct sum needs a common grid")
    offsets = np.cumsum([0] + [op.n_blocks for op in ops[:-1]])
    cat = lambda name: np.concatenate([getattr(op, name) for op in ops])
    return DiscreteOperator(
        structure="DirectSum[" + ", ".join(op.structure for op in ops) + "]", grid=grid,
        diag=cat("diag"), off=cat("off"), mass=cat("mass"), pot=cat("pot"), coup=cat("coup"),
        chain_block=np.concatenate([op.chain_block + o for op, o in zip(ops, offsets)]),
        chain_edge=cat("chain_edge"), vdiag=cat("vdiag"), vmass=cat("vmass"), vpot=cat("vpot"),
        has_vertex=cat("has_vertex"), block_labels=sum((op.block_labels for op in ops), ()),
    )
