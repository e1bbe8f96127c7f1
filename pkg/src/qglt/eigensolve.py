"""Negative spectrum of a DiscreteOperator by Sylvester-inertia bisection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .discretize import DiscreteOperator
from .errors import NoConvergence, PivotBreakdown

PIVOT_TOL = 1e-14
MAX_RETRIES = 3


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    tol_eig: float
    tol_zero: float
    near_zero_flag: bool = False

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def __iter__(self):
        return iter(self.eigenvalues)

    def to_json(self) -> dict:
        return {"eigenvalues": [float(e) for e in self.eigenvalues], "tol_eig": self.tol_eig,
                "tol_zero": self.tol_zero, "near_zero_flag": bool(self.near_zero_flag)}


@dataclass(frozen=True, eq=False)
class EdgeFunction:
    """Node values of a function on the operator's layout.

    ``vertex`` has one entry per block (0 where a block has no vertex
    unknown); ``chains`` has shape ``(C, n)``.
    """

    vertex: np.ndarray
    chains: np.ndarray
    op: DiscreteOperator

    @property
    def vertex_value(self) -> Optional[complex]:
        if not self.op.has_vertex[0]:
            return None
        return self.vertex[0]

    def edge(self, j: int) -> np.ndarray:
        """Values on 1-based edge ``j`` (first block carrying that edge)."""
        c = int(np.flatnonzero(self.op.chain_edge == j - 1)[0])
        return self.chains[c]

    def inner(self, other: "EdgeFunction") -> complex:
        """Mass inner product <self, other> (conjugate-linear in ``other``)."""
        op = self.op
        v = np.sum(op.vmass * op.has_vertex * self.vertex * np.conj(other.vertex))
        return v + np.sum(op.mass * self.chains * np.conj(other.chains))

    def norm(self) -> float:
        return float(np.sqrt(abs(self.inner(self))))

    def __add__(self, other: "EdgeFunction") -> "EdgeFunction":
        return EdgeFunction(self.vertex + other.vertex, self.chains + other.chains, self.op)

    def __sub__(self, other: "EdgeFunction") -> "EdgeFunction":
        return EdgeFunction(self.vertex - other.vertex, self.chains - other.chains, self.op)

    def __mul__(self, c) -> "EdgeFunction":
        return EdgeFunction(self.vertex * c, self.chains * c, self.op)

    __rmul__ = __mul__


def _raw_counts(op: DiscreteOperator, shifts: np.ndarray) -> np.ndarray:
    return _kernels.inertia_many(op.diag, op.off, op.mass, op.coup, op.chain_block, op.vdiag,
                                 op.vmass, op.has_vertex, shifts, PIVOT_TOL * op.scale())


def inertia_many(op: DiscreteOperator, shifts) -> np.ndarray:
    """Number of pencil eigenvalues below each shift."""
    shifts = np.array(shifts, dtype=np.float64, ndmin=1)
    counts = _raw_counts(op, shifts)
    bad = counts < 0
    step = 1e-10 * op.scale()
    tries = 0
    while bad.any():
        if tries == MAX_RETRIES:
            raise PivotBreakdown(f"zero pivot at shifts {shifts[bad][:3]} after {MAX_RETRIES} retries")
        tries += 1
        counts[bad] = _raw_counts(op, shifts[bad] + tries * step)
        bad = counts < 0
    return counts


def inertia(op: DiscreteOperator, shift: float) -> int:
    return int(inertia_many(op, [shift])[0])


def negative_spectrum(op: DiscreteOperator, tol_eig: float = 1e-10,
                      tol_zero: Optional[float] = None) -> Spectrum:
    """All eigenvalues below ``-tol_zero``, each bisected to width ``tol_eig``."""
    if tol_zero is None:
        tol_zero = 1e-10 * max(1.0, -op.min_potential_value())
    if not (tol_eig > 0 and tol_zero > 0):
        raise ValueError("tolerances must be positive")
    top = -tol_zero
    c_top, c_zero = inertia_many(op, [top, 0.0])
    near_zero = bool(c_zero != c_top)
    k = int(c_top)
    if k == 0:
        return Spectrum(np.empty(0), tol_eig, tol_zero, near_zero)
    bottom = min(op.min_potential_value(), 0.0) - 1.0
    lo = np.full(k, bottom)
    hi = np.full(k, top)
    idx = np.arange(k)
    while True:
        active = (hi - lo) > tol_eig
        if not active.any():
            break
        # one probe per distinct active bracket
        mids = np.unique(0.5 * (lo[active] + hi[active]))
        counts = inertia_many(op, mids)
        for E, c in zip(mids, counts):
            # eigenvalue j (0-based) is < E iff c > j
            below = idx < c
            hi = np.where(below & (E < hi), E, hi)
            lo = np.where(~below & (E > lo), E, lo)
    ev = 0.5 * (lo + hi)
    return Spectrum(ev, tol_eig, tol_zero, near_zero)


def riesz_mean(spec, gamma: float) -> float:
    """sum_k |E_k|^gamma."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    ev = np.asarray(spec.eigenvalues if isinstance(spec, Spectrum) else spec, dtype=float)
    if ev.size == 0:
        return 0.0
    return float(np.sum(np.abs(ev) ** gamma))


# ---------------------------------------------------------------------------
# eigenvectors
# ---------------------------------------------------------------------------

def _solve(op: DiscreteOperator, shift: float, rv, rc):
    return _kernels.solve_shifted(op.diag, op.off, op.mass, op.coup, op.chain_block, op.vdiag,
                                  op.vmass, op.has_vertex, float(shift),
                                  np.ascontiguousarray(rv, dtype=np.float64),
                                  np.ascontiguousarray(rc, dtype=np.float64))


def _normalize(op, xv, xc):
    xv = np.where(op.has_vertex, xv, 0.0)
    nrm = np.sqrt(np.sum(op.vmass * op.has_vertex * xv ** 2) + np.sum(op.mass * xc ** 2))
    return xv / nrm, xc / nrm


def rayleigh_quotient(op: DiscreteOperator, f: EdgeFunction) -> float:
    yv, yc = op.matvec(f.vertex, f.chains)
    num = np.sum(op.has_vertex * yv * f.vertex) + np.sum(yc * f.chains)
    return float(num / f.inner(f).real)


def residual(op: DiscreteOperator, f: EdgeFunction, eigenvalue: float) -> float:
    yv, yc = op.matvec(f.vertex, f.chains, shift=eigenvalue)
    return float(np.sqrt(np.sum(np.abs(yv) ** 2) + np.sum(np.abs(yc) ** 2)))


def eigenvector(op: DiscreteOperator, eigenvalue: float, tol_eig: float = 1e-10,
                max_iter: int = 50, seed: int = 0) -> EdgeFunction:
    """Mass-normalized eigenvector by shifted inverse iteration."""
    shift = eigenvalue + 0.1 * tol_eig
    rng = np.random.default_rng(seed)
    xv = rng.standard_normal(op.n_blocks) * op.has_vertex
    xc = rng.standard_normal(op.diag.shape)
    xv, xc = _normalize(op, xv, xc)
    scale = op.scale()
    for _ in range(max_iter):
        xv, xc = _normalize(op, *_solve(op, shift, op.vmass * xv, op.mass * xc))
        f = EdgeFunction(xv, xc, op)
        E = rayleigh_quotient(op, f)
        if residual(op, f, E) <= 1e-8 * scale:
            return _fix_sign(f)
    raise NoConvergence(f"inverse iteration at {eigenvalue} did not converge in {max_iter} steps")


def _fix_sign(f: EdgeFunction) -> EdgeFunction:
    flat = np.concatenate([f.vertex, f.chains.ravel()])
    if flat[np.argmax(np.abs(flat))] < 0:
        return f * -1.0
    return f


def cluster_basis(op: DiscreteOperator, eigenvalues, tol_eig: float = 1e-10, max_iter: int = 50,
                  seed: int = 0) -> list:
    """Mass-orthonormal basis for a cluster of (nearly) equal eigenvalues.

    Block inverse iteration at the cluster mean followed by a Rayleigh-Ritz
    step; each returned vector is a Ritz vector of the cluster.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    k = ev.size
    shift = float(ev.mean()) + 0.1 * tol_eig
    rng = np.random.default_rng(seed)
    V = [(rng.standard_normal(op.n_blocks) * op.has_vertex, rng.standard_normal(op.diag.shape))
         for _ in range(k)]
    scale = op.scale()
    for _ in range(max_iter):
        V = [_solve(op, shift, op.vmass * v, op.mass * c) for v, c in V]
        V = _m_orthonormalize(op, V)
        funcs = [EdgeFunction(v, c, op) for v, c in V]
        # Rayleigh-Ritz in the block
        AV = [op.matvec(f.vertex, f.chains) for f in funcs]
        G = np.array([[np.sum(op.has_vertex * a[0] * g.vertex) + np.sum(a[1] * g.chains)
                       for g in funcs] for a in AV])
        w, Q = np.linalg.eigh(0.5 * (G + G.T))
        funcs = [EdgeFunction(sum(Q[i, j] * funcs[i].vertex for i in range(k)),
                              sum(Q[i, j] * funcs[i].chains for i in range(k)), op) for j in range(k)]
        if all(residual(op, f, e) <= 1e-8 * scale for f, e in zip(funcs, w)):
            return [_fix_sign(f) for f in funcs]
        V = [(f.vertex, f.chains) for f in funcs]
    raise NoConvergence(f"cluster of {k} eigenvalues near {shift} did not converge")


def _m_orthonormalize(op, V):
    out = []
    for v, c in V:
        v = np.where(op.has_vertex, v, 0.0)
        for _ in range(2):
            for u, d in out:
                p = np.sum(op.vmass * op.has_vertex * v * u) + np.sum(op.mass * c * d)
                v = v - p * u
                c = c - p * d
        out.append(_normalize(op, v, c))
    return out
