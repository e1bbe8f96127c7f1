"""Star graphs, grids and piecewise-constant potentials.

Units are those of ``H = -d^2/dx^2 + V``.  Potentials are compactly
supported step functions; beyond the last segment an edge potential is 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GammaOutOfRange, OffsetTooSmall, SchemaError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
_BCS = (DIRICHLET, NEUMANN)


@dataclass(frozen=True)
class StarGraph:
    n_edges: int

    def __post_init__(self):
        if int(self.n_edges) != self.n_edges or self.n_edges < 1:
            raise ValueError(f"n_edges must be a positive integer, got {self.n_edges!r}")
        object.__setattr__(self, "n_edges", int(self.n_edges))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on each edge: nodes at ``h, 2h, ..., n*h`` plus the vertex."""

    step: float
    points_per_edge: int
    far_bc: str = DIRICHLET

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if int(self.points_per_edge) != self.points_per_edge or self.points_per_edge < 2:
            raise ValueError("points_per_edge must be an integer >= 2")
        bc = str(self.far_bc).lower()
        if bc not in _BCS:
            raise ValueError(f"far_bc must be one of {_BCS}, got {self.far_bc!r}")
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "points_per_edge", int(self.points_per_edge))
        object.__setattr__(self, "far_bc", bc)

    @classmethod
    def from_length(cls, step: float, length: float, far_bc: str = DIRICHLET) -> "GridSpec":
        n = int(round(length / step))
        if abs(n * step - length) > 1e-9 * max(1.0, length):
            raise ValueError(f"length {length} is not a multiple of step {step}")
        return cls(step, n, far_bc)

    @property
    def edge_length(self) -> float:
        return self.points_per_edge * self.step

    @property
    def n_unknowns_per_edge(self) -> int:
        # the far node is eliminated under a Dirichlet condition
        return self.points_per_edge - (1 if self.far_bc == DIRICHLET else 0)

    def nodes(self) -> np.ndarray:
        """Positions of the per-edge unknowns (the vertex excluded)."""
        return self.step * np.arange(1, self.n_unknowns_per_edge + 1)

    def scaled(self, lam: float) -> "GridSpec":
        return GridSpec(self.step / lam, self.points_per_edge, self.far_bc)

    def to_dict(self) -> dict:
        return {"h": self.step, "L": self.edge_length, "n": self.points_per_edge, "far_bc": self.far_bc}


def _canonical(segments: Iterable[Sequence[float]]) -> tuple:
    out: list[list[float]] = []
    for seg in segments:
        length, value = float(seg[0]), float(seg[1])
        if not (length > 0 and math.isfinite(length)):
            raise ValueError(f"segment length must be positive and finite, got {length}")
        if not math.isfinite(value):
            raise ValueError("segment value must be finite")
        if value == 0.0:
            value = 0.0  # drop -0.0
        if out and out[-1][1] == value:
            out[-1][0] += length
        else:
            out.append([length, value])
    while out and out[-1][1] == 0.0:
        out.pop()
    return tuple((a, b) for a, b in out)


@dataclass(frozen=True)
class EdgePotential:
    """Step potential along one edge, listed outward from the vertex."""

    segments: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", _canonical(self.segments))

    @classmethod
    def zero(cls) -> "EdgePotential":
        return cls(())

    @property
    def support(self) -> float:
        return float(sum(s[0] for s in self.segments))

    @property
    def is_zero(self) -> bool:
        return not self.segments

    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s[0] for s in self.segments])])

    def values(self) -> np.ndarray:
        return np.array([s[1] for s in self.segments], dtype=float)

    def min_value(self) -> float:
        return min([0.0] + [s[1] for s in self.segments])

    def max_abs(self) -> float:
        return max([0.0] + [abs(s[1]) for s in self.segments])

    def __call__(self, x) -> np.ndarray:
        """Point values, taking the left segment at a breakpoint."""
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        bp = self.breakpoints()
        vals = np.append(self.values(), 0.0)
        idx = np.searchsorted(bp, x, side="left") - 1
        idx = np.clip(idx, 0, len(vals) - 1)
        return np.where(x <= 0, vals[0], vals[idx])

    def integral(self, x) -> np.ndarray:
        """Antiderivative F(x) = int_0^x V, exact (piecewise linear)."""
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        bp = self.breakpoints()
        F = np.concatenate([[0.0], np.cumsum([s[0] * s[1] for s in self.segments])])
        return np.interp(x, bp, F, left=0.0, right=F[-1])

    def negative_norm(self, p: float) -> float:
        """int (V_-)^p over the edge."""
        return float(sum(ln * (-v) ** p for ln, v in self.segments if v < 0))

    def scaled(self, lam: float) -> "EdgePotential":
        return scale_potential(self, lam)

    def reversed(self) -> "EdgePotential":
        return EdgePotential(tuple(reversed(self.segments)))

    def to_json(self) -> list:
        return [{"len": ln, "val": v} for ln, v in self.segments]


@dataclass(frozen=True)
class LinePotential:
    """Step potential on R: ``right`` is V(t), ``left`` is V(-t), t > 0."""

    left: EdgePotential = field(default_factory=EdgePotential)
    right: EdgePotential = field(default_factory=EdgePotential)

    @property
    def is_zero(self) -> bool:
        return self.left.is_zero and self.right.is_zero

    def negative_norm(self, p: float) -> float:
        return self.left.negative_norm(p) + self.right.negative_norm(p)

    def profile_from(self, start: float) -> EdgePotential:
        """The potential read left to right starting at ``-start``."""
        lead = start - self.left.support
        segs = list(self.left.reversed().segments) + list(self.right.segments)
        if lead > 0:
            segs = [(lead, 0.0)] + segs
        return EdgePotential(tuple(segs))

    def as_field(self) -> "PotentialField":
        """Gamma_2 view: edge 1 is x > 0, edge 2 is x < 0."""
        return PotentialField(StarGraph(2), (self.right, self.left))

    @classmethod
    def from_field(cls, field: "PotentialField") -> "LinePotential":
        if field.n_edges != 2:
            raise ValueError("a line potential is a two-edge field")
        return cls(left=field.per_edge[1], right=field.per_edge[0])


@dataclass(frozen=True)
class PotentialField:
    graph: StarGraph
    per_edge: tuple

    def __post_init__(self):
        per_edge = tuple(p if isinstance(p, EdgePotential) else EdgePotential(p) for p in self.per_edge)
        if len(per_edge) != self.graph.n_edges:
            raise ValueError(f"expected {self.graph.n_edges} edge potentials, got {len(per_edge)}")
        object.__setattr__(self, "per_edge", per_edge)

    @property
    def n_edges(self) -> int:
        return self.graph.n_edges

    @property
    def is_radial(self) -> bool:
        return all(p == self.per_edge[0] for p in self.per_edge)

    @property
    def support(self) -> float:
        return max(p.support for p in self.per_edge)

    def min_value(self) -> float:
        return min(p.min_value() for p in self.per_edge)

    def max_abs(self) -> float:
        return max(p.max_abs() for p in self.per_edge)

    def edge_norms(self, gamma: float) -> np.ndarray:
        _check_gamma(gamma)
        return np.array([p.negative_norm(gamma + 0.5) for p in self.per_edge])

    def scaled(self, lam: float) -> "PotentialField":
        return PotentialField(self.graph, tuple(scale_potential(p, lam) for p in self.per_edge))

    def to_json(self) -> dict:
        return {"n_edges": self.n_edges, "edges": [p.to_json() for p in self.per_edge]}

    @classmethod
    def from_json(cls, data) -> "PotentialField":
        return field_from_json(data)


def _check_gamma(gamma: float, lo: float = 0.5) -> None:
    if not gamma >= lo:
        raise GammaOutOfRange(f"gamma must be >= {lo}, got {gamma}")


def radial_field(graph: StarGraph, profile: EdgePotential) -> PotentialField:
    return PotentialField(graph, (profile,) * graph.n_edges)


def transplant(line: LinePotential, graph: StarGraph, edge_index: int, offset: float,
               radial: bool = False) -> PotentialField:
    """Place the translate V(x - offset) on edge ``edge_index`` (1-based), or on every edge."""
    if not 1 <= edge_index <= graph.n_edges:
        raise IndexError(f"edge_index {edge_index} out of range 1..{graph.n_edges}")
    if offset < line.left.support:
        raise OffsetTooSmall(
            f"offset {offset} leaves {line.left.support - offset:g} of the support behind the vertex")
    moved = line.profile_from(offset)
    if radial:
        return radial_field(graph, moved)
    edges = [EdgePotential.zero()] * graph.n_edges
    edges[edge_index - 1] = moved
    return PotentialField(graph, tuple(edges))


def symmetric_extension(profile: EdgePotential) -> LinePotential:
    return LinePotential(profile, profile)


def potential_norm(field: PotentialField, gamma: float) -> float:
    """Closed-form int_{Gamma_N} V_-^(gamma + 1/2)."""
    _check_gamma(gamma)
    return float(sum(p.negative_norm(gamma + 0.5) for p in field.per_edge))


def scale_potential(profile: EdgePotential, lam: float) -> EdgePotential:
    """V -> lam^2 V(lam x)."""
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    return EdgePotential(tuple((ln / lam, lam * lam * v) for ln, v in profile.segments))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def _num(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError("expected a number", path)
    if not math.isfinite(x):
        raise SchemaError("expected a finite number", path)
    return float(x)


def profile_from_json(data, path: str = "$") -> EdgePotential:
    if not isinstance(data, list):
        raise SchemaError("edge must be a list of segments", path)
    segs = []
    for k, seg in enumerate(data):
        p = f"{path}[{k}]"
        if not isinstance(seg, dict):
            raise SchemaError("segment must be an object with 'len' and 'val'", p)
        for key in ("len", "val"):
            if key not in seg:
                raise SchemaError(f"missing key '{key}'", p)
        extra = set(seg) - {"len", "val"}
        if extra:
            raise SchemaError(f"unexpected keys {sorted(extra)}", p)
        length = _num(seg["len"], p + ".len")
        if length <= 0:
            raise SchemaError("segment length must be positive", p + ".len")
        segs.append((length, _num(seg["val"], p + ".val")))
    return EdgePotential(tuple(segs))


def field_from_json(data) -> PotentialField:
    if not isinstance(data, dict):
        raise SchemaError("potential file must be a JSON object")
    if "n_edges" not in data:
        raise SchemaError("missing key 'n_edges'")
    if "edges" not in data:
        raise SchemaError("missing key 'edges'")
    n = data["n_edges"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SchemaError("n_edges must be a positive integer", "$.n_edges")
    edges = data["edges"]
    if not isinstance(edges, list):
        raise SchemaError("edges must be a list", "$.edges")
    if len(edges) != n:
        raise SchemaError(f"expected {n} edges, found {len(edges)}", "$.edges")
    return PotentialField(StarGraph(n), tuple(profile_from_json(e, f"$.edges[{j}]") for j, e in enumerate(edges)))


def load_field(path) -> PotentialField:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return field_from_json(data)
