"""Bound states of step potentials from transfer matrices and secular equations.

Independent of the discretization: every edge ODE  -u'' + V u = -kappa^2 u
is solved exactly segment by segment, starting from the decaying solution
e^{-kappa t} beyond the support and propagating back to the vertex.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .eigensolve import Spectrum
from .errors import NoConvergence, NonpositiveAlpha, NonpositiveKappa
from .graph import EdgePotential, LinePotential, PotentialField, StarGraph, radial_field

BISECT_XTOL = 1e-14
MAX_REFINE = 3


class ScanTooCoarse(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SecularScan:
    kappa_grid: np.ndarray
    sign_changes: list
    roots: np.ndarray
    dirichlet_type_roots: list  # (kappa, multiplicity)


def boundary_data(profile: EdgePotential, kappa: float) -> tuple:
    """(u(0), u'(0)) of the decaying solution, scaled to unit length (positive factor)."""
    if not kappa > 0:
        raise NonpositiveKappa(f"kappa must be positive, got {kappa}")
    u, du = 1.0, -kappa
    for length, v in reversed(profile.segments):
        q = v + kappa * kappa
        if q > 0:
            s = math.sqrt(q)
            x = s * length
            e = math.exp(-2.0 * x)
            # cosh, sinh scaled by e^{-x}; the common factor is dropped
            c, sh = 0.5 * (1.0 + e), 0.5 * (1.0 - e)
            u, du = c * u - sh / s * du, -s * sh * u + c * du
        elif q < 0:
            k = math.sqrt(-q)
            c, sn = math.cos(k * length), math.sin(k * length)
            u, du = c * u - sn / k * du, k * sn * u + c * du
        else:
            u = u - length * du
        r = math.hypot(u, du)
        u, du = u / r, du / r
    return u, du


def dirichlet_count(profile: EdgePotential, kappa: float) -> int:
    """Dirichlet half-line eigenvalues below -kappa^2, by Sturm oscillation.

    Counts zeros on (0, inf) of the decaying solution; segment by segment the
    zeros have closed forms, so no sampling is involved.
    """
    if not kappa > 0:
        raise NonpositiveKappa(f"kappa must be positive, got {kappa}")
    u, du = 1.0, -kappa
    zeros = 0
    for length, v in reversed(profile.segments):
        q = v + kappa * kappa
        # s runs leftwards from the right end of the segment
        if q < 0:
            k = math.sqrt(-q)
            phi = math.atan2(du / k, u)  # u(s) = A cos(k s + phi)
            lo = (phi - 0.5 * math.pi) / math.pi
            zeros += math.floor((k * length + phi - 0.5 * math.pi) / math.pi) - math.floor(lo)
            c, sn = math.cos(k * length), math.sin(k * length)
            u, du = c * u - sn / k * du, k * sn * u + c * du
        elif q > 0:
            sg = math.sqrt(q)
            if du != 0.0:
                r = sg * u / du
                if 0.0 < r <= math.tanh(sg * length):
                    zeros += 1
            x = sg * length
            e = math.exp(-2.0 * x)
            c, sh = 0.5 * (1.0 + e), 0.5 * (1.0 - e)
            u, du = c * u - sh / sg * du, -sg * sh * u + c * du
        else:
            if du != 0.0 and 0.0 < u / du <= length:
                zeros += 1
            u = u - length * du
        r = math.hypot(u, du)
        u, du = u / r, du / r
    # a zero exactly at the vertex is not interior
    if u == 0.0:
        zeros -= 1
    return zeros


def dtn_value(profile: EdgePotential, kappa: float) -> float:
    """Dirichlet-to-Neumann value psi'(0+)/psi(0+); +inf when psi(0+) = 0."""
    u, du = boundary_data(profile, kappa)
    if u == 0.0:
        return math.inf
    return du / u


def _bisect(f, a, b, fa_sign):
    """Root of f in (a, b) given sign(f(a)) = fa_sign and sign(f(b)) = -fa_sign."""
    for _ in range(200):
        m = 0.5 * (a + b)
        if b - a <= BISECT_XTOL * max(1.0, m) or m in (a, b):
            break
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa_sign > 0):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _edge_roots(profile: EdgePotential, grid: np.ndarray, which: int) -> list:
    """Roots in kappa of u(0) (which=0) or u'(0) (which=1) on one edge."""
    vals = np.array([boundary_data(profile, k)[which] for k in grid])
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        f = lambda k: boundary_data(profile, k)[which]
        roots.append(_bisect(f, grid[i], grid[i + 1], np.sign(vals[i])))
    roots += [grid[i] for i in np.flatnonzero(vals == 0.0)]
    return sorted(roots)


def _interlaced(d_roots, n_roots) -> bool:
    # zeros of u(0) and u'(0) alternate in kappa (monotone Pruefer angle)
    merged = sorted([(r, 0) for r in d_roots] + [(r, 1) for r in n_roots])
    return all(a[1] != b[1] for a, b in zip(merged, merged[1:]))


def _scan_grid(kappa_max: float, n: int) -> np.ndarray:
    return np.linspace(kappa_max * 1e-9, kappa_max, n)


def secular_scan(graph: StarGraph, field: PotentialField, kappa_max: float | None = None,
                 n_scan: int = 2000) -> SecularScan:
    N = graph.n_edges
    if kappa_max is None:
        kappa_max = math.sqrt(max(0.0, -field.min_value())) + 1.0
    profiles = field.per_edge
    uniq = list(dict.fromkeys(profiles))
    grid = _scan_grid(kappa_max, n_scan)
    poles_by_profile = {}
    for attempt in range(MAX_REFINE + 1):
        ok = True
        for p in uniq:
            if p.is_zero:
                poles_by_profile[p] = []
                continue
            d = _edge_roots(p, grid, 0)
            expected = dirichlet_count(p, grid[0]) - dirichlet_count(p, kappa_max)
            if len(d) != expected or not _interlaced(d, _edge_roots(p, grid, 1)):
                ok = False
            poles_by_profile[p] = d
        if ok:
            break
        if attempt == MAX_REFINE:
            raise NoConvergence(f"secular scan still misses roots with {grid.size} points")
        warnings.warn(f"secular scan too coarse at {grid.size} points; refining x10", ScanTooCoarse)
        grid = _scan_grid(kappa_max, 10 * grid.size)

    # merge Dirichlet-type poles across edges
    tagged = sorted((r, j) for j, p in enumerate(profiles) for r in poles_by_profile[p])
    groups: list[list] = []
    for r, j in tagged:
        if groups and abs(r - groups[-1][0][0]) <= 1e-9 * max(1.0, r):
            groups[-1].append((r, j))
        else:
            groups.append([(r, j)])
    poles = [g[0][0] for g in groups]
    dirichlet_type = [(g[0][0], len(g) - 1) for g in groups if len(g) >= 2]

    def S(k):
        tot = 0.0
        for p in profiles:
            u, du = boundary_data(p, k)
            if u == 0.0:
                return math.inf
            tot += du / u
        return tot

    # S decreases from +inf to -inf between consecutive poles: one root per gap
    edges = [grid[0]] + poles + [kappa_max]
    roots, brackets = [], []
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if b - a <= 1e-9 * max(1.0, b):
            continue
        if i == 0 and S(a) <= 0:
            continue
        if i == len(edges) - 2 and S(b) >= 0:
            continue
        brackets.append((a, b))
        roots.append(_bisect(S, a, b, 1.0))
    return SecularScan(grid, brackets, np.array(roots), dirichlet_type)


def secular_bound_states(graph: StarGraph, field: PotentialField, kappa_max: float | None = None,
                         n_scan: int = 2000, tol_zero: float = 1e-10) -> Spectrum:
    scan = secular_scan(graph, field, kappa_max, n_scan)
    kappas = list(scan.roots)
    for k, mult in scan.dirichlet_type_roots:
        kappas += [k] * mult
    ev = np.sort(-np.asarray(kappas, dtype=float) ** 2)
    ev = ev[ev < -tol_zero]
    return Spectrum(ev, BISECT_XTOL, tol_zero)


def half_line_bound_states(profile: EdgePotential, bc: str = "neumann",
                           kappa_max: float | None = None, n_scan: int = 2000,
                           tol_zero: float = 1e-10) -> Spectrum:
    if kappa_max is None:
        kappa_max = math.sqrt(max(0.0, -profile.min_value())) + 1.0
    if profile.is_zero:
        return Spectrum(np.empty(0), BISECT_XTOL, tol_zero)
    grid = _scan_grid(kappa_max, n_scan)
    for attempt in range(MAX_REFINE + 1):
        d = _edge_roots(profile, grid, 0)
        nr = _edge_roots(profile, grid, 1)
        expected = dirichlet_count(profile, grid[0]) - dirichlet_count(profile, kappa_max)
        if len(d) == expected and _interlaced(d, nr):
            break
        if attempt == MAX_REFINE:
            raise NoConvergence(f"half-line scan still misses roots with {grid.size} points")
        warnings.warn(f"secular scan too coarse at {grid.size} points; refining x10", ScanTooCoarse)
        grid = _scan_grid(kappa_max, 10 * grid.size)
    roots = nr if bc.lower() == "neumann" else d
    ev = np.sort(-np.asarray(roots, dtype=float) ** 2)
    return Spectrum(ev[ev < -tol_zero], BISECT_XTOL, tol_zero)


def line_bound_states(line: LinePotential, **kw) -> Spectrum:
    return secular_bound_states(StarGraph(2), line.as_field(), **kw)


def radial_bound_states(graph: StarGraph, profile: EdgePotential, **kw) -> Spectrum:
    return secular_bound_states(graph, radial_field(graph, profile), **kw)


def delta_line_eigenvalue(alpha: float) -> float:
    """Bound state of -d^2/dx^2 - alpha*delta on R."""
    if not alpha > 0:
        raise NonpositiveAlpha(f"alpha must be positive, got {alpha}")
    return -alpha * alpha / 4.0
