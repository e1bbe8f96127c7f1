"""Hot loops for the structured star/chain factorization.

Every operator is stored as ``C`` chains of equal length ``n`` hanging off
``B`` optional vertex unknowns (one per block).  Chain node 0 is adjacent
to the vertex; node ``n - 1`` is the far end.  Elimination runs from the far
end inwards, so the only fill lands on the vertex diagonal.

Two interchangeable backends exist: numba ``@njit`` loops and a pure-numpy
path that vectorizes across chains and shifts.  Set ``QGLT_NO_NUMBA=1`` to
force the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("QGLT_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:  # pragma: no cover - exercised implicitly
    if _DISABLE:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def inertia_many_numpy(diag, off, mass, coup, chain_block, vdiag, vmass, has_vertex, shifts, pivtol):
    C, n = diag.shape
    E = np.asarray(shifts, dtype=np.float64)[None, :]
    bad = np.zeros(E.shape[1], dtype=bool)
    d = diag[:, n - 1:n] - E * mass[:, n - 1:n]
    count = np.zeros(E.shape[1], dtype=np.int64)
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            d = diag[:, i:i + 1] - E * mass[:, i:i + 1] - off[:, i:i + 1] ** 2 / d
        tiny = np.abs(d) < pivtol
        bad |= np.any(tiny, axis=0)
        count += np.sum(d < 0.0, axis=0)
        # flagged shifts are discarded; keep the recursion finite
        d = np.where(tiny, pivtol, d)
    schur = vdiag[:, None] - vmass[:, None] * E
    np.add.at(schur, chain_block, -(coup[:, None] ** 2) / d)
    vb = schur[has_vertex]
    bad |= np.any(np.abs(vb) < pivtol, axis=0)
    count += np.sum(vb < 0.0, axis=0)
    return np.where(bad, -1, count).astype(np.int64)


def solve_shifted_numpy(diag, off, mass, coup, chain_block, vdiag, vmass, has_vertex, shift, rhs_v, rhs_c):
    """Solve (A - shift*M) x = rhs for one shift; returns (x_vertex, x_chains)."""
    C, n = diag.shape
    piv = np.empty((C, n))
    g = np.empty((C, n))
    piv[:, n - 1] = diag[:, n - 1] - shift * mass[:, n - 1]
    g[:, n - 1] = rhs_c[:, n - 1]
    for i in range(n - 2, -1, -1):
        piv[:, i] = diag[:, i] - shift * mass[:, i] - off[:, i] ** 2 / piv[:, i + 1]
        g[:, i] = rhs_c[:, i] - off[:, i] * g[:, i + 1] / piv[:, i + 1]
    schur = vdiag - shift * vmass
    rv = np.array(rhs_v, dtype=np.float64, copy=True)
    np.add.at(schur, chain_block, -(coup ** 2) / piv[:, 0])
    np.add.at(rv, chain_block, -coup * g[:, 0] / piv[:, 0])
    xv = np.where(has_vertex, rv / np.where(has_vertex, schur, 1.0), 0.0)
    x = np.empty((C, n))
    x[:, 0] = (g[:, 0] - coup * xv[chain_block]) / piv[:, 0]
    for i in range(1, n):
        x[:, i] = (g[:, i] - off[:, i - 1] * x[:, i - 1]) / piv[:, i]
    return xv, x


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def inertia_many_numba(diag, off, mass, coup, chain_block, vdiag, vmass, has_vertex, shifts, pivtol):
        C, n = diag.shape
        B = vdiag.shape[0]
        S = shifts.shape[0]
        out = np.empty(S, dtype=np.int64)
        schur = np.empty(B)
        for s in range(S):
            E = shifts[s]
            cnt = 0
            bad = False
            for b in range(B):
                schur[b] = vdiag[b] - E * vmass[b]
            for c in range(C):
                d = diag[c, n - 1] - E * mass[c, n - 1]
                for i in range(n - 1, -1, -1):
                    if i < n - 1:
                        d = diag[c, i] - E * mass[c, i] - off[c, i] * off[c, i] / d
                    if abs(d) < pivtol:
                        bad = True
                        break
                    if d < 0.0:
                        cnt += 1
                if bad:
                    break
                schur[chain_block[c]] -= coup[c] * coup[c] / d
            if not bad:
                for b in range(B):
                    if has_vertex[b]:
                        if abs(schur[b]) < pivtol:
                            bad = True
                        if schur[b] < 0.0:
                            cnt += 1
            out[s] = -1 if bad else cnt
        return out

    @njit(cache=True, nogil=True)
    def solve_shifted_numba(diag, off, mass, coup, chain_block, vdiag, vmass, has_vertex, shift, rhs_v, rhs_c):
        C, n = diag.shape
        B = vdiag.shape[0]
        piv = np.empty((C, n))
        g = np.empty((C, n))
        schur = np.empty(B)
        rv = np.empty(B)
        for b in range(B):
            schur[b] = vdiag[b] - shift * vmass[b]
            rv[b] = rhs_v[b]
        for c in range(C):
            piv[c, n - 1] = diag[c, n - 1] - shift * mass[c, n - 1]
            g[c, n - 1] = rhs_c[c, n - 1]
            for i in range(n - 2, -1, -1):
                piv[c, i] = diag[c, i] - shift * mass[c, i] - off[c, i] * off[c, i] / piv[c, i + 1]
                g[c, i] = rhs_c[c, i] - off[c, i] * g[c, i + 1] / piv[c, i + 1]
            b = chain_block[c]
            schur[b] -= coup[c] * coup[c] / piv[c, 0]
            rv[b] -= coup[c] * g[c, 0] / piv[c, 0]
        xv = np.zeros(B)
        for b in range(B):
            if has_vertex[b]:
                xv[b] = rv[b] / schur[b]
        x = np.empty((C, n))
        for c in range(C):
            x[c, 0] = (g[c, 0] - coup[c] * xv[chain_block[c]]) / piv[c, 0]
            for i in range(1, n):
                x[c, i] = (g[c, i] - off[c, i - 1] * x[c, i - 1]) / piv[c, i]
        return xv, x

    inertia_many = inertia_many_numba
    solve_shifted = solve_shifted_numba
else:  # pragma: no cover
    inertia_many = inertia_many_numpy
    solve_shifted = solve_shifted_numpy
