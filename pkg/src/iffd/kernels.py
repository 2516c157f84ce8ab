"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen at import time from the ``IFFD_KERNELS`` environment
variable (``numba`` or ``numpy``); the default is numba when importable.
Both implementations are importable side by side via :func:`get_backend`,
which the kernel benchmark uses to compare them.

Band storage follows the scipy upper form: ``band[b - k, j] = A[j - k, j]``
for a symmetric matrix with bandwidth ``b``, main diagonal in the last row.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

__all__ = ["BACKEND", "NUMBA_AVAILABLE", "get_backend",
           "band_matvec_batch", "element_matrices", "scatter_add"]


# ---------------------------------------------------------------------------
# pure numpy implementations

def _band_matvec_batch_np(band: np.ndarray, X: np.ndarray) -> np.ndarray:
    b = band.shape[0] - 1
    Y = X * band[b]
    for k in range(1, b + 1):
        dk = band[b - k, k:]  # A[j-k, j], j = k..m-1
        Y[:, :-k] += X[:, k:] * dk
        Y[:, k:] += X[:, :-k] * dk
    return Y


def _element_matrices_np(G: np.ndarray, W: np.ndarray) -> np.ndarray:
    if G.ndim == 3:  # shared gradient table (nq, d, nb)
        nq, d, nb = G.shape
        T = np.einsum("eqij,qja->eqia", W, G)
        G2 = G.reshape(nq * d, nb)
        return np.matmul(G2.T[np.newaxis], T.reshape(-1, nq * d, nb))
    ne, nq, d, nb = G.shape  # per-element table
    T = np.einsum("eqij,eqja->eqia", W, G)
    G2 = G.reshape(ne, nq * d, nb)
    return np.matmul(G2.transpose(0, 2, 1), T.reshape(ne, nq * d, nb))


def _scatter_add_np(data: np.ndarray, pos: np.ndarray, vals: np.ndarray) -> None:
    np.add.at(data, pos, vals)


_numpy_backend = SimpleNamespace(
    name="numpy",
    band_matvec_batch=_band_matvec_batch_np,
    element_matrices=_element_matrices_np,
    scatter_add=_scatter_add_np,
)


# ---------------------------------------------------------------------------
# numba implementations

NUMBA_AVAILABLE = False
_numba_backend = None
try:  # pragma: no cover - exercised indirectly via backend selection
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True

    @njit(parallel=True, fastmath=True, cache=True)
    def _band_matvec_batch_nb(band, X):
        b = band.shape[0] - 1
        m = band.shape[1]
        nrhs = X.shape[0]
        Y = np.empty_like(X)
        for r in prange(nrhs):
            for i in range(m):
                s = band[b, i] * X[r, i]
                lo = i - b if i - b > 0 else 0
                for j in range(lo, i):
                    s += band[b - (i - j), i] * X[r, j]
                hi = i + b + 1 if i + b + 1 < m else m
                for j in range(i + 1, hi):
                    s += band[b - (j - i), j] * X[r, j]
                Y[r, i] = s
        return Y

    @njit(parallel=True, fastmath=True, cache=True)
    def _element_matrices_shared_nb(GT, W):
        # GT is the transposed gradient table (nb, nq*d), contiguous rows
        nb, nqd = GT.shape
        ne = W.shape[0]
        nq = W.shape[1]
        d = W.shape[2]
        out = np.empty((ne, nb, nb))
        for e in prange(ne):
            TT = np.empty((nb, nqd))
            for a in range(nb):
                for q in range(nq):
                    for i in range(d):
                        s = 0.0
                        for j in range(d):
                            s += W[e, q, i, j] * GT[a, q * d + j]
                        TT[a, q * d + i] = s
            for a in range(nb):
                for bcol in range(a, nb):
                    s = 0.0
                    for k in range(nqd):
                        s += GT[a, k] * TT[bcol, k]
                    out[e, a, bcol] = s
                    out[e, bcol, a] = s
        return out

    @njit(parallel=True, fastmath=True, cache=True)
    def _element_matrices_varying_nb(GTe, W):
        ne, nb, nqd = GTe.shape
        nq = W.shape[1]
        d = W.shape[2]
        out = np.empty((ne, nb, nb))
        for e in prange(ne):
            TT = np.empty((nb, nqd))
            for a in range(nb):
                for q in range(nq):
                    for i in range(d):
                        s = 0.0
                        for j in range(d):
                            s += W[e, q, i, j] * GTe[e, a, q * d + j]
                        TT[a, q * d + i] = s
            for a in range(nb):
                for bcol in range(a, nb):
                    s = 0.0
                    for k in range(nqd):
                        s += GTe[e, a, k] * TT[bcol, k]
                    out[e, a, bcol] = s
                    out[e, bcol, a] = s
        return out

    @njit(cache=True)
    def _scatter_add_nb(data, pos, vals):
        for k in range(pos.size):
            data[pos[k]] += vals[k]

    def _element_matrices_numba(G, W):
        if G.ndim == 3:
            nq, d, nb = G.shape
            GT = np.ascontiguousarray(G.reshape(nq * d, nb).T)
            return _element_matrices_shared_nb(GT, W)
        ne, nq, d, nb = G.shape
        GTe = np.ascontiguousarray(G.reshape(ne, nq * d, nb).transpose(0, 2, 1))
        return _element_matrices_varying_nb(GTe, W)

    def _scatter_add_numba(data, pos, vals):
        _scatter_add_nb(data, pos.ravel(), np.ascontiguousarray(vals).ravel())

    _numba_backend = SimpleNamespace(
        name="numba",
        band_matvec_batch=lambda band, X: _band_matvec_batch_nb(
            np.ascontiguousarray(band), np.ascontiguousarray(X)),
        element_matrices=_element_matrices_numba,
        scatter_add=_scatter_add_numba,
    )
except ImportError:  # pragma: no cover
    pass


def get_backend(name: str) -> SimpleNamespace:
    """Return a kernel namespace by name ('numpy' or 'numba')."""
    if name == "numpy":
        return _numpy_backend
    if name == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is not importable")
        return _numba_backend
    raise ValueError(f"unknown kernel backend {name!r}")


_requested = os.environ.get("IFFD_KERNELS", "").strip().lower()
if _requested not in ("", "numpy", "numba"):
    raise RuntimeError(f"IFFD_KERNELS must be 'numpy' or 'numba', got {_requested!r}")
if _requested == "":
    _requested = "numba" if NUMBA_AVAILABLE else "numpy"
_active = get_backend(_requested)

BACKEND = _active.name
band_matvec_batch = _active.band_matvec_batch
element_matrices = _active.element_matrices
scatter_add = _active.scatter_add
