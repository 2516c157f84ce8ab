"""Galerkin assembly for tensor-product spline discretizations.

Univariate mass/stiffness matrices in symmetric banded storage, analytic
geometry maps, the matrix-free Kronecker surrogate of the identity-geometry
operator, and sparse CSR assembly of the pulled-back Poisson stiffness on
parametrized domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solveh_banded

from . import kernels
from .splines import DirichletSet, SplineSpace, eval_basis


class SingularGeometryError(RuntimeError):
    """det J_G vanishes or changes sign on the quadrature grid."""


def gauss_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points/weights on [0, 1], exact to degree 2q - 1."""
    if not 1 <= q <= 32:
        raise ValueError(f"point count must be in 1..32, got {q}")
    x, w = np.polynomial.legendre.leggauss(q)
    return (x + 1.0) / 2.0, w / 2.0


# ---------------------------------------------------------------------------
# banded univariate matrices


class BandedMatrix:
    """Symmetric banded matrix in scipy upper form.

    ``data[b - k, j]`` holds entry ``(j - k, j)`` for ``k = 0..b``; the main
    diagonal sits in the last row of ``data``.
    """

    def __init__(self, data: np.ndarray):
        self.data = np.asarray(data, dtype=float)
        self.bandwidth = self.data.shape[0] - 1
        self.m = self.data.shape[1]

    @property
    def shape(self):
        return (self.m, self.m)

    def entry(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        k = j - i
        return self.data[self.bandwidth - k, j] if k <= self.bandwidth else 0.0

    def todense(self) -> np.ndarray:
        A = np.zeros((self.m, self.m))
        b = self.bandwidth
        A[np.arange(self.m), np.arange(self.m)] = self.data[b]
        for k in range(1, b + 1):
            dk = self.data[b - k, k:]
            idx = np.arange(self.m - k)
            A[idx, idx + k] = dk
            A[idx + k, idx] = dk
        return A

    def tosparse(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.todense())

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return kernels.band_matvec_batch(self.data, np.asarray(x, float)[np.newaxis])[0]

    def matmat(self, X: np.ndarray) -> np.ndarray:
        """Apply to the rows of X, i.e. return X @ A (A symmetric)."""
        return kernels.band_matvec_batch(self.data, np.ascontiguousarray(X))

    def solve_spd(self, B: np.ndarray) -> np.ndarray:
        """Solve A X = B through the banded Cholesky factorization."""
        return solveh_banded(self.data, B, lower=False)

    def restrict(self, D: DirichletSet) -> "BandedMatrix":
        """Drop the first/last row+column for Dirichlet ends."""
        lo = 1 if D.left else 0
        hi = self.m - (1 if D.right else 0)
        out = self.data[:, lo:hi].copy()
        b = self.bandwidth
        for k in range(1, b + 1):
            out[b - k, :min(k, out.shape[1])] = 0.0
        return BandedMatrix(out)


def _gram_matrix(space: SplineSpace, deriv: int) -> BandedMatrix:
    p, n = space.p, space.n
    gp, gw = gauss_rule(p + 1)
    h = space.h
    band = np.zeros((p + 1, space.dim_full))
    for e in range(n):
        vals = np.empty((p + 1, p + 1))
        first = -1
        for iq in range(p + 1):
            v, f = eval_basis(space, (e + gp[iq]) * h, deriv)
            vals[iq] = v
            first = f
        local = vals.T @ (vals * (gw * h)[:, np.newaxis])
        for a in range(p + 1):
            for c in range(a, p + 1):
                band[p - (c - a), first + c] += local[a, c]
    return BandedMatrix(band)


def univariate_mass(space: SplineSpace, D: DirichletSet) -> BandedMatrix:
    """Gram matrix of the constrained basis; always positive definite."""
    return _gram_matrix(space, 0).restrict(D)


def univariate_stiffness(space: SplineSpace, D: DirichletSet) -> BandedMatrix:
    """Gram matrix of first derivatives; singular only when D is empty."""
    return _gram_matrix(space, 1).restrict(D)


# ---------------------------------------------------------------------------
# geometry maps


@dataclass(frozen=True)
class GeometryMap:
    """Parametrization of the physical domain over [0, 1]^d."""

    d: int
    name: str
    map: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]


def _identity_geometry(d: int, name: str) -> GeometryMap:
    def gmap(X):
        return np.array(X, dtype=float, copy=True)

    def gjac(X):
        X = np.asarray(X)
        J = np.zeros(X.shape[:-1] + (d, d))
        for k in range(d):
            J[..., k, k] = 1.0
        return J

    return GeometryMap(d=d, name=name, map=gmap, jac=gjac)


def _annulus_map(X):
    X = np.asarray(X, dtype=float)
    r = 1.0 + X[..., 0]
    t = 0.5 * math.pi * X[..., 1]
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def _annulus_jac(X):
    X = np.asarray(X, dtype=float)
    r = 1.0 + X[..., 0]
    t = 0.5 * math.pi * X[..., 1]
    c, s = np.cos(t), np.sin(t)
    J = np.empty(X.shape[:-1] + (2, 2))
    J[..., 0, 0] = c
    J[..., 0, 1] = -0.5 * math.pi * r * s
    J[..., 1, 0] = s
    J[..., 1, 1] = 0.5 * math.pi * r * c
    return J


def _thick_annulus_map(X):
    X = np.asarray(X, dtype=float)
    out = np.empty_like(X)
    out[..., :2] = _annulus_map(X[..., :2])
    out[..., 2] = X[..., 2]
    return out


def _thick_annulus_jac(X):
    X = np.asarray(X, dtype=float)
    J = np.zeros(X.shape[:-1] + (3, 3))
    J[..., :2, :2] = _annulus_jac(X[..., :2])
    J[..., 2, 2] = 1.0
    return J


_GEOMETRIES = {
    "square": lambda: _identity_geometry(2, "square"),
    "cube": lambda: _identity_geometry(3, "cube"),
    "quarter_annulus_2d": lambda: GeometryMap(2, "quarter_annulus_2d", _annulus_map, _annulus_jac),
    "thick_quarter_annulus_3d": lambda: GeometryMap(
        3, "thick_quarter_annulus_3d", _thick_annulus_map, _thick_annulus_jac),
}


def builtin_geometry(name: str) -> GeometryMap:
    """Named analytic geometry: square, cube, quarter_annulus_2d,
    thick_quarter_annulus_3d (the 2D annulus extruded in z)."""
    try:
        return _GEOMETRIES[name]()
    except KeyError:
        raise ValueError(f"unknown geometry {name!r}; choose from {sorted(_GEOMETRIES)}") from None


# ---------------------------------------------------------------------------
# Kronecker surrogate of the identity-geometry operator


class KroneckerSurrogate:
    """Matrix-free sum of Kronecker products of univariate mass/stiffness.

    For d = 2 applies K_1 (x) M_2 + M_1 (x) K_2 in the lexicographic ordering
    with direction 1 fastest; for d = 3 the three-term analogue with one
    stiffness factor per term.
    """

    def __init__(self, spaces: Sequence[SplineSpace], Ds: Sequence[DirichletSet]):
        if len(spaces) not in (2, 3):
            raise ValueError("Kronecker surrogate supports d in {2, 3}")
        if len(spaces) != len(Ds):
            raise ValueError("one Dirichlet set per direction required")
        self.spaces = tuple(spaces)
        self.Ds = tuple(Ds)
        self.mass = [univariate_mass(s, D) for s, D in zip(spaces, Ds)]
        self.stiffness = [univariate_stiffness(s, D) for s, D in zip(spaces, Ds)]
        self.dims = tuple(mm.m for mm in self.mass)
        self.d = len(spaces)

    @property
    def shape(self):
        n = int(np.prod(self.dims))
        return (n, n)

    def _apply_direction(self, band: BandedMatrix, U: np.ndarray, direction: int) -> np.ndarray:
        axis = self.d - 1 - direction
        V = np.moveaxis(U, axis, -1)
        lead = V.shape[:-1]
        Y = kernels.band_matvec_batch(band.data, np.ascontiguousarray(V.reshape(-1, V.shape[-1])))
        return np.moveaxis(Y.reshape(lead + (band.m,)), -1, axis)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        U = np.asarray(u, dtype=float).reshape(self.dims[::-1])
        out = np.zeros_like(U)
        for k in range(self.d):
            term = U
            for j in range(self.d):
                band = self.stiffness[j] if j == k else self.mass[j]
                term = self._apply_direction(band, term, j)
            out += term
        return out.reshape(-1)

    def __matmul__(self, u):
        return self.matvec(u)

    def todense(self) -> np.ndarray:
        n = self.shape[0]
        A = np.empty((n, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            A[:, j] = self.matvec(e)
            e[j] = 0.0
        return A


def kron_surrogate(spaces: Sequence[SplineSpace], Ds: Sequence[DirichletSet]) -> KroneckerSurrogate:
    """Matrix-free operator for the separable identity-geometry problem."""
    return KroneckerSurrogate(spaces, Ds)


# ---------------------------------------------------------------------------
# sparse multivariate assembly


def _direction_tables(space: SplineSpace):
    """Per-element basis values/derivatives on the Gauss grid of one direction."""
    p, n, h = space.p, space.n, space.h
    gp, gw = gauss_rule(p + 1)
    q = p + 1
    val = np.empty((n, q, p + 1))
    der = np.empty((n, q, p + 1))
    first = np.empty(n, dtype=np.int64)
    for e in range(n):
        for iq in range(q):
            x = (e + gp[iq]) * h
            v, f = eval_basis(space, x, 0)
            dv, _ = eval_basis(space, x, 1)
            val[e, iq] = v
            der[e, iq] = dv
            first[e] = f
    pts = (np.arange(n)[:, np.newaxis] + gp) * h
    return val, der, first, pts, gw * h


def _csr_pattern(mfs: Sequence[int], p: int) -> sp.csr_matrix:
    """CSR skeleton containing every pair of basis functions within
    distance p per direction (zero data)."""
    pattern = None
    for mf in reversed(mfs):  # slowest direction first in the Kronecker order
        diags = np.ones((2 * p + 1, mf))
        B = sp.dia_matrix((diags, np.arange(-p, p + 1)), shape=(mf, mf)).tocsr()
        pattern = B if pattern is None else sp.kron(pattern, B, format="csr")
    pattern.data[:] = 0.0
    pattern.sort_indices()
    return pattern


def _quad_weights(spaces):
    w = None
    for s in reversed(spaces):
        _, gw = gauss_rule(s.p + 1)
        wk = gw * s.h
        w = wk if w is None else np.multiply.outer(w, wk)
    return w.reshape(-1)


def _geometry_weights(geom: GeometryMap, X: np.ndarray, ref_sign: list) -> np.ndarray:
    """|det J| (J^T J)^{-1} at the points X, with sign consistency check."""
    J = geom.jac(X)
    det = np.linalg.det(J)
    if ref_sign[0] == 0.0:
        ref_sign[0] = math.copysign(1.0, float(det.flat[0]))
    if np.any(det * ref_sign[0] <= 0.0):
        raise SingularGeometryError(
            f"det J_G vanishes or changes sign on the quadrature grid of {geom.name!r}")
    C = np.einsum("...ki,...kj->...ij", J, J)
    return np.abs(det)[..., np.newaxis, np.newaxis] * np.linalg.inv(C)


def _local_index_arrays(spaces, Ds):
    """Keep-lists mapping constrained indices into the full tensor basis."""
    keeps = []
    for s, D in zip(spaces, Ds):
        idx = np.arange(s.dim_full)
        lo = 1 if D.left else 0
        hi = s.dim_full - (1 if D.right else 0)
        keeps.append(idx[lo:hi])
    return keeps


def _restrict_tensor_csr(A: sp.csr_matrix, mfs, keeps) -> sp.csr_matrix:
    flat = None
    for mf, keep in zip(reversed(mfs), reversed(keeps)):
        flat = keep if flat is None else (flat[:, np.newaxis] * mf + keep).reshape(-1)
    return A[flat][:, flat].tocsr()


def assemble_stiffness(geom: GeometryMap,
                       spaces: Sequence[SplineSpace],
                       Ds: Sequence[DirichletSet]) -> sp.csr_matrix:
    """Sparse Galerkin stiffness of the pulled-back Laplacian.

    Gauss quadrature with p+1 points per element and direction; at most
    (2p+1)^d nonzeros per row.  Raises :class:`SingularGeometryError` when
    det J_G vanishes or changes sign at a quadrature point.
    """
    d = geom.d
    if d != len(spaces) or d != len(Ds):
        raise ValueError("geometry dimension and per-direction data disagree")
    p = spaces[0].p
    if any(s.p != p for s in spaces):
        raise ValueError("all directions must share the polynomial degree")

    tabs = [_direction_tables(s) for s in spaces]
    mfs = [s.dim_full for s in spaces]
    ns = [s.n for s in spaces]
    q1 = p + 1
    nq = q1 ** d
    nb = (p + 1) ** d
    wq = _quad_weights(spaces)

    A = _csr_pattern(mfs, p)
    indptr, data = A.indptr, A.data

    # per-direction row geometry of the CSR pattern
    los = [np.maximum(0, np.arange(mf) - p) for mf in mfs]
    his = [np.minimum(mf - 1, np.arange(mf) + p) for mf in mfs]
    widths = [hi - lo + 1 for lo, hi in zip(los, his)]

    nel = int(np.prod(ns))
    chunk = max(1, min(int(4e7 / max(1, nb * nq)), int(1.2e7 / max(1, nb * nb)), nel))
    ref_sign = [0.0]

    for start in range(0, nel, chunk):
        ids = np.arange(start, min(start + chunk, nel))
        etup = np.unravel_index(ids, tuple(reversed(ns)))  # (e_{d-1}, ..., e_0)
        eidx = list(reversed(etup))  # per direction 0..d-1
        E = len(ids)

        # quadrature points of the chunk, flattened (q_{d-1} slow .. q_0 fast)
        X = np.empty((E, nq, d))
        for k in range(d):
            ptk = tabs[k][3][eidx[k]]  # (E, q1)
            shape = [1] * d
            shape[d - 1 - k] = q1
            X[..., k] = np.broadcast_to(
                ptk.reshape((E,) + tuple(shape)), (E,) + (q1,) * d).reshape(E, nq)

        W = _geometry_weights(geom, X, ref_sign)
        W *= wq[np.newaxis, :, np.newaxis, np.newaxis]

        # per-element gradient tables G[e, q, i, a]
        G = np.empty((E, nq, d, nb))
        for i in range(d):
            prod = None
            for k in range(d - 1, -1, -1):  # slowest direction first
                tab = tabs[k][1] if k == i else tabs[k][0]
                t = tab[eidx[k]]  # (E, q1, p+1)
                if prod is None:
                    prod = t
                else:
                    prod = prod[:, :, np.newaxis, :, np.newaxis] * t[:, np.newaxis, :, np.newaxis, :]
                    prod = prod.reshape(E, prod.shape[1] * q1, -1)
            G[:, :, i, :] = prod

        elmats = kernels.element_matrices(G, W)

        # scatter positions: rows/cols in the tensor CSR pattern
        garr = [tabs[k][2][eidx[k]][:, np.newaxis] + np.arange(p + 1) for k in range(d)]
        grow = None
        for k in range(d - 1, -1, -1):
            g = garr[k]
            if grow is None:
                grow = g
            else:
                grow = grow[..., np.newaxis] * mfs[k] + g[:, np.newaxis, :]
                grow = grow.reshape(E, -1)
        # grow: (E, nb) global flat row indices
        base = indptr[grow]

        # offset of col b within row a's sorted neighbor list, Horner-style:
        # (((ok_{d-1}) * w_{d-2}(a) + ok_{d-2}) * ... ) * w_0(a) + ok_0
        off = None
        for k in range(d - 1, -1, -1):
            lo_r = los[k][garr[k]]  # (E, p+1) per row index in dir k
            w_r = widths[k][garr[k]]
            ok = garr[k][:, np.newaxis, :] - lo_r[:, :, np.newaxis]  # (E, a_k, b_k)
            if off is None:
                off = ok
            else:
                na, nb_loc = off.shape[1], off.shape[2]
                off = (off[:, :, np.newaxis, :, np.newaxis]
                       * w_r[:, np.newaxis, :, np.newaxis, np.newaxis]
                       + ok[:, np.newaxis, :, np.newaxis, :])
                off = off.reshape(E, na * (p + 1), nb_loc * (p + 1))
        pos = base[:, :, np.newaxis] + off
        kernels.scatter_add(data, pos.astype(np.int64, copy=False), elmats)

    keeps = _local_index_arrays(spaces, Ds)
    return _restrict_tensor_csr(A, mfs, keeps)


def assemble_rhs(geom: GeometryMap,
                 spaces: Sequence[SplineSpace],
                 Ds: Sequence[DirichletSet],
                 f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Load vector of a scalar source term under the same quadrature."""
    d = geom.d
    p = spaces[0].p
    tabs = [_direction_tables(s) for s in spaces]
    mfs = [s.dim_full for s in spaces]
    ns = [s.n for s in spaces]
    q1 = p + 1
    nq = q1 ** d
    nb = (p + 1) ** d
    wq = _quad_weights(spaces)

    F = np.zeros(int(np.prod(mfs)))
    nel = int(np.prod(ns))
    chunk = max(1, min(int(2e7 / max(1, nb * nq)), nel))
    for start in range(0, nel, chunk):
        ids = np.arange(start, min(start + chunk, nel))
        etup = np.unravel_index(ids, tuple(reversed(ns)))
        eidx = list(reversed(etup))
        E = len(ids)
        X = np.empty((E, nq, d))
        for k in range(d):
            ptk = tabs[k][3][eidx[k]]
            shape = [1] * d
            shape[d - 1 - k] = q1
            X[..., k] = np.broadcast_to(
                ptk.reshape((E,) + tuple(shape)), (E,) + (q1,) * d).reshape(E, nq)
        J = geom.jac(X)
        det = np.abs(np.linalg.det(J))
        fv = np.asarray(f(geom.map(X)), dtype=float) * det * wq[np.newaxis, :]

        V = None
        for k in range(d - 1, -1, -1):
            t = tabs[k][0][eidx[k]]
            if V is None:
                V = t
            else:
                V = V[:, :, np.newaxis, :, np.newaxis] * t[:, np.newaxis, :, np.newaxis, :]
                V = V.reshape(E, V.shape[1] * q1, -1)
        contrib = np.einsum("eq,eqa->ea", fv, V)

        garr = [tabs[k][2][eidx[k]][:, np.newaxis] + np.arange(p + 1) for k in range(d)]
        grow = None
        for k in range(d - 1, -1, -1):
            g = garr[k]
            if grow is None:
                grow = g
            else:
                grow = grow[..., np.newaxis] * mfs[k] + g[:, np.newaxis, :]
                grow = grow.reshape(E, -1)
        np.add.at(F, grow, contrib)

    keeps = _local_index_arrays(spaces, Ds)
    flat = None
    for mf, keep in zip(reversed(mfs), reversed(keeps)):
        flat = keep if flat is None else (flat[:, np.newaxis] * mf + keep).reshape(-1)
    return F[flat]


def evaluate_solution(spaces: Sequence[SplineSpace],
                      Ds: Sequence[DirichletSet],
                      coeffs: np.ndarray,
                      points_1d: Sequence[np.ndarray]) -> np.ndarray:
    """Evaluate a constrained-basis spline on a tensor grid of points."""
    mfs = [s.dim_full for s in spaces]
    keeps = _local_index_arrays(spaces, Ds)
    full = np.zeros(tuple(reversed(mfs)))
    sub = coeffs.reshape(tuple(len(k) for k in reversed(keeps)))
    full[np.ix_(*[k for k in reversed(keeps)])] = sub

    out = full
    d = len(spaces)
    for k in range(d):
        pts = np.asarray(points_1d[k])
        B = np.zeros((len(pts), mfs[k]))
        for r, x in enumerate(pts):
            v, f = eval_basis(spaces[k], float(x), 0)
            B[r, f:f + spaces[k].p + 1] = v
        out = np.moveaxis(np.tensordot(B, out, axes=([1], [d - 1 - k])), 0, d - 1 - k)
    return out


def l2_error(geom: GeometryMap,
             spaces: Sequence[SplineSpace],
             Ds: Sequence[DirichletSet],
             coeffs: np.ndarray,
             exact: Callable[[np.ndarray], np.ndarray]) -> float:
    """L2 distance between a discrete solution and a reference function."""
    d = geom.d
    grids = []
    wts = []
    for s in spaces:
        gp, gw = gauss_rule(s.p + 2)
        grids.append(((np.arange(s.n)[:, np.newaxis] + gp) * s.h).reshape(-1))
        wts.append(np.tile(gw * s.h, s.n))
    uh = evaluate_solution(spaces, Ds, coeffs, grids)

    mesh = np.meshgrid(*[grids[k] for k in reversed(range(d))], indexing="ij")
    X = np.stack([mesh[d - 1 - k] for k in range(d)], axis=-1)
    det = np.abs(np.linalg.det(geom.jac(X)))
    diff2 = (uh - np.asarray(exact(geom.map(X)))) ** 2 * det
    w = None
    for k in reversed(range(d)):
        w = wts[k] if w is None else np.multiply.outer(w, wts[k])
    return float(np.sqrt(np.sum(diff2 * w)))


def write_matrix_market(path, A: sp.spmatrix) -> None:
    """Dump a symmetric sparse matrix in Matrix Market coordinate format."""
    A = sp.coo_matrix(A)
    mask = A.row >= A.col  # symmetric storage keeps the lower triangle
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {int(mask.sum())}\n")
        for i, j, v in zip(A.row[mask] + 1, A.col[mask] + 1, A.data[mask]):
            fh.write(f"{i} {j} {v:.16e}\n")
