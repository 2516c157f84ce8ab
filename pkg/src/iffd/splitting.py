"""Regular/outlier decomposition of univariate spline spaces.

Builds the symmetrized-cardinal basis of the regular subspace (splines with
vanishing even derivatives at Dirichlet ends and vanishing odd derivatives at
Neumann ends), converts it to open-knot coordinates, and completes it with an
L2-orthogonal outlier complement of dimension O(p).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import null_space, solve_banded

from .assembly import BandedMatrix
from .splines import (DirichletSet, SplineSpace, cardinal_bspline,
                      greville_abscissae, eval_basis, regular_dim)

BASIS_TAG = "symmetrized-cardinal"


class UnsupportedSizeError(ValueError):
    """The block construction requires more elements than the degree (n > p)."""


class InvalidSplittingError(RuntimeError):
    """The constructed subspaces violate a splitting invariant."""


@dataclass(frozen=True)
class Splitting:
    """Coordinate bases of the regular subspace and its L2 complement.

    ``V_reg`` (sparse, identity-like in the interior) and ``V_out`` (dense,
    n_out columns) are expressed in the constrained open-knot basis; columns
    of ``[V_reg V_out]`` span the whole space and satisfy V_reg^T M V_out = 0.
    """

    n_reg: int
    n_out: int
    V_reg: sp.csr_matrix
    V_out: np.ndarray
    basis_tag: str
    space: SplineSpace
    D: DirichletSet

    @property
    def m(self) -> int:
        return self.V_reg.shape[0]


def regular_dims(p: int, n: int, D: DirichletSet,
                 num_repeated_interior_knots: int = 0) -> tuple[int, int]:
    """(n_reg, n_out) of the splitting; each repeated interior knot enlarges
    the outlier space by one while the regular space is unchanged."""
    if n <= p:
        raise UnsupportedSizeError(f"need n > p for the splitting, got n={n}, p={p}")
    n_reg = regular_dim(p, n, D)
    if p % 2 == 0:
        n_out = p - 2 if (D.left and D.right) else (p if D.count == 0 else p - 1)
    else:
        n_out = p - 1
    return n_reg, n_out + num_repeated_interior_knots


def _cardinal_lo(p: int) -> int:
    return -((p - 1) // 2)


def cardinal_support_indices(space: SplineSpace) -> np.ndarray:
    """Indices of the shifted cardinal B-splines active on (0, 1)."""
    p, n = space.p, space.n
    return np.arange(_cardinal_lo(p), n + p // 2 + 1)


def cardinal_centers(space: SplineSpace) -> np.ndarray:
    """Peak abscissae x_i of the active cardinal B-splines."""
    idx = cardinal_support_indices(space)
    if space.p % 2 == 1:
        return idx * space.h
    return (idx - 0.5) * space.h


def special_basis_coefficients(space: SplineSpace, D: DirichletSet) -> sp.csr_matrix:
    """Columns give the +-1 cardinal coefficients of the regular basis.

    Boundary functions pair a cardinal with its reflection across the end
    point, signed -1 for Dirichlet and +1 for Neumann; interior functions are
    single cardinals.  Column j is centered at node x_j.
    """
    if not space.is_smooth:
        raise ValueError("the symmetrized-cardinal basis lives on the smooth space")
    p, n = space.p, space.n
    n_reg, _ = regular_dims(p, n, D)
    delta = 0 if p % 2 == 1 else 1
    lo = _cardinal_lo(p)

    cols: list[list[tuple[int, float]]] = []
    if D.left:
        for i in range(1, p // 2 + 1):
            cols.append([(i, 1.0), (delta - i, -1.0)])
    elif p % 2 == 0:
        for i in range(1, p // 2 + 1):
            cols.append([(i, 1.0), (1 - i, 1.0)])
    else:
        cols.append([(0, 1.0)])
        for i in range(1, (p - 1) // 2 + 1):
            cols.append([(i, 1.0), (-i, 1.0)])

    for i in range(p // 2 + 1, n - (p + 1) // 2 + 1):
        cols.append([(i, 1.0)])

    if D.right:
        for i in range(n - (p - 1) // 2, n + delta):
            cols.append([(i, 1.0), (2 * n + delta - i, -1.0)])
    elif p % 2 == 0:
        for i in range(n - p // 2 + 1, n + 1):
            cols.append([(i, 1.0), (2 * n + 1 - i, 1.0)])
    else:
        for i in range(n - (p - 1) // 2, n):
            cols.append([(i, 1.0), (2 * n - i, 1.0)])
        cols.append([(n, 1.0)])

    if len(cols) != n_reg:
        raise AssertionError(f"basis count {len(cols)} != n_reg {n_reg}")

    m_card = n + p
    rows, cidx, vals = [], [], []
    for j, entries in enumerate(cols):
        for i, v in entries:
            rows.append(i - lo)
            cidx.append(j)
            vals.append(v)
    return sp.csr_matrix((vals, (rows, cidx)), shape=(m_card, n_reg))


def cardinal_to_openknot(space: SplineSpace) -> sp.csr_matrix:
    """Change of basis from restricted cardinals to the open-knot basis.

    Identity except in the first/last p columns, which are obtained by
    collocation at the Greville abscissae with a banded LU solve; structural
    zeros implied by the support of each cardinal are enforced exactly.
    """
    if not space.is_smooth:
        raise ValueError("conversion is set up on the maximum-smoothness space")
    p, n, h = space.p, space.n, space.h
    m = space.dim_full
    idx = cardinal_support_indices(space)
    centers = cardinal_centers(space)
    half = (p + 1) * h / 2.0
    boundary = (centers - half < -1e-12) | (centers + half > 1.0 + 1e-12)

    T = sp.lil_matrix((m, m))
    for c in np.nonzero(~boundary)[0]:
        T[c, c] = 1.0

    if boundary.any():
        g = greville_abscissae(space)
        band = np.zeros((2 * p + 1, m))
        for a in range(m):
            v, first = eval_basis(space, float(g[a]), 0)
            for loc in range(p + 1):
                i = first + loc
                band[p + a - i, i] = v[loc]
        rhs = np.empty((m, int(boundary.sum())))
        bcols = np.nonzero(boundary)[0]
        for r, c in enumerate(bcols):
            rhs[:, r] = cardinal_bspline(p, (g - centers[c]) / h)
        sol = solve_banded((p, p), band, rhs)
        for r, c in enumerate(bcols):
            col = sol[:, r]
            if centers[c] < 0.5:  # left-boundary cardinal: rows above c vanish
                col[c + 1:] = 0.0
            else:
                col[:c] = 0.0
            T[:, c] = col[:, np.newaxis]
    return T.tocsr()


def knot_insertion_matrix(space: SplineSpace) -> sp.csr_matrix:
    """Coefficient map from the smooth base space into the refined space
    obtained by raising interior-knot multiplicities (Boehm insertion)."""
    from .splines import open_knot_vector

    p = space.p
    knots = list(open_knot_vector(space.smooth_base()))
    E = sp.identity(len(knots) - p - 1, format="csr")
    for k, mult in space.interior_mults:
        u = k / space.n
        for _ in range(mult - 1):
            mm = len(knots) - p - 1
            span = int(np.searchsorted(knots, u, side="right")) - 1
            span = min(max(span, p), mm - 1)
            step = sp.lil_matrix((mm + 1, mm))
            for i in range(mm + 1):
                if i <= span - p:
                    step[i, i] = 1.0
                elif i >= span + 1:
                    step[i, i - 1] = 1.0
                else:
                    a = (u - knots[i]) / (knots[i + p] - knots[i])
                    step[i, i] = a
                    step[i, i - 1] = 1.0 - a
            knots.insert(span + 1, u)
            E = (step.tocsr() @ E).tocsr()
    return E


def _drop_dirichlet_rows(V: sp.spmatrix, D: DirichletSet) -> sp.csr_matrix:
    V = V.tocsr()
    m_full = V.shape[0]
    lo = 1 if D.left else 0
    hi = m_full - (1 if D.right else 0)
    for r in ([0] if D.left else []) + ([m_full - 1] if D.right else []):
        row = np.abs(V[r].toarray())
        if row.size and row.max() > 1e-9:
            raise InvalidSplittingError("regular basis does not vanish on the Dirichlet end")
    return V[lo:hi].tocsr()


def _orthogonal_complement(V_reg: sp.csr_matrix, n_out: int) -> np.ndarray:
    """Sparse coordinate basis Z with V_reg^T Z = 0, found block-locally.

    Rows pinned to zero by single-entry columns are removed; the remaining
    rows group into small blocks connected through shared columns (near the
    boundary and near any repeated knot), each contributing the null space
    of its corner block transposed.
    """
    m = V_reg.shape[0]
    csc = V_reg.tocsc()
    csc.eliminate_zeros()
    id_rows = np.zeros(m, dtype=bool)
    for j in range(csc.shape[1]):
        rows = csc.indices[csc.indptr[j]:csc.indptr[j + 1]]
        if len(rows) == 1:
            id_rows[rows[0]] = True
    free = np.nonzero(~id_rows)[0]
    Z = np.zeros((m, n_out))
    if n_out == 0:
        if free.size:
            raise InvalidSplittingError("unconstrained rows but no outlier dimensions")
        return Z

    # union rows that appear together in some column
    pos = {int(r): i for i, r in enumerate(free)}
    parent = list(range(len(free)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for j in range(csc.shape[1]):
        rows = [int(r) for r in csc.indices[csc.indptr[j]:csc.indptr[j + 1]]
                if not id_rows[r]]
        for a, b in zip(rows, rows[1:]):
            ra, rb = find(pos[a]), find(pos[b])
            if ra != rb:
                parent[rb] = ra

    groups: dict[int, list[int]] = {}
    for i, r in enumerate(free):
        groups.setdefault(find(i), []).append(int(r))

    csr = V_reg.tocsr()
    col = 0
    for rows in sorted(groups.values()):
        rows = np.asarray(rows)
        touching = np.unique(csr[rows].tocoo().col)
        X = csr[rows][:, touching].toarray()
        N = null_space(X.T)
        for c in range(N.shape[1]):
            if col >= n_out:
                raise InvalidSplittingError("complement larger than expected")
            v = N[:, c]
            if v[np.argmax(np.abs(v))] < 0:
                v = -v
            Z[rows, col] = v
            col += 1
    if col != n_out:
        raise InvalidSplittingError(f"complement dimension {col} != expected {n_out}")
    return Z


def _build(space: SplineSpace, D: DirichletSet, M: BandedMatrix) -> Splitting:
    p, n = space.p, space.n
    n_reg, n_out = regular_dims(p, n, D, space.num_extra_knots)
    base = space.smooth_base()
    S = special_basis_coefficients(base, D)
    T = cardinal_to_openknot(base)
    V_full = (T @ S).tocsr()
    if not space.is_smooth:
        V_full = (knot_insertion_matrix(space) @ V_full).tocsr()
    V_reg = _drop_dirichlet_rows(V_full, D)
    if M.m != V_reg.shape[0]:
        raise ValueError("mass matrix does not match the constrained space")
    Z = _orthogonal_complement(V_reg, n_out)
    V_out = M.solve_spd(Z) if n_out else np.zeros((M.m, 0))
    return Splitting(n_reg=n_reg, n_out=n_out, V_reg=V_reg, V_out=V_out,
                     basis_tag=BASIS_TAG, space=space, D=D)


def build_splitting(space: SplineSpace, D: DirichletSet, M: BandedMatrix) -> Splitting:
    """Splitting of a maximum-smoothness space; M is its constrained mass."""
    if not space.is_smooth:
        raise ValueError("use build_splitting_reduced for repeated interior knots")
    return _build(space, D, M)


def build_splitting_reduced(space: SplineSpace, D: DirichletSet, M: BandedMatrix) -> Splitting:
    """Splitting of a reduced-regularity space.

    The regular subspace of the smooth base is embedded by knot insertion;
    the outlier space grows by one column per extra knot multiplicity.
    """
    return _build(space, D, M)
