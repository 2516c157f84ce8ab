"""Closed-form spectral data on the regular subspace, numeric on the outliers.

The regular block is diagonalized by a trigonometric transform; its scaling
and eigenvalues come from circulant symbols of the periodic cardinal-spline
mass and stiffness, evaluated at the case-dependent frequencies alpha_j.  The
small outlier block gets a dense generalized eigendecomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import transforms
from .assembly import BandedMatrix
from .splines import (DirichletSet, NodeSet, SplineSpace, cardinal_bspline,
                      nodes_and_frequencies)
from .splitting import (InvalidSplittingError, Splitting, build_splitting,
                        build_splitting_reduced, cardinal_centers)

MAX_OUTLIER_DIM = 64


def _cosine_symbol(degree: int, h: float, alpha: np.ndarray, kmax: int) -> np.ndarray:
    """sum_{|k| <= kmax} cardinal_{degree}(k) cos(k h alpha)."""
    alpha = np.asarray(alpha, dtype=float)
    out = np.full(alpha.shape, cardinal_bspline(degree, 0.0))
    for k in range(1, kmax + 1):
        out = out + 2.0 * cardinal_bspline(degree, float(k)) * np.cos(k * h * alpha)
    return out


def theta(p: int, h: float, alpha) -> np.ndarray | float:
    """Collocation eigenvalue of the symmetrized-cardinal basis: the cosine
    symbol of degree p over |k| <= floor(p/2); positive on h*alpha in [0, pi]."""
    a = np.asarray(alpha, dtype=float)
    out = _cosine_symbol(p, h, a, p // 2)
    return float(out) if np.isscalar(alpha) else out


def _edge_weight(h: float, alpha: np.ndarray) -> np.ndarray:
    """2 at the self-paired lattice frequencies h*alpha in {0, pi}, else 1."""
    a = np.asarray(alpha, dtype=float) * h
    return np.where((np.abs(a) < 1e-12) | (np.abs(a - math.pi) < 1e-12), 2.0, 1.0)


def symbol_dtilde(p: int, h: float, alpha) -> np.ndarray | float:
    """L2 norm of the j-th discrete eigenfunction in the symmetrized-cardinal
    basis: sqrt(w_j / 2 * mass symbol of degree 2p+1)."""
    a = np.asarray(alpha, dtype=float)
    mass = _cosine_symbol(2 * p + 1, h, a, p)
    out = np.sqrt(0.5 * _edge_weight(h, a) * mass)
    return float(out) if np.isscalar(alpha) else out


def symbol_dreg(p: int, h: float, alpha) -> np.ndarray | float:
    """L2 norm of the interpolated eigenfunction F_j (d_tilde over theta)."""
    a = np.asarray(alpha, dtype=float)
    out = symbol_dtilde(p, h, a) / theta(p, h, a)
    return float(out) if np.isscalar(alpha) else out


def symbol_lambda(p: int, h: float, alpha) -> np.ndarray | float:
    """Generalized eigenvalue on the regular subspace: the stiffness symbol
    (2 - 2cos(h alpha))/h^2 * symbol_{2p-1} over the mass symbol_{2p+1}."""
    a = np.asarray(alpha, dtype=float)
    num = _cosine_symbol(2 * p - 1, h, a, p - 1)
    den = _cosine_symbol(2 * p + 1, h, a, p)
    if np.any(den <= 0.0):
        raise RuntimeError("mass symbol must stay positive for valid frequencies")
    out = (2.0 - 2.0 * np.cos(h * a)) / h ** 2 * num / den
    return float(out) if np.isscalar(alpha) else out


def outlier_eigen(M_out: np.ndarray, K_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Generalized eigendecomposition of the small outlier pencil.

    Returns (Q, lam) with Q^T M_out Q = I and Q^T K_out Q = diag(lam),
    eigenvalues ascending, first dominant component of each vector positive.
    """
    n = M_out.shape[0]
    if n == 0:
        return np.zeros((0, 0)), np.zeros(0)
    if n > MAX_OUTLIER_DIM:
        raise ValueError(f"outlier dimension {n} exceeds cap {MAX_OUTLIER_DIM}")
    try:
        np.linalg.cholesky(M_out)
    except np.linalg.LinAlgError as exc:
        raise InvalidSplittingError("outlier mass block is not positive definite") from exc
    lam, Q = sla.eigh(K_out, M_out)
    for c in range(Q.shape[1]):
        if Q[np.argmax(np.abs(Q[:, c])), c] < 0:
            Q[:, c] = -Q[:, c]
    return Q, lam


@dataclass(frozen=True)
class UnivariateSpectral:
    """Approximate diagonalization data of one parametric direction.

    The assembled eigenvector matrix is
    ``[V_reg V_out] blkdiag(U d_tilde^{-1}, Q_out)`` and is M-orthonormal;
    its eigenvalues are ``concat(lambda_reg, lambda_out)``.
    """

    transform: transforms.TransformKind
    nodes: NodeSet
    d_tilde: np.ndarray
    lambda_reg: np.ndarray
    Q_out: np.ndarray
    lambda_out: np.ndarray
    splitting: Splitting

    @property
    def m(self) -> int:
        return self.splitting.m

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([self.lambda_reg, self.lambda_out])

    def apply_qt(self, X: np.ndarray) -> np.ndarray:
        """Rows of X (length m) -> rows of Q~^T X^T, batched."""
        reg = transforms.apply_adjoint(self.transform, X @ self.splitting.V_reg)
        reg *= 1.0 / self.d_tilde
        out = (X @ self.splitting.V_out) @ self.Q_out
        return np.concatenate([reg, out], axis=-1)

    def apply_q(self, Y: np.ndarray) -> np.ndarray:
        """Inverse companion of :meth:`apply_qt`: rows of Q~ Y^T, batched."""
        nreg = self.splitting.n_reg
        reg = transforms.apply(self.transform, Y[..., :nreg] / self.d_tilde)
        X = self.splitting.V_reg @ reg.T
        if self.splitting.n_out:
            X += self.splitting.V_out @ (self.Q_out @ Y[..., nreg:].T)
        return np.ascontiguousarray(X.T)


def _gram_blocks(spl: Splitting, B: BandedMatrix) -> tuple[np.ndarray, np.ndarray]:
    """(V_out^T B V_out, V_out^T B V_reg) for a banded symmetric B."""
    if spl.n_out == 0:
        return np.zeros((0, 0)), np.zeros((0, spl.n_reg))
    BV = B.matmat(np.ascontiguousarray(spl.V_out.T))  # rows: (B V_out)^T
    return BV @ spl.V_out, BV @ spl.V_reg


def build_univariate_spectral(space: SplineSpace, D: DirichletSet,
                              M: BandedMatrix, K: BandedMatrix) -> UnivariateSpectral:
    """Assemble one direction's approximate diagonalization.

    Regular-block scalings and eigenvalues come from the closed-form symbols;
    the outlier pencil is solved densely.  ``M``/``K`` are the constrained
    univariate mass and stiffness of (space, D).
    """
    if space.is_smooth:
        spl = build_splitting(space, D, M)
    else:
        spl = build_splitting_reduced(space, D, M)
    nodes = nodes_and_frequencies(space.smooth_base(), D)
    kind = transforms.select_transform(space.p, D, spl.n_reg)
    d_tilde = symbol_dtilde(space.p, space.h, nodes.alphas)
    lam_reg = symbol_lambda(space.p, space.h, nodes.alphas)
    M_out, _ = _gram_blocks(spl, M)
    K_out, _ = _gram_blocks(spl, K)
    Q_out, lam_out = outlier_eigen(M_out, K_out)
    return UnivariateSpectral(transform=kind, nodes=nodes, d_tilde=np.asarray(d_tilde),
                              lambda_reg=np.asarray(lam_reg), Q_out=Q_out,
                              lambda_out=lam_out, splitting=spl)


# ---------------------------------------------------------------------------
# dense oracles (verification path)


def collocation_matrix(spl: Splitting) -> np.ndarray:
    """C[i, j] = value of the j-th symmetrized-cardinal basis function at
    node x_i; eigenvectors of this matrix are the transform columns."""
    from .splitting import special_basis_coefficients

    base = spl.space.smooth_base()
    nodes = nodes_and_frequencies(base, spl.D)
    S = special_basis_coefficients(base, spl.D)
    centers = cardinal_centers(base)
    E = cardinal_bspline(base.p, (nodes.nodes[:, np.newaxis] - centers) / base.h)
    return E @ S.toarray()


def assembled_q(spec: UnivariateSpectral) -> np.ndarray:
    """Dense M-orthonormal eigenvector matrix [V_reg V_out] blkdiag(...)."""
    U = transforms.reference_matrix(spec.transform)
    Qreg = spec.splitting.V_reg.toarray() @ (U / spec.d_tilde)
    if spec.splitting.n_out:
        Qout = spec.splitting.V_out @ spec.Q_out
        return np.hstack([Qreg, Qout])
    return Qreg


def verify_spectral(spec: UnivariateSpectral, M: BandedMatrix, K: BandedMatrix) -> dict:
    """Max deviations of the assembled decomposition against dense algebra.

    Returns ``orthonormality`` (QtMQ vs I), ``d_tilde`` and ``lambda_reg``
    (symbols vs the dense normalization/eigenvalue formulas), all relative.
    """
    Q = assembled_q(spec)
    Md, Kd = M.todense(), K.todense()
    orth = np.abs(Q.T @ Md @ Q - np.eye(Q.shape[1])).max()

    Vr = spec.splitting.V_reg.toarray()
    U = transforms.reference_matrix(spec.transform)
    Mreg = Vr.T @ Md @ Vr
    Kreg = Vr.T @ Kd @ Vr
    dt_dense = np.sqrt(np.diag(U.T @ Mreg @ U))
    dt_err = np.abs(spec.d_tilde - dt_dense).max() / dt_dense.max()
    lam_dense = np.diag(U.T @ Kreg @ U) / dt_dense ** 2
    scale = max(lam_dense.max(), 1.0)
    lam_err = np.abs(spec.lambda_reg - lam_dense).max() / scale
    return {"orthonormality": float(orth), "d_tilde": float(dt_err),
            "lambda_reg": float(lam_err)}
