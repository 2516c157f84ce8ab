"""Tensor-product preconditioners and the preconditioned conjugate gradient.

The fast-diagonalization (FD) preconditioner inverts the separable surrogate
exactly through dense per-direction eigendecompositions; the FFT-based
variant (IFFD) replaces them with the transform/outlier factorization of the
spectral module, applied in O(N (log N + p)).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .assembly import BandedMatrix
from .spectral import UnivariateSpectral


class SingularPreconditionerError(RuntimeError):
    """The eigenvalue Kronecker sum contains a zero (pure-Neumann problem)."""


def splitmix64_uniform(seed: int, size: int) -> np.ndarray:
    """Deterministic uniform samples in [-1, 1) from a splitmix64 stream."""
    gamma = np.uint64(0x9E3779B97F4A7C15)
    idx = np.arange(1, size + 1, dtype=np.uint64)
    z = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * gamma).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z.astype(np.float64) / 2.0 ** 63 - 1.0


def _as_matvec(A):
    if callable(A) and not hasattr(A, "matvec"):
        return A
    if hasattr(A, "matvec"):
        return A.matvec
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return lambda x: A @ x
    raise TypeError(f"cannot interpret {type(A)!r} as a linear operator")


@dataclass(frozen=True)
class FdFactor:
    """Dense generalized eigenpairs of one direction: Q^T M Q = I, Q^T K Q = L."""

    Q: np.ndarray
    eigenvalues: np.ndarray

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    def apply_qt(self, X: np.ndarray) -> np.ndarray:
        return X @ self.Q

    def apply_q(self, Y: np.ndarray) -> np.ndarray:
        return Y @ self.Q.T


def fd_factor(M, K) -> FdFactor:
    """Exact directional factor from the dense generalized eigenproblem."""
    Md = M.todense() if isinstance(M, BandedMatrix) else np.asarray(M, float)
    Kd = K.todense() if isinstance(K, BandedMatrix) else np.asarray(K, float)
    lam, Q = sla.eigh(Kd, Md)
    for c in range(Q.shape[1]):
        if Q[np.argmax(np.abs(Q[:, c])), c] < 0:
            Q[:, c] = -Q[:, c]
    return FdFactor(Q=Q, eigenvalues=lam)


class TensorPreconditioner:
    """Kronecker-structured approximate inverse built from directional factors.

    ``apply_inverse`` computes (Q_d x ... x Q_1) S^{-1} (Q_d^T x ... x Q_1^T) r
    where S is the diagonal Kronecker sum of the directional eigenvalues; the
    factors are dense eigenpairs (FD) or transform-based (IFFD).
    """

    def __init__(self, factors, variant: str, project_zero_mode: bool = False):
        if variant not in ("fd", "iffd", "none"):
            raise ValueError(f"variant must be fd/iffd/none, got {variant!r}")
        self.variant = variant
        self.factors = list(factors)
        self.project_zero_mode = project_zero_mode
        if variant == "none":
            self.dims = tuple(f for f in factors)  # factor list holds sizes
            self.eigen_sum = None
            self._inv_sum = None
            return
        self.dims = tuple(f.m for f in self.factors)
        d = len(self.dims)
        S = np.zeros(self.dims[::-1])
        for k, f in enumerate(self.factors):
            shape = [1] * d
            shape[d - 1 - k] = self.dims[k]
            S = S + f.eigenvalues.reshape(shape)
        self.eigen_sum = S
        scale = float(S.max())
        mask = np.abs(S) <= 1e-12 * max(scale, 1.0)
        if mask.any():
            if not project_zero_mode:
                raise SingularPreconditionerError(
                    "zero Kronecker eigenvalue (all-Neumann problem); "
                    "enable project_zero_mode to filter the constant mode")
            inv = np.zeros_like(S)
            inv[~mask] = 1.0 / S[~mask]
        else:
            inv = 1.0 / S
        self._inv_sum = inv

    @property
    def n_dof(self) -> int:
        return int(np.prod(self.dims))

    def _directional(self, fn_name: str, W: np.ndarray) -> np.ndarray:
        d = len(self.dims)
        for k, f in enumerate(self.factors):
            axis = d - 1 - k
            V = np.moveaxis(W, axis, -1)
            lead = V.shape[:-1]
            V = getattr(f, fn_name)(np.ascontiguousarray(V.reshape(-1, V.shape[-1])))
            W = np.moveaxis(V.reshape(lead + (V.shape[-1],)), -1, axis)
        return W

    def apply_inverse(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.variant == "none":
            return r.copy()
        W = r.reshape(self.dims[::-1])
        W = self._directional("apply_qt", W)
        W = W * self._inv_sum
        W = self._directional("apply_q", W)
        return W.reshape(-1)

    def matvec(self, r: np.ndarray) -> np.ndarray:
        return self.apply_inverse(r)

    @classmethod
    def none(cls, dims) -> "TensorPreconditioner":
        return cls(list(dims), "none")

    @classmethod
    def fd(cls, masses, stiffnesses, project_zero_mode: bool = False) -> "TensorPreconditioner":
        return cls([fd_factor(M, K) for M, K in zip(masses, stiffnesses)],
                   "fd", project_zero_mode)

    @classmethod
    def iffd(cls, spectrals, project_zero_mode: bool = False) -> "TensorPreconditioner":
        for s in spectrals:
            if not isinstance(s, UnivariateSpectral):
                raise TypeError("iffd factors must be UnivariateSpectral")
        return cls(spectrals, "iffd", project_zero_mode)


@dataclass
class PcgReport:
    """Iteration trace of one preconditioned conjugate gradient solve."""

    iterations: int
    residuals: list[float] = field(default_factory=list)
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    converged: bool = False
    seed: int | None = None


def pcg(A, b: np.ndarray, P: TensorPreconditioner | None = None,
        tol: float = 1e-8, max_iters: int = 500) -> tuple[np.ndarray, PcgReport]:
    """Conjugate gradient with zero initial guess.

    Convergence is declared on the true (unpreconditioned) relative residual
    ||b - A x|| / ||b|| <= tol; hitting ``max_iters`` yields a report with
    ``converged=False`` rather than an exception.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    matvec = _as_matvec(A)
    apply_p = (lambda r: r) if P is None else P.apply_inverse
    b = np.asarray(b, dtype=float)
    t0 = time.perf_counter()
    x = np.zeros_like(b)
    normb = float(np.linalg.norm(b))
    report = PcgReport(iterations=0)
    if normb == 0.0:
        report.converged = True
        report.solve_seconds = time.perf_counter() - t0
        return x, report
    r = b.copy()
    z = apply_p(r)
    rho = float(r @ z)
    d = z
    for it in range(1, max_iters + 1):
        q = matvec(d)
        alpha = rho / float(d @ q)
        x = x + alpha * d
        r = r - alpha * q
        relres = float(np.linalg.norm(r)) / normb
        report.residuals.append(relres)
        report.iterations = it
        if relres <= tol:
            report.converged = True
            break
        z = apply_p(r)
        rho_new = float(r @ z)
        d = z + (rho_new / rho) * d
        rho = rho_new
    report.solve_seconds = time.perf_counter() - t0
    return x, report


@dataclass(frozen=True)
class ConditionEstimate:
    lambda_min: float
    lambda_max: float
    kappa: float
    converged: bool


def estimate_condition(A, P: TensorPreconditioner | None = None,
                       n: int | None = None, max_steps: int = 200,
                       seed: int = 1234, rtol: float = 1e-9) -> ConditionEstimate:
    """Extremal Ritz values of P^{-1} A from a Lanczos run in the A-inner
    product (one A-matvec and one preconditioner apply per step, full
    reorthogonalization); kappa is their ratio.

    A breakdown before the extremal values settle returns the partial
    estimate with ``converged=False``.
    """
    matvec = _as_matvec(A)
    apply_p = (lambda r: r) if P is None else P.apply_inverse
    if n is None:
        if not hasattr(A, "shape"):
            raise TypeError("pass n= for operators without a shape attribute")
        n = A.shape[0]

    v = splitmix64_uniform(seed, n)
    Av = matvec(v)
    nrm = float(np.sqrt(v @ Av))
    if not np.isfinite(nrm) or nrm <= 0.0:
        raise ValueError("operator is not positive definite on the probe vector")
    V = [v / nrm]
    AV = [Av / nrm]
    alphas: list[float] = []
    betas: list[float] = []
    converged = False
    prev_ext = None
    scale = float(AV[0] @ V[0])
    for _ in range(max_steps):
        w = apply_p(AV[-1])
        alpha = float(w @ AV[-1])
        for _pass in range(2):  # twice-is-enough reorthogonalization
            for vv, av in zip(V, AV):
                w = w - float(w @ av) * vv
        alphas.append(alpha)
        Aw = matvec(w)
        b2 = float(w @ Aw)
        lam = sla.eigvalsh_tridiagonal(np.asarray(alphas), np.asarray(betas))
        ext = (float(lam[0]), float(lam[-1]))
        if b2 <= 1e-24 * scale:
            converged = True  # invariant subspace exhausted, Ritz values exact
            break
        if prev_ext is not None:
            dmin = abs(ext[0] - prev_ext[0]) / max(abs(ext[0]), 1e-300)
            dmax = abs(ext[1] - prev_ext[1]) / max(abs(ext[1]), 1e-300)
            if dmin < rtol and dmax < rtol:
                converged = True
                break
        prev_ext = ext
        beta = float(np.sqrt(b2))
        betas.append(beta)
        V.append(w / beta)
        AV.append(Aw / beta)
    lam = sla.eigvalsh_tridiagonal(np.asarray(alphas), np.asarray(betas[:len(alphas) - 1]))
    lmin, lmax = float(lam[0]), float(lam[-1])
    return ConditionEstimate(lambda_min=lmin, lambda_max=lmax,
                             kappa=lmax / lmin, converged=converged)
