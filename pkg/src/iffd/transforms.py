"""Unnormalized discrete sine/cosine transforms of types I-IV.

The transform matrices are pure sin/cos samples without scale factors; all
normalization lives in the spectral module.  The fast path embeds each
transform into a complex FFT of length 2N+-2, 4N or 8N, so a general-purpose
FFT is the only primitive required; a dense O(N^2) reference path backs the
self-tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .splines import DirichletSet

FAMILIES = ("DST-I", "DST-II", "DST-III", "DST-IV",
            "DCT-I", "DCT-II", "DCT-III", "DCT-IV")

_ADJOINT = {
    "DST-I": "DST-I", "DST-II": "DST-III", "DST-III": "DST-II", "DST-IV": "DST-IV",
    "DCT-I": "DCT-I", "DCT-II": "DCT-III", "DCT-III": "DCT-II", "DCT-IV": "DCT-IV",
}

_REFERENCE_CAP = 4096


@dataclass(frozen=True)
class TransformKind:
    """One of the eight DST/DCT families at a fixed size."""

    family: str
    size: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown transform family {self.family!r}")
        if self.size < 1:
            raise ValueError("transform size must be positive")
        if self.family == "DCT-I" and self.size < 2:
            raise ValueError("DCT-I needs size >= 2")

    @property
    def adjoint(self) -> "TransformKind":
        return TransformKind(_ADJOINT[self.family], self.size)


def select_transform(p: int, D: DirichletSet, n_reg: int) -> TransformKind:
    """Transform family diagonalizing the regular subspace for (parity, D)."""
    if n_reg < 1:
        raise ValueError("n_reg must be positive")
    odd = p % 2 == 1
    if D.left and D.right:
        fam = "DST-I" if odd else "DST-III"
    elif D.left:
        fam = "DST-II" if odd else "DST-IV"
    elif D.right:
        fam = "DCT-II" if odd else "DCT-IV"
    else:
        fam = "DCT-I" if odd else "DCT-III"
    return TransformKind(fam, n_reg)


def reference_matrix(kind: TransformKind) -> np.ndarray:
    """Dense transform matrix with entries sin(x_i alpha_j + beta), 1-based
    i, j as tabulated; test/reference path only."""
    N = kind.size
    if N > _REFERENCE_CAP:
        raise ValueError(f"reference matrix capped at {_REFERENCE_CAP}, got {N}")
    i = np.arange(1, N + 1)[:, np.newaxis].astype(float)
    j = np.arange(1, N + 1)[np.newaxis, :].astype(float)
    fam = kind.family
    if fam == "DST-I":
        return np.sin(i * j * math.pi / (N + 1))
    if fam == "DST-II":
        return np.sin(i * (2 * j - 1) * math.pi / (2 * N))
    if fam == "DST-III":
        return np.sin((2 * i - 1) * j * math.pi / (2 * N))
    if fam == "DST-IV":
        return np.sin((2 * i - 1) * (2 * j - 1) * math.pi / (4 * N))
    if fam == "DCT-I":
        return np.cos((i - 1) * (j - 1) * math.pi / (N - 1))
    if fam == "DCT-II":
        return np.cos((i - 1) * (2 * j - 1) * math.pi / (2 * N))
    if fam == "DCT-III":
        return np.cos((2 * i - 1) * (j - 1) * math.pi / (2 * N))
    return np.cos((2 * i - 1) * (2 * j - 1) * math.pi / (4 * N))


def apply_reference(kind: TransformKind, v: np.ndarray) -> np.ndarray:
    """Dense product against the reference matrix (naive O(N^2) path)."""
    return np.asarray(v, float) @ reference_matrix(kind).T


def apply(kind: TransformKind, v: np.ndarray) -> np.ndarray:
    """Fast transform of the rows of ``v`` (last axis of length ``size``).

    Matches ``reference_matrix(kind) @ row`` to rounding error at
    O(N log N) cost via an odd/even extension and one real FFT.
    """
    x = np.asarray(v, dtype=float)
    N = kind.size
    if x.shape[-1] != N:
        raise ValueError(f"last axis must have length {N}, got {x.shape[-1]}")
    lead = x.shape[:-1]
    x = x.reshape(-1, N)
    fam = kind.family

    if fam == "DST-I":
        L = 2 * N + 2
        z = np.zeros((x.shape[0], L))
        z[:, 1:N + 1] = x
        z[:, N + 2:] = -x[:, ::-1]
        y = -0.5 * np.fft.rfft(z, axis=-1).imag[:, 1:N + 1]
    elif fam == "DST-II":
        L = 4 * N
        z = np.zeros((x.shape[0], L))
        z[:, 1:2 * N:2] = x
        z[:, 2 * N + 1::2] = -x[:, ::-1]
        y = -0.5 * np.fft.rfft(z, axis=-1).imag[:, 1:N + 1]
    elif fam == "DST-III":
        L = 4 * N
        z = np.zeros((x.shape[0], L))
        z[:, 1:N + 1] = x
        z[:, 3 * N:] = -x[:, ::-1]
        y = -0.5 * np.fft.rfft(z, axis=-1).imag[:, 1:2 * N:2]
    elif fam == "DST-IV":
        L = 8 * N
        z = np.zeros((x.shape[0], L))
        z[:, 1:2 * N:2] = x
        z[:, 6 * N + 1::2] = -x[:, ::-1]
        y = -0.5 * np.fft.rfft(z, axis=-1).imag[:, 1:2 * N:2]
    elif fam == "DCT-I":
        L = 2 * N - 2
        z = np.zeros((x.shape[0], L))
        z[:, :N] = x
        z[:, N:] = x[:, -2:0:-1]
        F = np.fft.rfft(z, axis=-1).real[:, :N]
        y = 0.5 * (F + x[:, :1] + np.where(np.arange(N) % 2 == 0, 1.0, -1.0) * x[:, -1:])
    elif fam == "DCT-II":
        L = 4 * N
        z = np.zeros((x.shape[0], L))
        z[:, 1:2 * N:2] = x
        z[:, 2 * N + 1::2] = x[:, ::-1]
        y = 0.5 * np.fft.rfft(z, axis=-1).real[:, :N]
    elif fam == "DCT-III":
        L = 4 * N
        z = np.zeros((x.shape[0], L))
        z[:, :N] = x
        z[:, 3 * N + 1:] = x[:, 1:][:, ::-1]
        F = np.fft.rfft(z, axis=-1).real[:, 1:2 * N:2]
        y = 0.5 * (F + x[:, :1])
    else:  # DCT-IV
        L = 8 * N
        z = np.zeros((x.shape[0], L))
        z[:, 1:2 * N:2] = x
        z[:, 6 * N + 1::2] = x[:, ::-1]
        y = 0.5 * np.fft.rfft(z, axis=-1).real[:, 1:2 * N:2]

    return np.ascontiguousarray(y).reshape(lead + (N,))


def apply_adjoint(kind: TransformKind, v: np.ndarray) -> np.ndarray:
    """Fast product with the transposed transform matrix."""
    return apply(kind.adjoint, v)
