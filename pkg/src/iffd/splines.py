"""Univariate spline spaces on uniform grids.

Open-knot B-spline bases evaluated with the de Boor triangular scheme,
symmetric cardinal B-splines, Dirichlet boundary bookkeeping, and the
node/frequency sets that drive the trigonometric diagonalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_DEGREE = 16


class UnsupportedSpaceError(ValueError):
    """Raised when an operation does not apply to the given spline space."""


@dataclass(frozen=True)
class SplineSpace:
    """Spline space of degree ``p`` on the uniform grid ``z_k = k/n``.

    ``interior_mults`` lists ``(breakpoint_index, multiplicity)`` pairs for
    breakpoints carrying a knot multiplicity larger than one; an empty list
    means maximum smoothness (C^{p-1} everywhere in (0, 1)).
    """

    p: int
    n: int
    interior_mults: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 1 <= self.p <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {self.p}")
        if self.n < 1:
            raise ValueError(f"need at least one element, got n={self.n}")
        mults = tuple(sorted((int(k), int(m)) for k, m in self.interior_mults if int(m) > 1))
        seen = set()
        for k, m in mults:
            if not 1 <= k <= self.n - 1:
                raise ValueError(f"breakpoint index {k} outside 1..{self.n - 1}")
            if not 1 <= m <= self.p:
                raise ValueError(f"multiplicity {m} outside 1..{self.p}")
            if k in seen:
                raise ValueError(f"duplicate breakpoint index {k}")
            seen.add(k)
        object.__setattr__(self, "interior_mults", mults)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def num_extra_knots(self) -> int:
        return sum(m - 1 for _, m in self.interior_mults)

    @property
    def dim_full(self) -> int:
        """Dimension of the unconstrained space: n + p + extra multiplicities."""
        return self.n + self.p + self.num_extra_knots

    @property
    def is_smooth(self) -> bool:
        return not self.interior_mults

    def smooth_base(self) -> "SplineSpace":
        """The maximum-smoothness space on the same breakpoint grid."""
        return SplineSpace(self.p, self.n)


@dataclass(frozen=True)
class DirichletSet:
    """Subset of {0, 1} marking interval ends with Dirichlet conditions."""

    left: bool
    right: bool

    @classmethod
    def from_token(cls, token: str) -> "DirichletSet":
        """Parse a two-letter token, e.g. 'dn' = Dirichlet at 0, Neumann at 1."""
        tok = token.strip().lower()
        if len(tok) != 2 or any(c not in "dn" for c in tok):
            raise ValueError(f"boundary token must match [dn][dn], got {token!r}")
        return cls(tok[0] == "d", tok[1] == "d")

    def token(self) -> str:
        return ("d" if self.left else "n") + ("d" if self.right else "n")

    @property
    def count(self) -> int:
        return int(self.left) + int(self.right)

    def __iter__(self):
        if self.left:
            yield 0.0
        if self.right:
            yield 1.0


DIRICHLET_BOTH = DirichletSet(True, True)
DIRICHLET_NONE = DirichletSet(False, False)


def open_knot_vector(space: SplineSpace) -> np.ndarray:
    """Open knot vector with p+1 repeated end knots and the stated interior
    multiplicities; length equals dim_full + p + 1."""
    p, n = space.p, space.n
    mult = {k: m for k, m in space.interior_mults}
    knots = [0.0] * (p + 1)
    for k in range(1, n):
        knots.extend([k / n] * mult.get(k, 1))
    knots.extend([1.0] * (p + 1))
    return np.asarray(knots)


@lru_cache(maxsize=256)
def _knots_cached(space: SplineSpace) -> np.ndarray:
    knots = open_knot_vector(space)
    knots.setflags(write=False)
    return knots


def _find_span(knots: np.ndarray, p: int, x: float) -> int:
    m = len(knots) - p - 1
    span = int(np.searchsorted(knots, x, side="right")) - 1
    return min(max(span, p), m - 1)


def eval_basis(space: SplineSpace, x: float, deriv: int = 0) -> tuple[np.ndarray, int]:
    """Values of the p+1 B-splines supported at ``x`` (derivative ``deriv``).

    Returns ``(values, first)`` where ``values[a]`` is the ``deriv``-th
    derivative of basis function ``first + a`` at ``x``.  At ``deriv=0`` the
    values are nonnegative and sum to one.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"evaluation point {x} outside [0, 1]")
    p = space.p
    if not 0 <= deriv <= p:
        raise ValueError(f"derivative order must be in 0..{p}, got {deriv}")
    knots = _knots_cached(space)
    span = _find_span(knots, p, x)

    # de Boor triangular scheme at reduced degree p - deriv
    q = p - deriv
    vals = np.zeros(q + 1)
    vals[0] = 1.0
    left = np.zeros(q + 1)
    right = np.zeros(q + 1)
    for j in range(1, q + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            temp = vals[r] / (right[r + 1] + left[j - r])
            vals[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        vals[j] = saved

    # raise the degree back up, differentiating once per step
    for q in range(p - deriv + 1, p + 1):
        new = np.zeros(q + 1)
        for r in range(q + 1):
            i = span - q + r
            acc = 0.0
            if r > 0:
                den = knots[i + q] - knots[i]
                if den > 0.0:
                    acc += vals[r - 1] / den
            if r < q:
                den = knots[i + q + 1] - knots[i + 1]
                if den > 0.0:
                    acc -= vals[r] / den
            new[r] = q * acc
        vals = new
    return vals, span - p


def eval_spline(space: SplineSpace, coeffs: np.ndarray, x: float, deriv: int = 0) -> float:
    """Evaluate a spline given by open-knot coefficients at a point."""
    vals, first = eval_basis(space, x, deriv)
    return float(vals @ coeffs[first:first + space.p + 1])


def greville_abscissae(space: SplineSpace) -> np.ndarray:
    """Knot averages; collocation at these points is nonsingular."""
    knots = _knots_cached(space)
    p = space.p
    m = space.dim_full
    g = np.empty(m)
    for i in range(m):
        g[i] = knots[i + 1:i + p + 1].mean()
    return np.clip(g, 0.0, 1.0)


def cardinal_bspline(p: int, x) -> np.ndarray | float:
    """Symmetric cardinal B-spline of degree ``p`` (unit grid, peak at 0).

    Even in x, supported on [-(p+1)/2, (p+1)/2], integrates to one.
    """
    if p < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    pts = x[np.newaxis] if scalar else x
    # table over half-integer offsets x + k/2; each level consumes one
    # offset on each side, so after p levels only the center survives
    offs = np.arange(-p, p + 1) * 0.5
    t = pts[..., np.newaxis] + offs
    vals = ((t >= -0.5) & (t < 0.5)).astype(float)
    for q in range(1, p + 1):
        t = t[..., 1:-1]
        a = (q + 1 + 2.0 * t) / (2.0 * q)
        b = (q + 1 - 2.0 * t) / (2.0 * q)
        vals = a * vals[..., 2:] + b * vals[..., :-2]
    out = vals[..., 0]
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class NodeSet:
    """Interpolation nodes, frequencies and phase of one boundary case.

    The spline interpolants of ``sin(alpha_j x + beta)`` at the nodes are the
    discrete eigenfunctions on the smooth regular subspace.
    """

    nodes: np.ndarray
    alphas: np.ndarray
    beta: float

    def __len__(self) -> int:
        return len(self.nodes)


def regular_dim(p: int, n: int, D: DirichletSet) -> int:
    """Dimension of the smooth regular subspace."""
    if p % 2 == 1:
        if D.left and D.right:
            return n - 1
        if not D.left and not D.right:
            return n + 1
        return n
    return n


def nodes_and_frequencies(space: SplineSpace, D: DirichletSet) -> NodeSet:
    """Node abscissae x_i, frequencies alpha_j and phase beta for (p, D).

    Only defined for maximum-smoothness spaces; the regular subspace of a
    reduced-regularity space reuses the nodes of its smooth base.
    """
    if not space.is_smooth:
        raise UnsupportedSpaceError(
            "nodes are defined on the maximum-smoothness space; "
            "use the smooth base space for reduced-regularity splittings"
        )
    p, n, h = space.p, space.n, space.h
    nreg = regular_dim(p, n, D)
    i = np.arange(1, nreg + 1, dtype=float)
    j = np.arange(1, nreg + 1, dtype=float)
    if p % 2 == 0:
        nodes = (i - 0.5) * h
    elif D.left:
        nodes = i * h
    else:
        nodes = (i - 1.0) * h
    if D.left and D.right:
        alphas = j * math.pi
    elif D.left or D.right:
        alphas = (j - 0.5) * math.pi
    else:
        alphas = (j - 1.0) * math.pi
    beta = 0.0 if D.left else math.pi / 2.0
    return NodeSet(nodes=nodes, alphas=alphas, beta=beta)
