"""Radial discretization of R^N.

Nodes sit at cell centres of a uniform mesh in a stretched coordinate
``s in (0, 1)`` with ``r = R * s**c``.  For ``c > 1`` the nodes cluster at
the origin, which keeps the ``r**(N-1-b)`` weight and the ``r**(2-b)``
behaviour of the profiles resolved.

Two families of quantities live on a grid:

* quadrature weights for ``int_0^R f(r) r^(N-1) dr`` (plain) and
  ``int_0^R f(r) r^(N-1-b) dr`` (singular), obtained by integrating the
  kernel exactly against piecewise cubic interpolation in ``s``;
* a finite-volume stiffness form whose mass matrix is the plain weight
  vector, so that ``-Delta_h = W^-1 K`` is symmetric in the plain inner
  product and discrete integration by parts is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma, roots_jacobi, roots_legendre

from .errors import ConfigError, UsageError

_GL_POINTS = 12


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N, 2 pi^(N/2) / Gamma(N/2)."""
    if int(N) != N or N < 1:
        raise ConfigError("N", f"dimension must be an integer >= 1, got {N!r}")
    return float(2.0 * np.pi ** (N / 2.0) / gamma(N / 2.0))


_LINEAR_PIECES = 3


def _linear_pieces(expo: float) -> int:
    # steep kernels s**expo make the first cubic stencils overshoot to
    # negative weights; linear pieces are positive and cost nothing there
    return max(_LINEAR_PIECES, int(expo // 2) + 1)


def _stencils(M: int) -> np.ndarray:
    """Four-node cubic stencil (1-based, ghosts <= 0) for each piece.

    Piece 0 is [0, s_1], piece k is [s_k, s_{k+1}], piece M is [s_M, 1].
    """
    k = np.arange(M + 1)
    start = np.clip(k - 1, -1, M - 3)
    return start[:, None] + np.arange(4)[None, :]


def _fold(idx: np.ndarray):
    """Map stencil indices to (node position sign, storage index).

    Ghost node 1-j sits at -s_j and carries the value of node j (even
    reflection through the origin).
    """
    sign = np.where(idx >= 1, 1.0, -1.0)
    node = np.where(idx >= 1, idx, 1 - idx)
    return sign, node - 1


def _accumulate(w, T, QW, P, store):
    """Add int kernel * Lagrange basis over each piece to the node weights."""
    n = P.shape[1]
    for m in range(n):
        num = np.ones_like(T)
        den = np.ones(P.shape[0])
        for j in range(n):
            if j == m:
                continue
            num = num * (T - P[:, j][:, None])
            den = den * (P[:, m] - P[:, j])
        np.add.at(w, store[:, m], (QW * num).sum(axis=1) / den)


def _product_weights(s: np.ndarray, expo: float, upper: float = 1.0) -> np.ndarray:
    """Weights w_j with sum_j w_j g(s_j) ~ int_0^upper s**expo g(s) ds.

    Cubic interpolation away from the origin; the first pieces use linear
    interpolation (constant on [0, s_1] by even reflection), which keeps
    every weight positive for steep kernels.
    """
    M = s.size
    left = np.concatenate(([0.0], s))
    right = np.minimum(np.concatenate((s, [1.0])), upper)
    pieces = np.nonzero(left < upper)[0]

    xg, wg = roots_legendre(_GL_POINTS)
    xj, wj = roots_jacobi(_GL_POINTS, 0.0, expo)
    a, b = left[pieces], right[pieces]
    T = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * xg[None, :]
    QW = 0.5 * (b - a)[:, None] * wg[None, :] * np.abs(T) ** expo
    if pieces[0] == 0:
        # Gauss-Jacobi absorbs the s**expo factor on [0, s_1]
        T[0] = 0.5 * b[0] * (1.0 + xj)
        QW[0] = (0.5 * b[0]) ** (expo + 1.0) * wj

    def assemble(n_lin, const_tail=False):
        w = np.zeros(M)
        lin = pieces < n_lin
        if const_tail and pieces[-1] == M:
            # hold the last node's value on [s_M, 1]
            lin[-1] = False
            w[M - 1] += QW[-1].sum()
        if lin.any():
            k = pieces[lin]
            idx = np.stack((k, k + 1), axis=1)
            sign, store = _fold(idx)
            _accumulate(w, T[lin], QW[lin], sign * s[store], store)
            # piece 0 interpolates between -s_1 and s_1, both node 1
        cub = ~lin
        if const_tail and pieces[-1] == M:
            cub[-1] = False
        if cub.any():
            idx = _stencils(M)[pieces[cub]]
            sign, store = _fold(idx)
            _accumulate(w, T[cub], QW[cub], sign * s[store], store)
        return w

    n_lin = _linear_pieces(expo)
    w = assemble(n_lin)
    # full-range weights must be positive; widen the linear zone until they are
    while upper >= 1.0 and np.any(w <= 0) and n_lin < M:
        n_lin = min(2 * n_lin, M)
        w = assemble(n_lin)
    if upper >= 1.0 and np.any(w <= 0):
        w = assemble(n_lin, const_tail=True)
    return w


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Truncated radial mesh with plain and singular quadrature weights."""

    N: int
    b: float
    R: float
    M: int
    clustering: float
    r: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    def descriptor(self) -> dict:
        return {"N": self.N, "b": self.b, "R": self.R, "M": self.M,
                "clustering": self.clustering}

    def __len__(self) -> int:
        return self.M

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or self.descriptor() == other.descriptor()

    @property
    def area(self) -> float:
        return sphere_area(self.N)

    @cached_property
    def drds(self) -> np.ndarray:
        """Jacobian dr/ds at the nodes."""
        c = self.clustering
        return c * self.R * self.s ** (c - 1.0)

    @cached_property
    def faces(self) -> np.ndarray:
        """Interface radii rho_{i+1/2}, i = 1..M, from the cumulative plain weights.

        With these interfaces each finite volume holds exactly the plain
        weight of its node; the last interface is R.
        """
        rho = (self.N * np.cumsum(self.w)) ** (1.0 / self.N)
        rho[-1] = self.R
        return rho

    @cached_property
    def stiffness(self) -> np.ndarray:
        """Face conductances k_f of the Dirichlet form sum_f k_f (u_{i+1}-u_i)^2.

        Entry M-1 couples the last node to the Dirichlet value 0 at r = R.
        """
        rho = self.faces
        r_right = np.append(self.r[1:], self.R)
        mid = 0.5 * (self.r + r_right)
        # rho/mid makes the flux exact for quadratics on graded meshes
        return rho ** (self.N - 1) * (rho / mid) / (r_right - self.r)

    def partial_weights(self, upper: float, weight: str = "plain") -> np.ndarray:
        """Quadrature weights for the integral over [0, upper] only."""
        if not 0.0 < upper <= self.R:
            raise UsageError(f"upper limit {upper} outside (0, R={self.R}]")
        expo = self.N if weight == "plain" else self.N - self.b
        c = self.clustering
        s_up = (upper / self.R) ** (1.0 / c)
        return c * self.R**expo * _product_weights(self.s, c * expo - 1.0, s_up)


def build_grid(N: int, b: float, R: float = 25.0, M: int = 4096,
               clustering: float = 2.0) -> RadialGrid:
    """Graded radial grid r_i = R ((i - 1/2)/M)**clustering, i = 1..M."""
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise ConfigError("N", f"must be an integer >= 1, got {N!r}")
    N = int(N)
    if not (0.0 < b < min(2.0, N)):
        raise ConfigError("b", f"must satisfy 0 < b < min(2, N) = {min(2, N)}, got {b!r}")
    if not (R > 0.0 and np.isfinite(R)):
        raise ConfigError("R", f"must be positive, got {R!r}")
    if isinstance(M, bool) or int(M) != M or M < 16:
        raise ConfigError("M", f"node count must be an integer >= 16, got {M!r}")
    M = int(M)
    if not (clustering >= 1.0 and np.isfinite(clustering)):
        raise ConfigError("clustering", f"grading factor must be >= 1, got {clustering!r}")

    c = float(clustering)
    s = (np.arange(1, M + 1) - 0.5) / M
    r = R * s**c
    w = c * R**N * _product_weights(s, c * N - 1.0)
    v = c * R ** (N - b) * _product_weights(s, c * (N - b) - 1.0)
    for arr in (r, s, w, v):
        arr.setflags(write=False)
    return RadialGrid(N=N, b=float(b), R=float(R), M=M, clustering=c,
                      r=r, s=s, w=w, v=v)


@dataclass(frozen=True, eq=False)
class Profile:
    """Real radial function sampled at the grid nodes.

    Profiles built from a known function may carry its r-derivative in
    ``deriv``; the kinetic term then integrates the supplied derivative
    instead of differencing the values.
    """

    grid: RadialGrid
    values: np.ndarray
    deriv: Optional[np.ndarray] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.M,):
            raise UsageError(f"profile has {vals.shape} values, grid has {self.grid.M} nodes")
        if not np.all(np.isfinite(vals)):
            raise UsageError("profile values must be finite")
        object.__setattr__(self, "values", vals)
        if self.deriv is not None:
            d = np.asarray(self.deriv, dtype=float)
            if d.shape != vals.shape or not np.all(np.isfinite(d)):
                raise UsageError("derivative samples must be finite and match the values")
            object.__setattr__(self, "deriv", d)

    @classmethod
    def from_function(cls, grid: RadialGrid, f, df=None) -> "Profile":
        vals = f(grid.r)
        return cls(grid, vals, None if df is None else df(grid.r))

    def __len__(self):
        return self.values.size


def _check(grid: RadialGrid, f: Profile) -> np.ndarray:
    if not isinstance(f, Profile):
        raise UsageError("expected a Profile")
    if not grid.same_as(f.grid):
        raise UsageError("profile lives on a different grid")
    return f.values


def integrate(grid: RadialGrid, f: Profile, weight: str = "plain") -> float:
    """|S^{N-1}| * sum_i w_i f_i (plain) or sum_i v_i f_i (singular)."""
    vals = _check(grid, f)
    if weight == "plain":
        wts = grid.w
    elif weight == "singular":
        wts = grid.v
    else:
        raise UsageError(f"unknown weight {weight!r}; use 'plain' or 'singular'")
    return grid.area * float(np.dot(wts, vals))


def dirichlet_form(grid: RadialGrid, f, g=None) -> float:
    """Discrete <f', g'> in the plain measure (without the sphere factor).

    ``f`` and ``g`` are value arrays; g defaults to f.
    """
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    df = np.append(f[1:], 0.0) - f
    dg = np.append(g[1:], 0.0) - g
    return float(np.dot(grid.stiffness, df * dg))


def gradient_sq_norm(grid: RadialGrid, f: Profile) -> float:
    """|S^{N-1}| * int |f'|^2 r^(N-1) dr.

    Uses the supplied derivative samples when the profile has them,
    otherwise the finite-volume Dirichlet form.
    """
    vals = _check(grid, f)
    if f.deriv is not None:
        return grid.area * float(np.dot(grid.w, f.deriv**2))
    return grid.area * dirichlet_form(grid, vals)


def stiffness_apply(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """K u for the tridiagonal stiffness matrix (Dirichlet at R)."""
    k = grid.stiffness
    du = np.append(u[1:], 0.0) - u
    flux = k * du
    out = -flux.copy()
    out[1:] += flux[:-1]
    return out


def stiffness_banded(grid: RadialGrid) -> np.ndarray:
    """K in LAPACK upper-banded storage (2 x M): row 0 super-diagonal, row 1 diagonal."""
    k = grid.stiffness
    diag = k.copy()
    diag[1:] += k[:-1]
    ab = np.zeros((2, grid.M))
    ab[0, 1:] = -k[:-1]
    ab[1] = diag
    return ab


def apply_laplacian(grid: RadialGrid, f: Profile) -> Profile:
    """Discrete radial Laplacian -W^-1 K f.

    Neumann at the origin (zero flux through r = 0), Dirichlet f(R) = 0.
    """
    vals = _check(grid, f)
    return Profile(grid, -stiffness_apply(grid, vals) / grid.w)


def derivative(grid: RadialGrid, f: Profile) -> np.ndarray:
    """Fourth-order finite-difference f'(r) at the nodes.

    Central five-point stencils in s, continued evenly through the origin
    and one-sided at the outer end, then divided by dr/ds.
    """
    g = _check(grid, f)
    if f.deriv is not None:
        return f.deriv.copy()
    M = grid.M
    h = 1.0 / M
    ext = np.concatenate((g[1::-1], g))
    d = np.empty(M)
    core = np.arange(M - 2)
    e = core + 2
    d[core] = (ext[e - 2] - 8 * ext[e - 1] + 8 * ext[e + 1] - ext[e + 2]) / (12 * h)
    # one-sided closures for the last two nodes
    g5 = g[M - 5:]
    d[M - 2] = (-g5[0] + 6 * g5[1] - 18 * g5[2] + 10 * g5[3] + 3 * g5[4]) / (12 * h)
    d[M - 1] = (3 * g5[0] - 16 * g5[1] + 36 * g5[2] - 48 * g5[3] + 25 * g5[4]) / (12 * h)
    return d / grid.drds


def interpolator(f: Profile):
    """Cubic spline of a profile in the stretched coordinate, evaluated in r.

    The spline runs through the nodes mirrored about s = 0, so the even
    symmetry at the origin is built in.  Returns ``ev(r, nu=0)`` giving the
    value (nu=0) or r-derivative (nu=1); points beyond R evaluate to 0.
    """
    g = f.grid
    s2 = np.concatenate((-g.s[::-1], g.s))
    sp = CubicSpline(s2, np.concatenate((f.values[::-1], f.values)))
    c = g.clustering

    def ev(r, nu=0):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = (r >= 0) & (r <= g.R)
        s = (r[inside] / g.R) ** (1.0 / c)
        if nu == 0:
            out[inside] = sp(s)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                dsdr = np.where(r[inside] > 0, s / (c * r[inside]), 0.0)
            out[inside] = sp(s, 1) * dsdr
        return out

    return ev
