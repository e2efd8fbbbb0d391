"""Checks around Q and the minimizers.

* the linearized operator L = -Delta + 1 - (1+2beta^2) |x|^-b Q^(2beta^2)
  in the radial sector, its action on Q and on the generator N/2 Q + r Q'
  of dilations, and the eigenvalue of L closest to zero;
* the Pohozaev balance of a minimizer on a ball B_delta, obtained by
  pairing the Euler-Lagrange equation with x . grad u;
* agreement of minimizers started from different seeds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import eigsh

from .errors import NonConvergenceError, NumericalError, UsageError
from .grid import Profile, RadialGrid, derivative, interpolator
from .minimizer import FlowConfig, MinimizeResult, minimize, multiplier
from .params import Params, PotentialSpec

ORIGIN_NODES = 2
# ball radii, in units of the profile's gradient scale, probed by pohozaev_scan
SCAN_FACTORS = (0.125, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0)


@dataclass(eq=False)
class LinearizedOperator:
    """L = W^-1 A with A symmetric tridiagonal, plus an optional symmetric rank-one term.

    ``A = K + W - (1+2beta^2) diag(v Q^(2beta^2)) - c c^T / s`` where the
    rank-one part is present only for calibration operators.
    """

    grid: RadialGrid
    main: np.ndarray
    off: np.ndarray
    rank_one: Optional[tuple] = None
    weight: Optional[np.ndarray] = None

    def matrix(self) -> sparse.csr_matrix:
        return sparse.diags([self.off, self.main, self.off], [-1, 0, 1], format="csr")

    def apply_weighted(self, f) -> np.ndarray:
        """A f."""
        f = np.asarray(f, dtype=float)
        out = self.main * f
        out[:-1] += self.off * f[1:]
        out[1:] += self.off * f[:-1]
        if self.rank_one is not None:
            c, s = self.rank_one
            out -= c * (np.dot(c, f) / s)
        return out

    def apply(self, f) -> np.ndarray:
        """L f = W^-1 A f."""
        return self.apply_weighted(f) / self.grid.w

    def apply_pointwise(self, f, df) -> np.ndarray:
        """L f at the nodes from values f and exact derivative samples df.

        -f'' - (N-1)/r f' + f - (1+2beta^2) r^-b Q^(2beta^2) f, with f''
        from fourth-order differences of df and the exact r^-b.  Unlike the
        finite-volume form this is consistent pointwise for the r^(2-b)
        behaviour of Q at the origin.
        """
        g = self.grid
        f = np.asarray(f, dtype=float)
        df = np.asarray(df, dtype=float)
        d2 = derivative(g, Profile(g, df))
        out = -d2 - (g.N - 1) / g.r * df + f
        if self.weight is not None:
            out -= self.weight * f
        return out

    def inner(self, f, g) -> float:
        """Plain-weighted <f, g> without the sphere factor."""
        return float(np.dot(self.grid.w, np.asarray(f) * np.asarray(g)))

    def with_kernel(self, psi) -> "LinearizedOperator":
        """Rank-one modification making ``psi`` an exact kernel vector."""
        Apsi = self.apply_weighted(psi)
        s = float(np.dot(psi, Apsi))
        if s == 0:
            raise UsageError("psi is A-orthogonal to itself")
        if self.rank_one is not None:
            raise UsageError("operator already carries a rank-one term")
        return LinearizedOperator(self.grid, self.main, self.off, (Apsi, s), self.weight)


def build_linearized(q, with_potential: bool = True) -> LinearizedOperator:
    """Radial L around Q with the grid's Neumann/Dirichlet conditions."""
    g = q.grid
    k = g.stiffness
    main = k.copy()
    main[1:] += k[:-1]
    main = main + g.w
    weight = None
    if with_potential:
        p = q.params.p
        main = main - p * g.v * q.profile.values ** (p - 1)
        weight = p * g.r ** (-g.b) * q.profile.values ** (p - 1)
    return LinearizedOperator(g, main, -k[:-1].copy(), weight=weight)


def _wnorm(g, f, start=ORIGIN_NODES):
    sl = slice(start, None)
    return math.sqrt(g.area * float(np.dot(g.w[sl], f[sl] ** 2)))


def lq_check(q, L: Optional[LinearizedOperator] = None) -> float:
    """Relative weighted error of L Q against -2 beta^2 r^-b Q^(1+2beta^2), r >= r_3."""
    L = L or build_linearized(q)
    g = q.grid
    Q = q.profile.values
    target = -2.0 * q.params.beta2 * g.r ** (-g.b) * Q**q.params.p
    return _wnorm(g, L.apply_pointwise(Q, q.profile.deriv) - target) / _wnorm(g, target)


def dilation_generator(q, with_derivative: bool = False):
    """psi = N/2 Q + r Q' at the nodes, and optionally psi' = (N/2+1) Q' + r Q''.

    Q'' comes from the limit equation at each node.
    """
    g = q.grid
    Q, dQ = q.profile.values, q.profile.deriv
    psi = 0.5 * g.N * Q + g.r * dQ
    if not with_derivative:
        return psi
    d2Q = -(g.N - 1) / g.r * dQ + Q - g.r ** (-g.b) * Q**q.params.p
    return psi, (0.5 * g.N + 1.0) * dQ + g.r * d2Q


def dilation_identity_check(q, L: Optional[LinearizedOperator] = None) -> float:
    """Relative weighted norm over r >= r_3 of L(N/2 Q + r Q') + 2Q."""
    L = L or build_linearized(q)
    g = q.grid
    Q = q.profile.values
    psi, dpsi = dilation_generator(q, with_derivative=True)
    res = L.apply_pointwise(psi, dpsi) + 2.0 * Q
    return _wnorm(g, res) / _wnorm(g, 2.0 * Q)


def kernel_probe(Lop: LinearizedOperator, k: int = 4) -> float:
    """Eigenvalue of L (radial sector) smallest in magnitude.

    Shift-invert Lanczos about 0 on A x = lambda W x; a rank-one calibration
    term switches to a dense generalized solve.
    """
    g = Lop.grid
    if Lop.rank_one is not None:
        A = Lop.matrix().toarray()
        c, s = Lop.rank_one
        A -= np.outer(c, c) / s
        vals = eigh(A, np.diag(g.w), eigvals_only=True)
        return float(vals[np.argmin(np.abs(vals))])
    W = sparse.diags(g.w, format="csc")
    try:
        vals = eigsh(Lop.matrix().tocsc(), k=k, M=W, sigma=0.0, which="LM",
                     return_eigenvectors=False, tol=1e-12)
    except Exception as exc:  # ARPACK reports its own failure types
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    return float(vals[np.argmin(np.abs(vals))])


@dataclass(frozen=True)
class PohozaevReport:
    delta: float
    left: float
    right: float
    boundary: dict = field(default_factory=dict)
    mismatch: float = 0.0
    interpolated: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def pohozaev_terms(params: Params, pot: PotentialSpec, u: Profile, mu: float, delta: float,
                   floor: float = 1e-14) -> PohozaevReport:
    """Both sides of the Pohozaev identity on B_delta for a profile u and multiplier mu.

    Left: the terms coming from -Delta u paired with r u', with the ball's
    kinetic energy eliminated through the equation paired with u.  Right:
    potential, multiplier and interaction terms.  For a solution of the
    Euler-Lagrange equation the two agree.
    """
    g = u.grid
    if not 0.0 < delta < g.R:
        raise UsageError(f"delta must lie in (0, R = {g.R}), got {delta}")
    N, b, a, p = g.N, g.b, params.a, params.p
    ev = interpolator(u)
    ud = float(ev(np.array([delta]))[0])
    dud = float(ev(np.array([delta]), 1)[0])
    vals = u.values
    wp = g.partial_weights(delta, "plain")
    ws = g.partial_weights(delta, "singular")
    V = pot(g.r)
    rV = pot.radial_derivative(g.r)
    I_vmu = float(np.dot(wp, (V - mu) * vals**2))
    I_nl = float(np.dot(ws, np.abs(vals) ** (p + 1)))
    I_pot = float(np.dot(wp, vals**2 * (N * (mu - V) - rV)))
    Vd = float(pot(delta))

    flux = -0.5 * delta**N * dud**2
    mixed = 0.5 * (2 - N) * delta ** (N - 1) * ud * dud
    left = flux + mixed + 0.5 * (2 - N) * (-I_vmu + a * I_nl)

    bnd_pot = 0.5 * (mu - Vd) * ud**2 * delta**N
    bnd_nl = a / (p + 1) * abs(ud) ** (p + 1) * delta ** (N - b)
    right = -0.5 * I_pot + bnd_pot + bnd_nl - a * (N - b) / (p + 1) * I_nl

    mismatch = abs(left - right) / max(abs(left), abs(right), floor)
    boundary = {"u": ud, "du": dud, "flux": flux, "mixed": mixed,
                "potential": bnd_pot, "interaction": bnd_nl}
    on_node = bool(np.any(np.isclose(g.r, delta, rtol=1e-12, atol=0.0)))
    return PohozaevReport(float(delta), float(left), float(right), boundary,
                          float(mismatch), not on_node)


def pohozaev_balance(result: MinimizeResult, delta: float) -> PohozaevReport:
    return pohozaev_terms(result.params, result.pot, result.u, result.mu, delta)


def pohozaev_for_profile(params: Params, pot: PotentialSpec, u: Profile, delta: float) -> PohozaevReport:
    """Balance for an arbitrary profile with its Rayleigh-quotient multiplier."""
    mu = multiplier(params, pot, u.grid, u.values)
    return pohozaev_terms(params, pot, u, mu, delta)


def pohozaev_scan(params: Params, pot: PotentialSpec, u: Profile, scale: float,
                  mu: Optional[float] = None, factors: Sequence[float] = SCAN_FACTORS):
    """Largest mismatch over balls of radius f * scale, and the per-radius reports.

    Once a ball holds essentially all the mass the balance collapses to the
    virial condition d/dt E(t^(N/2) u(t.))|_(t=1) = 0, which a profile that is
    merely stationary under dilation also meets.  Small balls test the local
    form of the identity, so scanning both ends separates solutions from
    such profiles.
    """
    if mu is None:
        mu = multiplier(params, pot, u.grid, u.values)
    reports = [pohozaev_terms(params, pot, u, mu, f * scale) for f in factors
               if f * scale < u.grid.R]
    if not reports:
        raise UsageError("no scan radius falls inside the grid")
    return max(r.mismatch for r in reports), reports


@dataclass
class UniquenessReport:
    max_distance: float
    converged: list
    failures: dict
    results: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"max_distance": self.max_distance, "converged": self.converged,
                "failures": self.failures}


def uniqueness_probe(params: Params, pot: PotentialSpec, grid: RadialGrid,
                     seeds: Sequence[Profile], config: Optional[FlowConfig] = None,
                     q=None, a_star: Optional[float] = None) -> UniquenessReport:
    """Minimize from every seed and report the largest pairwise sup distance."""
    results, ok, failures = [], [], {}
    for i, seed in enumerate(seeds):
        try:
            results.append(minimize(params, pot, grid, seed, config, q=q, a_star=a_star))
            ok.append(i)
        except NonConvergenceError as exc:
            failures[i] = str(exc)
    dist = 0.0
    for x, y in combinations(results, 2):
        dist = max(dist, float(np.max(np.abs(x.u.values - y.u.values))))
    return UniquenessReport(dist, ok, failures, results)


def standard_seeds(grid: RadialGrid, q=None, rng: Optional[np.random.Generator] = None,
                   count: int = 5):
    """Gaussians of several widths, plus unit-mass rescaled copies of Q."""
    from .minimizer import gaussian, normalize

    rng = rng or np.random.default_rng(0)
    seeds = []
    widths = np.sort(rng.uniform(0.3, 2.5, size=count))
    for i, wdt in enumerate(widths):
        if q is not None and i % 2 == 1:
            scale = 1.0 / wdt
            vals = q.evaluate(scale * grid.r)
            seeds.append(Profile(grid, normalize(grid, vals)))
        else:
            seeds.append(gaussian(grid, float(wdt)))
    return seeds
