"""Energy functional, Gagliardo-Nirenberg ratio and the scaling probes.

E_a(u) = int |grad u|^2 + int V u^2 - a/(1+beta^2) int |x|^-b |u|^(2+2beta^2)

All integrals are over R^N and reduce to radial quadratures on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, UsageError
from .grid import Profile, RadialGrid, build_grid, gradient_sq_norm, integrate
from .params import Params, PotentialSpec


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    trap: float
    interaction: float
    total: float
    mass: float

    def to_dict(self) -> dict:
        return {"kinetic": self.kinetic, "trap": self.trap, "interaction": self.interaction,
                "total": self.total, "mass": self.mass}


def energy(params: Params, pot: PotentialSpec, grid: RadialGrid, u: Profile) -> EnergyBreakdown:
    """Energy of ``u`` without normalizing it; ``interaction`` already carries a/(1+beta^2)."""
    vals = u.values
    kin = gradient_sq_norm(grid, u)
    mass = integrate(grid, Profile(grid, vals**2))
    trap = integrate(grid, Profile(grid, pot(grid.r) * vals**2)) if pot.trapping else 0.0
    nl = integrate(grid, Profile(grid, np.abs(vals) ** (params.p + 1)), "singular")
    inter = params.a / (1.0 + params.beta2) * nl
    total = kin + trap - inter
    if not all(map(math.isfinite, (kin, trap, inter, mass))):
        raise NumericalError("non-finite energy contribution")
    return EnergyBreakdown(kin, trap, inter, total, mass)


def gn_ratio(params: Params, grid: RadialGrid, u: Profile, a_star: float) -> float:
    """[a*/(1+beta^2)] int |x|^-b |u|^(2+2beta^2) / (||grad u||^2 ||u||^(2 beta^2)).

    At most 1, with equality on the family m n^(N/2) Q(n x).
    """
    vals = u.values
    mass = integrate(grid, Profile(grid, vals**2))
    kin = gradient_sq_norm(grid, u)
    if mass <= 0.0 or kin <= 0.0:
        raise UsageError("GN ratio needs a nonzero, non-constant profile")
    nl = integrate(grid, Profile(grid, np.abs(vals) ** (params.p + 1)), "singular")
    return a_star / (1.0 + params.beta2) * nl / (kin * mass**params.beta2)


def trap_moment(pot: PotentialSpec, q) -> float:
    """B = int h Q^2 / ||Q||^2 with h = V."""
    g = q.grid
    return integrate(g, Profile(g, pot(g.r) * q.profile.values**2)) / q.mass


def lambda_const(params: Params, pot: PotentialSpec, q) -> float:
    """lambda = (a* l int hQ^2 / (2 beta^l ||Q||^2))^(1/(l+2))."""
    l = pot.l
    B = trap_moment(pot, q)
    return (q.a_star * l * B / (2.0 * params.beta**l)) ** (1.0 / (l + 2.0))


def two_term_min(A: float, B: float, l: float):
    """Minimizer and minimum of A alpha^2 + B alpha^-l over alpha > 0."""
    if A <= 0 or B <= 0:
        raise DomainError("both coefficients must be positive")
    alpha = (l * B / (2.0 * A)) ** (1.0 / (l + 2.0))
    return alpha, A * alpha**2 + B * alpha ** (-l)


def _g_coeffs(params, pot, q):
    a_star = q.a_star
    if params.a >= a_star:
        raise DomainError(f"g(alpha) needs a < a* = {a_star:.10g}, got a = {params.a:.10g}")
    A = (a_star - params.a) / (a_star * params.beta2)
    return A, trap_moment(pot, q)


def g_alpha(params: Params, pot: PotentialSpec, q, alpha):
    """g(alpha) = (alpha^2/beta^2)(a*-a)/a* + alpha^-l int hQ^2/||Q||^2."""
    A, B = _g_coeffs(params, pot, q)
    alpha = np.asarray(alpha, dtype=float)
    return A * alpha**2 + B * alpha ** (-pot.l)


def minimize_g(params: Params, pot: PotentialSpec, q):
    """(alpha*, g(alpha*)) in closed form."""
    A, B = _g_coeffs(params, pot, q)
    return two_term_min(A, B, pot.l)


def energy_constant(params: Params, pot: PotentialSpec, q) -> float:
    """C with e(a) ~ C ((a*-a)/a*)^(l/(l+2)) as a -> a*."""
    l = pot.l
    B = trap_moment(pot, q)
    bracket = (l / 2.0) ** (2.0 / (l + 2.0)) + (2.0 / l) ** (l / (l + 2.0))
    return (B / params.beta**l) ** (2.0 / (l + 2.0)) * bracket


def _cutoff(x):
    """Smooth bump: 1 on [0, 1], 0 on [2, inf), C-infinity in between."""
    x = np.asarray(x, dtype=float)

    def psi(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    def dpsi(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
        return out

    t = 2.0 - x
    num, den = psi(t), psi(t) + psi(x - 1.0)
    phi = num / den
    # d/dx of psi(2-x) / (psi(2-x) + psi(x-1))
    dn = -dpsi(t)
    dd = -dpsi(t) + dpsi(x - 1.0)
    dphi = (dn * den - num * dd) / den**2
    return phi, dphi


def probe_profile(q, grid: RadialGrid, tau: float) -> Profile:
    """Unit-mass phi(x) Q(tau x) tau^(N/2) on ``grid``, with exact derivative."""
    r = grid.r
    N = q.params.N
    Q, dQ = q.evaluate(tau * r, with_derivative=True)
    phi, dphi = _cutoff(r)
    vals = tau ** (N / 2.0) * phi * Q
    der = tau ** (N / 2.0) * (dphi * Q + phi * tau * dQ)
    norm = math.sqrt(integrate(grid, Profile(grid, vals**2)))
    return Profile(grid, vals / norm, der / norm)


def scaling_probe(params: Params, pot: PotentialSpec, q, taus, grid: RadialGrid | None = None):
    """Energies of the normalized cut-off rescalings u_tau.

    Returns a list of dicts with keys tau, energy, kinetic, trap, interaction.
    The profiles are supported in the unit-to-two ball, so by default they
    are sampled on a grid of radius 2 with the node count of ``q.grid``.
    """
    if grid is None:
        grid = build_grid(q.grid.N, q.grid.b, 2.0, q.grid.M, q.grid.clustering)
    rows = []
    for tau in taus:
        if not tau > 0:
            raise UsageError(f"tau must be positive, got {tau}")
        u = probe_profile(q, grid, float(tau))
        e = energy(params, pot, grid, u)
        rows.append({"tau": float(tau), "energy": e.total, "kinetic": e.kinetic,
                     "trap": e.trap, "interaction": e.interaction})
    return rows


def fit_scaling_coefficients(rows, l: float):
    """Least-squares (c2, cl) in E(tau) ~ c2 tau^2 + cl tau^-l."""
    tau = np.array([r["tau"] for r in rows])
    E = np.array([r["energy"] for r in rows])
    X = np.column_stack((tau**2, tau ** (-l)))
    coef, *_ = np.linalg.lstsq(X, E, rcond=None)
    return float(coef[0]), float(coef[1])


def predicted_tau2_coefficient(params: Params, q) -> float:
    """(1 - a/a*) int |grad Q|^2 / ||Q||^2."""
    return (1.0 - params.a / q.a_star) * q.kinetic / q.mass


def random_bumps(grid: RadialGrid, rng: np.random.Generator, count: int):
    """Seeded positive bumps A exp(-((r-c)/w)^2) (1 + e cos r) with exact derivatives."""
    r = grid.r
    out = []
    for _ in range(count):
        c, w, A = rng.uniform(0.0, 3.0), rng.uniform(0.3, 3.0), rng.uniform(0.1, 2.0)
        e = 0.3 * rng.uniform()
        g = A * np.exp(-(((r - c) / w) ** 2))
        dg = -2.0 * (r - c) / w**2 * g
        out.append(Profile(grid, g * (1.0 + e * np.cos(r)), dg * (1.0 + e * np.cos(r)) - g * e * np.sin(r)))
    return out


GN_FAMILY = ((1.0, 1.0), (2.0, 3.0), (0.5, 0.2))


def gn_family(q, pairs=GN_FAMILY):
    """GN ratio on m n^(N/2) Q(n .) for each (m, n).

    Dilations with n < 1 spread Q out, so they are sampled on a grid of
    radius R/n with the node count of ``q.grid``.
    """
    g = q.grid
    rows = []
    for m, n in pairs:
        if not (m != 0 and n > 0):
            raise UsageError(f"need m != 0 and n > 0, got ({m}, {n})")
        grid = g if n >= 1 else build_grid(g.N, g.b, g.R / n, g.M, g.clustering)
        ratio = gn_ratio(q.params, grid, q.scaled_profile(grid, m, n), q.a_star)
        rows.append({"m": float(m), "n": float(n), "ratio": ratio})
    return rows


def gn_bump_max(q, rng: np.random.Generator, count: int = 100) -> float:
    """Largest GN ratio over ``count`` seeded random bumps on ``q.grid``."""
    return max(gn_ratio(q.params, q.grid, u, q.a_star) for u in random_bumps(q.grid, rng, count))
