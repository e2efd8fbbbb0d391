"""Constrained minimization of the discrete energy on the unit-mass sphere.

The discrete energy is

    E(u) = |S| [u.K u + sum w V u^2 - a/(1+beta^2) sum v |u|^(2+2beta^2)]

with K the finite-volume stiffness matrix and w, v the plain and singular
weights.  Its critical points on |S| sum w u^2 = 1 solve

    K u + W V u - a v u^(1+2beta^2) = mu W u,

the discrete Euler-Lagrange equation; with this form the relation
mu = e(a) - a beta^2/(1+beta^2) int |x|^-b u^(2+2beta^2) holds exactly.

A normalized gradient flow (implicit in K and V, explicit in the
nonlinearity) brings the iterate into the basin, and a Newton iteration on
the bordered (u, mu) system finishes the solve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .energy import EnergyBreakdown, energy, minimize_g
from .errors import ConfigError, DomainError, NonConvergenceError, UsageError
from .grid import Profile, RadialGrid, interpolator, stiffness_apply, stiffness_banded
from .params import Params, PotentialSpec

log = logging.getLogger(__name__)

RADIAL_ASSUMPTION = "radially symmetric minimizers assumed (radial ansatz)"


@dataclass(frozen=True)
class FlowConfig:
    dt: float = 0.05
    max_iter: int = 20000
    tol: float = 1e-7
    dt_max: float = 1e3
    dt_min: float = 1e-12
    grow: float = 1.5
    newton_switch: float = 1e-2
    newton: bool = True
    energy_slack: float = 1e-12

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt", "time step must be positive")
        if not self.tol > 0:
            raise ConfigError("tol", "residual tolerance must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter", "must be a positive integer")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(eq=False)
class MinimizeResult:
    params: Params
    pot: PotentialSpec
    grid: RadialGrid
    u: Profile
    breakdown: EnergyBreakdown
    mu: float
    eps: float
    iterations: int
    residual: float
    flags: list = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.breakdown.total

    def to_dict(self, with_profile: bool = True) -> dict:
        d = {
            "params": self.params.to_dict(),
            "pot": self.pot.to_dict(),
            "grid": self.grid.descriptor(),
            "breakdown": self.breakdown.to_dict(),
            "mu": self.mu,
            "eps": self.eps,
            "iterations": self.iterations,
            "residual": self.residual,
            "flags": list(self.flags),
        }
        if with_profile:
            d["values"] = self.u.values.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MinimizeResult":
        from .grid import build_grid

        g = d["grid"]
        grid = build_grid(g["N"], g["b"], g["R"], g["M"], g["clustering"])
        params = Params(**d["params"])
        pot = PotentialSpec(**d["pot"])
        return cls(params, pot, grid, Profile(grid, np.array(d["values"])),
                   EnergyBreakdown(**d["breakdown"]), d["mu"], d["eps"],
                   d["iterations"], d["residual"], list(d.get("flags", [])))


def _mass(grid, u):
    return grid.area * float(np.dot(grid.w, u * u))


def normalize(grid: RadialGrid, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    m = _mass(grid, u)
    if not m > 0:
        raise UsageError("cannot normalize a zero profile")
    return u / math.sqrt(m)


def _nl(params, grid, u):
    """a v |u|^(p-1) u, the nonlinear force in weighted form."""
    return params.a * grid.v * np.abs(u) ** (params.p - 1) * u


def _el_vector(params, pot, grid, u, mu):
    Vw = grid.w * pot(grid.r)
    return stiffness_apply(grid, u) + Vw * u - _nl(params, grid, u) - mu * grid.w * u


def multiplier(params: Params, pot: PotentialSpec, grid: RadialGrid, u) -> float:
    """Rayleigh-quotient multiplier <u, Hu>/<u, u> of the Euler-Lagrange equation."""
    u = np.asarray(u, dtype=float)
    Hu = stiffness_apply(grid, u) + grid.w * pot(grid.r) * u - _nl(params, grid, u)
    return float(np.dot(u, Hu) / np.dot(grid.w, u * u))


def residual_norm(params, pot, grid, u, mu, start_node: int = 2) -> float:
    """Plain-weighted L2 norm over r >= r_3 of -Delta u + V u - mu u - a r^-b u^p."""
    res = _el_vector(params, pot, grid, u, mu) / grid.w
    sl = slice(start_node, None)
    return math.sqrt(grid.area * float(np.dot(grid.w[sl], res[sl] ** 2)))


def el_residual(result: MinimizeResult) -> float:
    return residual_norm(result.params, result.pot, result.grid, result.u.values, result.mu)


def flow_step(state: Profile, params: Params, pot: PotentialSpec, grid: RadialGrid,
              config: FlowConfig, dt: Optional[float] = None) -> Profile:
    """One semi-implicit normalized gradient-flow step.

    With mu the Rayleigh multiplier of u split as mu = mu+ - mu-,

        (W (1 + dt mu-) + dt (K + W V)) u* = W u (1 + dt mu+) + dt a v u^p,

    then u* is rescaled to unit mass.  The matrix is a symmetric M-matrix and
    the right side is positive, so a positive state stays positive, and any
    solution of the Euler-Lagrange equation is an exact fixed point.
    """
    dt = config.dt if dt is None else dt
    u = state.values
    mu = multiplier(params, pot, grid, u)
    ab = stiffness_banded(grid) * dt
    ab[1] += grid.w * (1.0 + dt * (pot(grid.r) + max(-mu, 0.0)))
    rhs = grid.w * u * (1.0 + dt * max(mu, 0.0)) + dt * _nl(params, grid, u)
    new = solve_banded((1, 1), _sym_to_full(ab), rhs)
    return Profile(grid, normalize(grid, new))


def _sym_to_full(ab):
    """Upper 2-row banded storage to the 3-row form solve_banded expects."""
    full = np.zeros((3, ab.shape[1]))
    full[0] = ab[0]
    full[1] = ab[1]
    full[2, :-1] = ab[0, 1:]
    return full


def rounding_floor(params, pot, grid, u, mu, start_node: int = 2) -> float:
    """Size of the residual that double-precision rounding of u alone produces.

    Each term of the Euler-Lagrange vector is bounded in absolute value and
    scaled by a few machine epsilons; second differences at the finest
    spacing make this floor grow quickly with the node count.
    """
    k = grid.stiffness
    au = np.abs(u)
    Ku = k * (np.append(au[1:], 0.0) + au)
    Ku[1:] += k[:-1] * (au[:-1] + au[1:])
    terms = (Ku + grid.w * pot(grid.r) * au + np.abs(_nl(params, grid, u))
             + abs(mu) * grid.w * au)
    noise = 4.0 * np.finfo(float).eps * terms / grid.w
    sl = slice(start_node, None)
    return math.sqrt(grid.area * float(np.dot(grid.w[sl], noise[sl] ** 2)))


def effective_tol(params, pot, grid, u, mu, tol):
    return max(tol, 10.0 * rounding_floor(params, pot, grid, u, mu))


def _newton(params, pot, grid, u, mu, tol, max_steps=40):
    """Newton on F(u, mu) = (EL vector, (mass - 1)/2).

    Runs until the update stalls at rounding level.  Overshoots to small
    negative values in the far tail are clipped.  Returns
    (u, mu, residual, steps) or None if the iteration does not settle.
    """
    M = grid.M
    k = grid.stiffness
    Vw = grid.w * pot(grid.r)
    main = k.copy()
    main[1:] += k[:-1]
    off = -k[:-1]
    A = grid.area
    res = residual_norm(params, pot, grid, u, mu)
    for it in range(max_steps):
        dnl = params.a * params.p * grid.v * np.abs(u) ** (params.p - 1)
        J11 = sparse.diags([off, main + Vw - dnl - mu * grid.w, off], [-1, 0, 1], format="csr")
        Wu = (grid.w * u)[:, None]
        J = sparse.bmat([[J11, sparse.csr_matrix(-Wu)],
                         [sparse.csr_matrix(A * Wu.T), None]], format="csc")
        F = np.append(_el_vector(params, pot, grid, u, mu), 0.5 * (_mass(grid, u) - 1.0))
        delta = spsolve(J, -F)
        if not np.all(np.isfinite(delta)):
            return None
        size = np.max(np.abs(delta[:M])) / np.max(np.abs(u))
        step = 1.0
        while True:
            u_new = np.maximum(u + step * delta[:M], 0.0)
            mu_new = mu + step * delta[M]
            r_new = residual_norm(params, pot, grid, u_new, mu_new)
            if size * step < 1e-6 or r_new < res:
                break
            step *= 0.5
            if step < 1e-3:
                return None
        u, mu, res = u_new, mu_new, r_new
        if size < 1e-12:
            break
    u = normalize(grid, u)
    mu = multiplier(params, pot, grid, u)
    res = residual_norm(params, pot, grid, u, mu)
    if res > effective_tol(params, pot, grid, u, mu, tol) or u[0] <= 0:
        return None
    return u, mu, res, it + 1


def rescale(profile: Profile, t: float, grid: Optional[RadialGrid] = None) -> Profile:
    """t^(N/2) u(t r) on ``grid`` (default: the profile's grid)."""
    grid = profile.grid if grid is None else grid
    vals = interpolator(profile)(t * grid.r)
    return Profile(grid, np.maximum(vals, 0.0) * t ** (grid.N / 2.0))


def gaussian(grid: RadialGrid, width: float = 1.0, center: float = 0.0) -> Profile:
    vals = np.exp(-0.5 * ((grid.r - center) / width) ** 2)
    return Profile(grid, normalize(grid, vals))


def default_initial(params: Params, pot: PotentialSpec, grid: RadialGrid, q=None) -> Profile:
    """Unit-mass Q rescaled to the scale predicted by minimizing g(alpha).

    Falls back to a unit Gaussian when a = 0, without trap, or without Q.
    """
    if q is None or params.a == 0.0 or not pot.trapping:
        return gaussian(grid)
    alpha, _ = minimize_g(params, pot, q)
    vals = q.evaluate(alpha * grid.r)
    return Profile(grid, normalize(grid, vals))


def _check_domain(params, a_star):
    if a_star is not None and params.a >= a_star:
        raise DomainError(
            f"a = {params.a:.10g} >= a* = {a_star:.10g}: no minimizer exists at or above "
            "the threshold (the energy is unbounded below for a > a*); use scaling_probe")


def minimize(params: Params, pot: PotentialSpec, grid: RadialGrid,
             init: Optional[Profile] = None, config: Optional[FlowConfig] = None,
             q=None, a_star: Optional[float] = None) -> MinimizeResult:
    """Minimizer of the discrete energy on the unit-mass sphere.

    ``a_star`` (or ``q``, whose threshold is used) guards the a >= a* case.
    """
    config = config or FlowConfig()
    if grid.N != params.N or grid.b != params.b:
        raise UsageError("grid and params disagree on (N, b)")
    if a_star is None and q is not None:
        a_star = q.a_star
    _check_domain(params, a_star)
    flags = [RADIAL_ASSUMPTION]
    if not pot.trapping:
        flags.append("no trap (kappa = 0): the truncation radius acts as a box")

    if init is None:
        init = default_initial(params, pot, grid, q)
    if not grid.same_as(init.grid):
        raise UsageError("initial profile lives on a different grid")
    u = np.abs(init.values)
    if not np.any(u > 0):
        raise UsageError("initial profile must be positive")
    u = normalize(grid, np.maximum(u, 1e-300))

    E = energy(params, pot, grid, Profile(grid, u)).total
    mu = multiplier(params, pot, grid, u)
    res = residual_norm(params, pot, grid, u, mu)
    dt = config.dt
    it = 0
    newton_tries = 0
    switch = config.newton_switch
    while res > effective_tol(params, pot, grid, u, mu, config.tol):
        if it >= config.max_iter:
            raise NonConvergenceError(f"flow did not converge in {it} iterations (residual {res:.3g})",
                                      state=Profile(grid, u))
        scale = max(1.0, abs(mu))
        if config.newton and res < switch * scale and newton_tries < 5:
            out = _newton(params, pot, grid, u, mu, config.tol)
            newton_tries += 1
            if out is not None:
                u, mu, res, steps = out
                it += steps
                break
            switch *= 0.1
            log.debug("newton declined at residual %.3g", res)
        new = flow_step(Profile(grid, u), params, pot, grid, config, dt).values
        E_new = energy(params, pot, grid, Profile(grid, new)).total
        it += 1
        if not (np.all(new >= 0) and E_new <= E + config.energy_slack * max(1.0, abs(E))):
            dt *= 0.5
            if dt < config.dt_min:
                raise NonConvergenceError("time step underflow", state=Profile(grid, u))
            continue
        u, E = new, E_new
        mu = multiplier(params, pot, grid, u)
        res = residual_norm(params, pot, grid, u, mu)
        dt = min(dt * config.grow, config.dt_max)

    u = normalize(grid, u)
    prof = Profile(grid, u)
    br = energy(params, pot, grid, prof)
    mu = multiplier(params, pot, grid, u)
    res = residual_norm(params, pot, grid, u, mu)
    return MinimizeResult(params, pot, grid, prof, br, mu, 1.0 / math.sqrt(br.kinetic),
                          it, res, flags)


class SweepResult(list):
    """Sweep entries in schedule order; ``error`` is set when the sweep aborted."""

    error: Optional[str] = None


def continuation_sweep(params: Params, pot: PotentialSpec, grid: RadialGrid,
                       a_schedule: Sequence[float], config: Optional[FlowConfig] = None,
                       q=None, a_star: Optional[float] = None,
                       init: Optional[Profile] = None) -> SweepResult:
    """Minimizers along an increasing coupling schedule, each warm-started from the last.

    The warm start is the previous minimizer dilated by the ratio of the
    predicted concentration scales when Q is available.
    """
    sched = [float(a) for a in a_schedule]
    if not sched or any(b <= a for a, b in zip(sched, sched[1:])):
        raise UsageError("coupling schedule must be non-empty and strictly increasing")
    if a_star is None and q is not None:
        a_star = q.a_star
    if a_star is not None and sched[-1] >= a_star:
        _check_domain(params.with_a(sched[-1]), a_star)
    out = SweepResult()
    prev = None
    for a in sched:
        p_a = params.with_a(a)
        start = init
        if prev is not None:
            start = prev.u
            if q is not None and pot.trapping and prev.params.a > 0:
                t = minimize_g(p_a, pot, q)[0] / minimize_g(prev.params, pot, q)[0]
                start = rescale(prev.u, t)
        try:
            res = minimize(p_a, pot, grid, start, config, q=q, a_star=a_star)
        except NonConvergenceError as exc:
            out.error = f"a = {a:.10g}: {exc}"
            log.warning("sweep aborted: %s", out.error)
            return out
        out.append(res)
        prev = res
    return out
