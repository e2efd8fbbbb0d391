"""Positive radial solution Q of -Q'' - (N-1)/r Q' + Q = r^-b Q^(1+2 beta^2).

Q(0) is bracketed and bisected by shooting from a series start near the
origin.  Double precision limits a single outward shot to r ~ 15-18, after
which the growing mode e^r takes over, so the bisected central value is
polished by matching the outward solution to an inward one started on the
decaying linear mode r^(1-N/2) K_nu(r) at r = R.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import root
from scipy.special import kv, kvp

from .errors import NonConvergenceError, NumericalError, UsageError, VerificationError
from .grid import Profile, RadialGrid, build_grid, derivative, gradient_sq_norm, integrate
from .params import Params

log = logging.getLogger(__name__)

CROSSED = "crossed_zero"
TURNED = "turned_up"
DECAYED = "decayed"

R0_DEFAULT = 1e-5
DECAY_FLOOR = 1e-7
# |Q'/Q| above this at the floor means the shot is not in the decaying tail
STEEP_RATE = 3.0


@dataclass(frozen=True)
class ShotOutcome:
    classification: str
    radius: float
    q: float
    dq: float


def series_start(params: Params, q0: float, r):
    """Q and Q' from the small-r expansion.

    Q ~ q0 + A r^(2-b) + B r^2 + C r^(4-2b) + D r^(4-b), obtained by
    matching powers in the radial equation.
    """
    N, b, p = params.N, params.b, params.p
    r = np.asarray(r, dtype=float)
    A = -q0**p / ((2 - b) * (N - b))
    B = q0 / (2 * N)
    C = -p * q0 ** (p - 1) * A / ((4 - 2 * b) * (2 - 2 * b + N))
    D = (A - p * q0 ** (p - 1) * B) / ((4 - b) * (2 - b + N))
    q = q0 + A * r ** (2 - b) + B * r**2 + C * r ** (4 - 2 * b) + D * r ** (4 - b)
    dq = (A * (2 - b) * r ** (1 - b) + 2 * B * r + C * (4 - 2 * b) * r ** (3 - 2 * b)
          + D * (4 - b) * r ** (3 - b))
    return q, dq


def _rhs(params: Params):
    N, b, p = params.N, params.b, params.p

    def f(r, y):
        q, dq = y
        return [dq, -(N - 1) / r * dq + q - r ** (-b) * abs(q) ** (p - 1) * q]

    return f


def _integrate(params, y0, span, rtol, events=None, dense=False):
    sol = solve_ivp(_rhs(params), span, y0, method="DOP853", rtol=rtol,
                    atol=1e-30, events=events, dense_output=dense)
    if sol.status == -1:
        raise NumericalError(f"radial integrator failed: {sol.message}",
                             state={"r": float(sol.t[-1]), "y": sol.y[:, -1].tolist()})
    return sol


def shoot(params: Params, q0: float, rtol: float = 1e-12, R: float = 25.0,
          r0: float = R0_DEFAULT, floor: Optional[float] = DECAY_FLOOR) -> ShotOutcome:
    """Integrate outward from the series start and classify the trajectory.

    ``floor`` is the decay floor: a trajectory that falls below it while still
    decreasing is reported as decayed.  With ``floor=None`` the shot runs on
    until it crosses zero or turns up (used by the bisection).
    """
    if not q0 > 0:
        raise UsageError(f"central value must be positive, got {q0}")

    def crossed(r, y):
        return y[0]
    crossed.terminal, crossed.direction = True, -1

    def turned(r, y):
        return y[1]
    turned.terminal, turned.direction = True, 1

    events = [crossed, turned]
    if floor is not None:
        def decayed(r, y):
            return y[0] - floor
        decayed.terminal, decayed.direction = True, -1
        events.append(decayed)

    y0 = [float(v) for v in series_start(params, q0, r0)]
    sol = _integrate(params, y0, (r0, R), rtol, events=events)
    q, dq = sol.y[:, -1]
    r_end = float(sol.t[-1])
    if sol.t_events[0].size:
        return ShotOutcome(CROSSED, r_end, float(q), float(dq))
    if sol.t_events[1].size:
        return ShotOutcome(TURNED, r_end, float(q), float(dq))
    if (floor is not None and sol.t_events[2].size) or (abs(q) < (floor or 0.0) and dq < 0):
        if dq < -STEEP_RATE * abs(q):
            # plunging through the floor far faster than the e^-r tail: a crossing
            return shoot(params, q0, rtol, R, r0, floor=None)
        return ShotOutcome(DECAYED, r_end, float(q), float(dq))
    # reached R above the floor: the shot has not resolved yet
    return ShotOutcome(TURNED if dq >= 0 else CROSSED, r_end, float(q), float(dq))


def _bracket(params, rtol, R, q_range):
    lo_lim, hi_lim = q_range
    q = 1.0
    first = shoot(params, q, rtol, R, floor=None).classification
    if first == TURNED:
        lo = q
        while True:
            q *= 2.0
            if q > hi_lim:
                raise NumericalError(f"no crossing bracket below Q0 = {hi_lim}")
            if shoot(params, q, rtol, R, floor=None).classification == CROSSED:
                return lo, q
            lo = q
    hi = q
    while True:
        q *= 0.5
        if q < lo_lim:
            raise NumericalError(f"no turning bracket above Q0 = {lo_lim}")
        if shoot(params, q, rtol, R, floor=None).classification == TURNED:
            return q, hi
        hi = q


def bisect_central_value(params: Params, tol: float = 1e-12, rtol: float = 1e-12,
                         R: float = 25.0, q_range=(1e-6, 1e6)):
    """Bisection on Q(0) between a turned_up and a crossed_zero shot.

    Returns the final bracket (lo, hi) with hi - lo < tol * hi.
    """
    lo, hi = _bracket(params, rtol, R, q_range)
    while hi - lo >= tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if shoot(params, mid, rtol, R, floor=None).classification == TURNED:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _tail_mode(N, r):
    """Decaying solution k(r) = r^(1-N/2) K_nu(r) of the linearized equation and k'."""
    nu = abs(N / 2.0 - 1.0)
    e = 1.0 - N / 2.0
    k = r**e * kv(nu, r)
    dk = e * r ** (e - 1.0) * kv(nu, r) + r**e * kvp(nu, r)
    return k, dk


class _Matched:
    """Outward and inward solutions glued at r_match."""

    def __init__(self, params, q0, amp, r0, r_match, R, rtol):
        self.params, self.q0, self.amp = params, q0, amp
        self.r0, self.r_match, self.R = r0, r_match, R
        y0 = [float(v) for v in series_start(params, q0, r0)]
        self.out = _integrate(params, y0, (r0, r_match), rtol, dense=True)
        k, dk = _tail_mode(params.N, R)
        self.inn = _integrate(params, [amp * k, amp * dk], (R, r_match), rtol, dense=True)

    def mismatch(self):
        a = self.out.y[:, -1]
        b = self.inn.y[:, -1]
        return (a - b) / abs(a[0])

    def sample(self, r):
        r = np.asarray(r, dtype=float)
        q = np.empty_like(r)
        dq = np.empty_like(r)
        core = r < self.r0
        mid = (~core) & (r <= self.r_match)
        far = r > self.r_match
        if core.any():
            q[core], dq[core] = series_start(self.params, self.q0, r[core])
        if mid.any():
            q[mid], dq[mid] = self.out.sol(r[mid])
        if far.any():
            q[far], dq[far] = self.inn.sol(r[far])
        return q, dq


def _polish(params, q0, r0, R, rtol, tol):
    r_match = min(4.0, 0.5 * R)
    # amplitude guess from an outward shot up to the matching radius
    y0 = [float(v) for v in series_start(params, q0, r0)]
    q_m = _integrate(params, y0, (r0, r_match), rtol).y[0, -1]
    amp0 = q_m / _tail_mode(params.N, r_match)[0]

    def F(x):
        return _Matched(params, x[0] * q0, x[1] * amp0, r0, r_match, R, rtol).mismatch()

    sol = root(F, [1.0, 1.0], method="hybr", options={"xtol": 1e-15})
    resid = np.max(np.abs(F(sol.x)))
    if not np.all(np.isfinite(sol.x)) or resid > max(tol, 1e-10) * 1e3:
        raise NonConvergenceError(f"matching did not converge (mismatch {resid:.3g})",
                                  state={"q0": q0})
    return _Matched(params, sol.x[0] * q0, sol.x[1] * amp0, r0, r_match, R, rtol), resid


@dataclass(frozen=True)
class IdentityReport:
    kinetic: float
    mass_over_beta2: float
    interaction_over: float
    dev_kin_mass: float
    dev_kin_int: float
    dev_mass_int: float

    @property
    def max_deviation(self) -> float:
        return max(self.dev_kin_mass, self.dev_kin_int, self.dev_mass_int)

    def ok(self, tol: float = 1e-6) -> bool:
        return self.max_deviation < tol


@dataclass(frozen=True, eq=False)
class QSolution:
    """Converged limit profile with its integrals on a given grid."""

    params: Params
    grid: RadialGrid
    profile: Profile
    q0: float
    tail_amplitude: float
    mass: float
    kinetic: float
    interaction: float
    a_star: float
    decay_rate: float
    r0: float = R0_DEFAULT
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def beta2(self) -> float:
        return self.params.beta2

    @property
    def norm(self) -> float:
        return math.sqrt(self.mass)

    def _spline(self):
        sp = getattr(self, "_sp", None)
        if sp is None:
            g = self.grid
            sp = CubicHermiteSpline(g.s, self.profile.values, self.profile.deriv * g.drds)
            object.__setattr__(self, "_sp", sp)
        return sp

    def evaluate(self, r, with_derivative: bool = False):
        """Q (and Q') at arbitrary radii.

        Series below the first node, cubic Hermite interpolation between
        nodes, and the decaying linear mode beyond R.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise UsageError("radii must be finite and non-negative")
        g = self.grid
        q = np.empty_like(r)
        dq = np.empty_like(r)
        lo = r < g.r[0]
        hi = r > g.r[-1]
        mid = ~(lo | hi)
        if lo.any():
            q[lo], dq[lo] = series_start(self.params, self.q0, r[lo])
        if mid.any():
            s = (r[mid] / g.R) ** (1.0 / g.clustering)
            sp = self._spline()
            q[mid] = sp(s)
            dsdr = s / (g.clustering * r[mid])
            dq[mid] = sp(s, 1) * dsdr
        if hi.any():
            # continue from the last node along the decaying mode
            k_last, _ = _tail_mode(self.params.N, g.r[-1])
            k, dk = _tail_mode(self.params.N, r[hi])
            scale = self.profile.values[-1] / k_last
            with np.errstate(under="ignore"):
                q[hi], dq[hi] = scale * k, scale * dk
        if with_derivative:
            return q, dq
        return q

    def normalized_limit(self, r):
        """beta^(N/2) Q(beta r) / ||Q||_2, the blow-up profile at unit scale."""
        beta, N = self.params.beta, self.params.N
        return beta ** (N / 2.0) * self.evaluate(beta * np.asarray(r, dtype=float)) / self.norm

    def scaled_profile(self, grid: RadialGrid, m: float = 1.0, n: float = 1.0) -> Profile:
        """m n^(N/2) Q(n r) sampled on ``grid`` with its exact derivative."""
        N = self.params.N
        q, dq = self.evaluate(n * grid.r, with_derivative=True)
        c = m * n ** (N / 2.0)
        return Profile(grid, c * q, c * n * dq)

    def identities(self) -> IdentityReport:
        return verify_q_identities(self)

    def to_dict(self) -> dict:
        return {
            "params": {"N": self.params.N, "b": self.params.b},
            "grid": self.grid.descriptor(),
            "q0": self.q0,
            "tail_amplitude": self.tail_amplitude,
            "mass": self.mass,
            "kinetic": self.kinetic,
            "interaction": self.interaction,
            "a_star": self.a_star,
            "decay_rate": self.decay_rate,
            "r0": self.r0,
            "values": self.profile.values.tolist(),
            "derivs": self.profile.deriv.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QSolution":
        params = Params(d["params"]["N"], d["params"]["b"])
        g = d["grid"]
        grid = build_grid(g["N"], g["b"], g["R"], g["M"], g["clustering"])
        prof = Profile(grid, np.array(d["values"]), np.array(d["derivs"]))
        return cls(params, grid, prof, d["q0"], d["tail_amplitude"], d["mass"],
                   d["kinetic"], d["interaction"], d["a_star"], d["decay_rate"],
                   d.get("r0", R0_DEFAULT), d.get("meta", {}))


def _rel(x, y):
    return abs(x - y) / max(abs(x), abs(y))


def q_integrals(params: Params, grid: RadialGrid, prof: Profile):
    """(mass, kinetic, interaction) of a profile over R^N."""
    mass = integrate(grid, Profile(grid, prof.values**2))
    kinetic = gradient_sq_norm(grid, prof)
    inter = integrate(grid, Profile(grid, np.abs(prof.values) ** (params.p + 1)), "singular")
    return mass, kinetic, inter


def verify_q_identities(q: QSolution) -> IdentityReport:
    """Pairwise relative deviations between
    int |grad Q|^2, (1/beta^2) int Q^2 and (1/(1+beta^2)) int |x|^-b Q^(2+2beta^2).
    """
    b2 = q.params.beta2
    mass, kin, inter = q_integrals(q.params, q.grid, q.profile)
    m = mass / b2
    i = inter / (1.0 + b2)
    return IdentityReport(kin, m, i, _rel(kin, m), _rel(kin, i), _rel(m, i))


def decay_fit(q, window=(0.5, 0.75)) -> float:
    """Exponential decay rate of a profile from the window [R/2, 3R/4].

    Least-squares slope of log(r^((N-1)/2) Q(r)); the algebraic factor is
    the one carried by the decaying mode of the linearized equation, so for
    Q the expected rate is -1 in every dimension.  Accepts a QSolution or a
    Profile.
    """
    prof = q.profile if isinstance(q, QSolution) else q
    grid = prof.grid
    r = grid.r
    sel = (r >= window[0] * grid.R) & (r <= window[1] * grid.R)
    vals = prof.values[sel]
    if sel.sum() < 3:
        raise UsageError("decay window holds fewer than 3 nodes")
    if np.any(vals <= 1e-300) or not np.all(np.isfinite(vals)):
        raise NumericalError("profile below floating-point floor in the decay window")
    y = np.log(vals) + 0.5 * (grid.N - 1) * np.log(r[sel])
    slope, _ = np.polyfit(r[sel], y, 1)
    return float(slope)


def q_residual(q: QSolution, start_node: int = 2) -> float:
    """Plain-weighted L2 norm of the limit-equation residual for r >= r_3.

    Q'' is obtained by differencing the exact Q' samples.
    """
    g = q.grid
    Q, dQ = q.profile.values, q.profile.deriv
    d2 = derivative(g, Profile(g, dQ))
    p, b, N = q.params.p, q.params.b, g.N
    res = d2 + (N - 1) / g.r * dQ - Q + g.r ** (-b) * np.abs(Q) ** (p - 1) * Q
    sl = slice(start_node, None)
    return math.sqrt(g.area * float(np.dot(g.w[sl], res[sl] ** 2)))


def solve_q(params: Params, grid: RadialGrid, tol: float = 1e-12, rtol: float = 1e-12,
            q_range=(1e-6, 1e6), check_tol: Optional[float] = 1e-4) -> QSolution:
    """Ground state Q on ``grid``.

    Bisection on Q(0) until the bracket is narrower than ``tol`` (relative),
    then a two-sided matching polish.  With ``check_tol`` set, a violation of
    the identity triple beyond it raises VerificationError.
    """
    if grid.N != params.N or grid.b != params.b:
        raise UsageError("grid and params disagree on (N, b)")
    lo, hi = bisect_central_value(params, tol, rtol, grid.R, q_range)
    q_bis = 0.5 * (lo + hi)
    r0 = R0_DEFAULT
    matched, resid = _polish(params, q_bis, r0, grid.R, rtol, tol)
    q, dq = matched.sample(grid.r)
    if np.any(q <= 0):
        raise NumericalError("limit profile is not positive on the grid")
    prof = Profile(grid, q, dq)
    mass, kin, inter = q_integrals(params, grid, prof)
    a_star = mass**params.beta2
    sol = QSolution(params, grid, prof, float(matched.q0), float(matched.amp),
                    mass, kin, inter, a_star, decay_fit(prof), r0,
                    meta={"bracket": [lo, hi], "match_mismatch": float(resid)})
    log.debug("Q(0)=%.15g a*=%.15g", sol.q0, a_star)
    if check_tol is not None:
        rep = verify_q_identities(sol)
        if not rep.ok(check_tol):
            raise VerificationError(f"Q identities off by {rep.max_deviation:.3g}", report=rep)
    return sol
