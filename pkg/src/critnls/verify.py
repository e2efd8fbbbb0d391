"""Acceptance suite: twelve numbered checks at the default desk-scale setup.

Each check returns a CheckResult with the measured numbers and a pass flag
computed against a fixed threshold.  ``quick`` lowers the node counts so the
suite finishes in well under a minute; thresholds are unchanged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .diagnostics import (
    build_linearized,
    kernel_probe,
    dilation_identity_check,
    pohozaev_balance,
    pohozaev_scan,
    standard_seeds,
    uniqueness_probe,
)
from .energy import (
    fit_scaling_coefficients,
    energy_constant,
    gn_bump_max,
    gn_family,
    lambda_const,
    predicted_tau2_coefficient,
    random_bumps,
    scaling_probe,
)
from .asymptotics import fit_blowup_rate, fit_energy_rate, mu_limit_check, rescaled_profile_distance
from .grid import Profile, build_grid, integrate
from .limit_profile import solve_q
from .minimizer import continuation_sweep, minimize
from .params import Params, PotentialSpec

SWEEP_FRACTIONS = (0.9, 0.95, 0.98, 0.99, 0.995)
PROBE_TAUS = (5.0, 10.0, 20.0)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.name}: {self.detail}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "values": self.values, "detail": self.detail, "seconds": self.seconds}


@dataclass
class Setup:
    """Resolution and shared state for one run of the suite."""

    M: int = 4096
    R: float = 25.0
    M_unique: int = 4096
    M_pair: tuple = (1024, 2048)
    seed: int = 0
    _q: dict = field(default_factory=dict, repr=False)
    _sweep: Optional[list] = field(default=None, repr=False)
    q_seconds: dict = field(default_factory=dict, repr=False)

    @classmethod
    def quick(cls, seed: int = 0) -> "Setup":
        return cls(M=1024, M_unique=1024, M_pair=(1024, 2048), seed=seed)

    def grid(self, N, b, M=None, R=None):
        return build_grid(N, b, R or self.R, M or self.M, 2.0)

    def q(self, N=1, b=0.5, M=None):
        key = (N, b, M or self.M)
        if key not in self._q:
            t = time.perf_counter()
            self._q[key] = solve_q(Params(N, b), self.grid(N, b, M))
            self.q_seconds[key] = time.perf_counter() - t
        return self._q[key]

    @property
    def pot(self) -> PotentialSpec:
        return PotentialSpec(2.0, 1.0)

    def sweep(self):
        if self._sweep is None:
            q = self.q()
            self._sweep = continuation_sweep(Params(1, 0.5), self.pot, q.grid,
                                             [f * q.a_star for f in SWEEP_FRACTIONS], q=q)
        return self._sweep


def _rel(x, y):
    return abs(x - y) / abs(y)


def check_q_identities(s: Setup) -> CheckResult:
    q = s.q()
    dev = q.identities().max_deviation
    secs = s.q_seconds[(1, 0.5, s.M)]
    ok = dev < 1e-6 and secs < 5.0
    return CheckResult(1, "Q identities", ok, {"max_deviation": dev, "solve_seconds": secs},
                       f"max deviation {dev:.2e} (< 1e-6), solve {secs:.2f} s (< 5 s)")


def check_gn(s: Setup) -> CheckResult:
    q = s.q()
    rows = gn_family(q)
    worst = max(abs(r["ratio"] - 1.0) for r in rows)
    bump = gn_bump_max(q, np.random.default_rng(s.seed), 100)
    ok = worst < 1e-6 and bump <= 1.0 + 1e-8
    return CheckResult(2, "GN sharpness", ok, {"family": rows, "bump_max": bump},
                       f"|ratio-1| max {worst:.2e} (< 1e-6), bump max {bump:.6f} (<= 1+1e-8)")


def check_harmonic(s: Setup) -> CheckResult:
    g = s.grid(1, 0.5)
    res = minimize(Params(1, 0.5, 0.0), s.pot, g)
    de, dm = abs(res.energy - 1.0), abs(res.mu - 1.0)
    ok = de < 1e-4 and dm < 1e-4
    return CheckResult(3, "harmonic baseline", ok, {"energy": res.energy, "mu": res.mu},
                       f"|e-1| {de:.2e}, |mu-1| {dm:.2e} (< 1e-4)")


def check_nonexistence(s: Setup) -> CheckResult:
    q = s.q()
    P = Params(1, 0.5, 1.05 * q.a_star)
    rows = scaling_probe(P, s.pot, q, PROBE_TAUS)
    c2, _ = fit_scaling_coefficients(rows, s.pot.l)
    pred = predicted_tau2_coefficient(P, q)
    err = _rel(c2, pred)
    E = [r["energy"] for r in rows]
    dec = all(y < x for x, y in zip(E, E[1:]))
    ok = err < 0.05 and dec
    return CheckResult(4, "nonexistence mechanism", ok,
                       {"c2": c2, "predicted": pred, "energies": E, "decreasing": dec},
                       f"tau^2 coefficient {c2:.6g} vs {pred:.6g} (rel {err:.1e}, need < 5%), "
                       f"E decreasing over {list(PROBE_TAUS)}: {dec}")


def check_blowup_rate(s: Setup) -> CheckResult:
    q = s.q()
    fit = fit_blowup_rate(s.sweep(), lambda_const(Params(1, 0.5), s.pot, q), q.a_star)
    ok = fit.exponent_error < 0.05 and fit.prefactor_error < 0.10
    return CheckResult(5, "blow-up rate", ok, fit.to_dict(),
                       f"exponent {fit.exponent:.5f} vs {fit.target_exponent:.5f} "
                       f"(rel {fit.exponent_error:.2%}, need < 5%), prefactor {fit.prefactor:.5f} vs "
                       f"{fit.target_prefactor:.5f} (rel {fit.prefactor_error:.2%}, need < 10%)")


def check_energy_rate(s: Setup) -> CheckResult:
    q = s.q()
    fit = fit_energy_rate(s.sweep(), energy_constant(Params(1, 0.5), s.pot, q), q.a_star)
    ok = fit.exponent_error < 0.05 and fit.prefactor_error < 0.10
    return CheckResult(6, "energy rate", ok, fit.to_dict(),
                       f"exponent {fit.exponent:.5f} (rel {fit.exponent_error:.2%}, need < 5%), "
                       f"constant {fit.prefactor:.5f} vs {fit.target_prefactor:.5f} "
                       f"(rel {fit.prefactor_error:.2%}, need < 10%)")


def check_multiplier(s: Setup) -> CheckResult:
    rows, monotone = mu_limit_check(s.sweep(), Params(1, 0.5).beta2)
    last = rows[-1]["deviation"]
    ok = last < 0.05 and monotone
    return CheckResult(7, "multiplier limit", ok, {"rows": rows, "monotone": monotone},
                       f"deviation at 0.995 a* {last:.2e} (< 5%), monotone: {monotone}")


def check_profile(s: Setup) -> CheckResult:
    q = s.q()
    sups = [rescaled_profile_distance(r, q)[0] for r in s.sweep()]
    dec = all(y < x for x, y in zip(sups, sups[1:]))
    ok = sups[-1] < 0.02 and dec
    return CheckResult(8, "profile convergence", ok, {"sup": sups, "decreasing": dec},
                       f"sup distance at 0.995 a* {sups[-1]:.2e} (< 0.02), decreasing: {dec}")


def check_dilation_identity(s: Setup) -> CheckResult:
    vals = {}
    for N, b in ((1, 0.5), (3, 1.0)):
        vals[f"{N},{b}"] = dilation_identity_check(s.q(N, b))
    # refinement order on coarse grids, where rounding does not interfere
    coarse = [dilation_identity_check(solve_q(Params(1, 0.5), s.grid(1, 0.5, M))) for M in (512, 1024)]
    order = math.log2(coarse[0] / coarse[1])
    ok = max(vals.values()) < 1e-4 and order > 3.5
    return CheckResult(9, "dilation identity", ok, {"residuals": vals, "refinement": coarse,
                                                    "order": order},
                       f"residuals {', '.join(f'{v:.1e}' for v in vals.values())} (< 1e-4), "
                       f"observed order {order:.2f} (fourth-order stencil)")


def check_pohozaev(s: Setup) -> CheckResult:
    sweep = s.sweep()
    res = sweep[SWEEP_FRACTIONS.index(0.95)]
    rep = pohozaev_balance(res, 10.0 * res.eps)
    g = res.grid
    detector = []
    for b in random_bumps(g, np.random.default_rng(s.seed), 5):
        n = math.sqrt(integrate(g, Profile(g, b.values**2)))
        u = Profile(g, b.values / n, b.deriv / n)
        detector.append(pohozaev_scan(res.params, res.pot, u, res.eps)[0])
    ok = rep.mismatch < 1e-3 and min(detector) > 0.1
    return CheckResult(10, "Pohozaev balance", ok,
                       {"mismatch": rep.mismatch, "delta": rep.delta, "detector": detector},
                       f"minimizer mismatch {rep.mismatch:.2e} at delta = 10 eps (< 1e-3), "
                       f"random profiles min {min(detector):.3f} (> 0.1)")


def check_uniqueness(s: Setup) -> CheckResult:
    g = s.grid(3, 1.0, s.M_unique)
    q = s.q(3, 1.0, s.M_unique)
    P = Params(3, 1.0, 0.99 * q.a_star)
    rep = uniqueness_probe(P, s.pot, g, standard_seeds(g, q, np.random.default_rng(s.seed)), q=q)
    ok = len(rep.converged) == 5 and rep.max_distance < 1e-6
    return CheckResult(11, "uniqueness probe", ok, rep.to_dict(),
                       f"{len(rep.converged)}/5 seeds converged, max sup distance "
                       f"{rep.max_distance:.2e} (< 1e-6)")


def check_kernel(s: Setup) -> CheckResult:
    eig = [kernel_probe(build_linearized(s.q(3, 1.0, M))) for M in s.M_pair]
    info = {f"M={M}": e for M, e in zip(s.M_pair, eig)}
    info["N=1 (reported only)"] = kernel_probe(build_linearized(s.q(1, 0.5, s.M_pair[0])))
    stable = _rel(eig[0], eig[1]) < 1e-3
    ok = min(abs(e) for e in eig) > 0.05 and stable
    return CheckResult(12, "non-degeneracy probe", ok, info,
                       f"smallest |eig| {eig[0]:.6f} / {eig[1]:.6f} (> 0.05), "
                       f"3-digit stable: {stable}")


CHECKS: tuple[Callable[[Setup], CheckResult], ...] = (
    check_q_identities, check_gn, check_harmonic, check_nonexistence, check_blowup_rate,
    check_energy_rate, check_multiplier, check_profile, check_dilation_identity, check_pohozaev,
    check_uniqueness, check_kernel,
)


def run_suite(quick: bool = False, seed: int = 0, only=None, echo=None) -> list:
    s = Setup.quick(seed) if quick else Setup(seed=seed)
    out = []
    for k, check in enumerate(CHECKS, start=1):
        if only and k not in only:
            continue
        t = time.perf_counter()
        res = check(s)
        res.seconds = time.perf_counter() - t
        out.append(res)
        if echo:
            echo(res.line())
    return out
