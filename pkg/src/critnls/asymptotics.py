"""Blow-up laws from sweep data as a approaches a*.

    eps_a ~ (a* - a)^(1/(l+2)) / lambda
    e(a)  ~ C ((a* - a)/a*)^(l/(l+2))
    mu_a eps_a^2 -> -beta^2
    eps^(N/2) u_a(eps x) -> beta^(N/2) Q(beta x) / ||Q||_2
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import UsageError
from .grid import Profile, interpolator

FIT_WINDOW = 0.9


@dataclass(frozen=True)
class FitReport:
    exponent: float
    prefactor: float
    target_exponent: float
    target_prefactor: float
    exponent_error: float
    prefactor_error: float
    samples: int
    residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def power_fit(x, y, target_exponent: float, target_prefactor: float) -> FitReport:
    """Least-squares fit of log y = log c + p log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise UsageError(f"need at least 3 points for a rate fit, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise UsageError("rate fit needs positive data")
    X = np.column_stack((np.ones_like(x), np.log(x)))
    coef, res, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
    logc, p = coef
    fitted = X @ coef
    rms = float(np.sqrt(np.mean((fitted - np.log(y)) ** 2)))
    c = math.exp(logc)
    return FitReport(float(p), c, target_exponent, target_prefactor,
                     abs(p - target_exponent) / abs(target_exponent),
                     abs(c - target_prefactor) / abs(target_prefactor), int(x.size), rms)


def _window(sweep, a_star):
    rows = [r for r in sweep if r.params.a >= FIT_WINDOW * a_star * (1 - 1e-12)]
    if any(r.params.a >= a_star for r in rows):
        raise UsageError("sweep contains couplings at or above a*")
    return rows


def fit_blowup_rate(sweep: Sequence, lam: float, a_star: float, l: float | None = None) -> FitReport:
    """eps_a against a* - a; targets exponent 1/(l+2) and prefactor 1/lambda."""
    rows = _window(sweep, a_star)
    if l is None:
        if not rows:
            raise UsageError("empty sweep")
        l = rows[0].pot.l
    d = [a_star - r.params.a for r in rows]
    return power_fit(d, [r.eps for r in rows], 1.0 / (l + 2.0), 1.0 / lam)


def fit_energy_rate(sweep: Sequence, constant: float, a_star: float, l: float | None = None) -> FitReport:
    """e(a) against (a* - a)/a*; targets exponent l/(l+2) and the two-term constant."""
    rows = _window(sweep, a_star)
    if l is None:
        if not rows:
            raise UsageError("empty sweep")
        l = rows[0].pot.l
    d = [(a_star - r.params.a) / a_star for r in rows]
    return power_fit(d, [r.energy for r in rows], l / (l + 2.0), constant)


def mu_limit_check(sweep: Sequence, beta2: float):
    """Rows (a, mu eps^2, |mu eps^2 + beta^2| / beta^2) and whether the deviation decreases."""
    if not len(sweep):
        raise UsageError("empty sweep")
    rows = []
    for r in sweep:
        prod = r.mu * r.eps**2
        rows.append({"a": r.params.a, "mu_eps2": prod, "deviation": abs(prod + beta2) / beta2})
    dev = [row["deviation"] for row in rows]
    monotone = all(y < x for x, y in zip(dev, dev[1:]))
    return rows, monotone


def rescaled_profile_distance(result, q):
    """(sup, H1) distance between eps^(N/2) u(eps r) and beta^(N/2) Q(beta r)/||Q||.

    Both are compared on the nodes of ``q.grid`` that map inside the
    minimizer's grid.
    """
    g_u = result.u.grid
    g_q = q.grid
    if g_u.N != g_q.N:
        raise UsageError("minimizer and limit profile live in different dimensions")
    eps = result.eps
    N = g_q.N
    r = g_q.r
    inside = eps * r <= g_u.R
    if r[inside].max(initial=0.0) < 0.5 * g_q.R:
        raise UsageError(f"scale eps = {eps:.3g} leaves too little overlap with the minimizer grid")
    ev = interpolator(result.u)
    c = eps ** (N / 2.0)
    w = c * ev(eps * r)
    dw = c * eps * ev(eps * r, 1)
    beta = q.params.beta
    Q, dQ = q.evaluate(beta * r, with_derivative=True)
    lim = beta ** (N / 2.0) * Q / q.norm
    dlim = beta ** (N / 2.0 + 1.0) * dQ / q.norm
    diff = np.where(inside, w - lim, 0.0)
    ddiff = np.where(inside, dw - dlim, 0.0)
    sup = float(np.max(np.abs(diff)))
    h1 = math.sqrt(g_q.area * float(np.dot(g_q.w, diff**2 + ddiff**2)))
    return sup, h1
