import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critnls.energy import (
    GN_FAMILY,
    energy,
    energy_constant,
    fit_scaling_coefficients,
    g_alpha,
    gn_bump_max,
    gn_family,
    gn_ratio,
    lambda_const,
    minimize_g,
    predicted_tau2_coefficient,
    probe_profile,
    scaling_probe,
    trap_moment,
    two_term_min,
)
from critnls.errors import DomainError, UsageError
from critnls.grid import Profile, build_grid, integrate
from critnls.params import Params, PotentialSpec


def unit_gaussian(grid):
    r = grid.r
    vals = math.pi ** -0.25 * np.exp(-0.5 * r**2)
    return Profile(grid, vals, -r * vals)


@pytest.fixture(scope="module")
def g1():
    return build_grid(1, 0.5, 25.0, 4096)


def test_gaussian_kinetic_only(g1):
    e = energy(Params(1, 0.5), PotentialSpec(2.0, 0.0), g1, unit_gaussian(g1))
    assert e.total == pytest.approx(0.5, abs=1e-8)
    assert e.mass == pytest.approx(1.0, abs=1e-10)
    assert e.trap == 0.0


def test_gaussian_harmonic(g1, harmonic):
    e = energy(Params(1, 0.5), harmonic, g1, unit_gaussian(g1))
    assert e.total == pytest.approx(1.0, abs=1e-8)
    assert e.total == e.kinetic + e.trap - e.interaction


def test_normalized_q_at_threshold_has_zero_energy(q1, q3):
    for q in (q1, q3):
        g = q.grid
        n = q.norm
        u = Profile(g, q.profile.values / n, q.profile.deriv / n)
        e = energy(Params(q.params.N, q.params.b, q.a_star), PotentialSpec(2.0, 0.0), g, u)
        assert abs(e.total) < 1e-6


def test_energy_no_normalization(g1, harmonic):
    u = unit_gaussian(g1)
    e = energy(Params(1, 0.5), harmonic, g1, Profile(g1, 2 * u.values, 2 * u.deriv))
    assert e.mass == pytest.approx(4.0, rel=1e-10)


def test_gn_family_is_sharp(q1, q3):
    for q in (q1, q3):
        for row in gn_family(q):
            assert row["ratio"] == pytest.approx(1.0, abs=1e-6), row
    assert len(GN_FAMILY) >= 3


def test_gn_gaussian_strict(q1, g1):
    assert gn_ratio(q1.params, g1, unit_gaussian(g1), q1.a_star) < 1.0


def test_gn_random_bumps_bounded(q1):
    assert gn_bump_max(q1, np.random.default_rng(0), 100) <= 1.0 + 1e-8


def test_gn_zero_profile(q1, g1):
    with pytest.raises(UsageError):
        gn_ratio(q1.params, g1, Profile(g1, np.zeros(g1.M)), q1.a_star)


@settings(max_examples=20, deadline=None)
@given(m=st.floats(0.1, 10.0), n=st.floats(0.5, 2.0))
def test_gn_invariance(q1, m, n):
    g = build_grid(1, 0.5, 40.0, 4096)
    u = unit_gaussian(g)
    v = Profile(g, m * n**0.5 * np.exp(-0.5 * (n * g.r) ** 2) * math.pi**-0.25,
                -m * n**2.5 * g.r * np.exp(-0.5 * (n * g.r) ** 2) * math.pi**-0.25)
    base = gn_ratio(q1.params, g, u, q1.a_star)
    assert gn_ratio(q1.params, g, v, q1.a_star) == pytest.approx(base, abs=1e-8)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_l2_critical_scaling(q1, t):
    g = build_grid(1, 0.5, 40.0, 4096)
    P = Params(1, 0.5, 1.0)
    no_trap = PotentialSpec(2.0, 0.0)
    r = g.r
    base = Profile(g, np.exp(-0.5 * r**2), -r * np.exp(-0.5 * r**2))
    c = t**0.5
    scaled = Profile(g, c * np.exp(-0.5 * (t * r) ** 2), -c * t**2 * r * np.exp(-0.5 * (t * r) ** 2))
    e0, e1 = energy(P, no_trap, g, base), energy(P, no_trap, g, scaled)
    assert e1.kinetic == pytest.approx(t**2 * e0.kinetic, rel=1e-6)
    assert e1.interaction == pytest.approx(t**2 * e0.interaction, rel=1e-6)
    assert e1.mass == pytest.approx(e0.mass, rel=1e-8)


def test_energy_lower_bound(q1):
    rng = np.random.default_rng(5)
    g = q1.grid
    for frac in (0.3, 0.7, 0.95):
        P = Params(1, 0.5, frac * q1.a_star)
        for _ in range(5):
            w = rng.uniform(0.3, 3.0)
            vals = np.exp(-((g.r / w) ** 2))
            u = Profile(g, vals, -2 * g.r / w**2 * vals)
            n = math.sqrt(integrate(g, Profile(g, vals**2)))
            u = Profile(g, u.values / n, u.deriv / n)
            e = energy(P, PotentialSpec(2.0, 0.0), g, u)
            assert e.total >= (1 - frac) * e.kinetic - 1e-8


def test_probe_profiles_have_unit_mass(q1):
    g = build_grid(1, 0.5, 2.0, 4096)
    for tau in (1.0, 10.0):
        u = probe_profile(q1, g, tau)
        assert integrate(g, Profile(g, u.values**2)) == pytest.approx(1.0, rel=1e-12)


def test_supercritical_probe_decreases(q1, harmonic):
    P = Params(1, 0.5, 1.05 * q1.a_star)
    rows = scaling_probe(P, harmonic, q1, (5.0, 10.0, 20.0))
    E = [r["energy"] for r in rows]
    assert E[0] > E[1] > E[2]
    c2, _ = fit_scaling_coefficients(rows, 2.0)
    pred = predicted_tau2_coefficient(P, q1)
    assert pred < 0
    assert c2 == pytest.approx(pred, rel=0.05)


def test_threshold_probe_tail(q1, harmonic):
    P = Params(1, 0.5, q1.a_star)
    rows = scaling_probe(P, harmonic, q1, (5.0, 10.0, 20.0, 40.0))
    E = np.array([r["energy"] for r in rows])
    assert np.all(np.diff(E) < 0) and np.all(E > 0)
    # trap part of E(u_tau) ~ B tau^-2
    tau = np.array([r["tau"] for r in rows])
    assert E[-1] * tau[-1] ** 2 == pytest.approx(trap_moment(harmonic, q1), rel=0.05)


def test_subcritical_probe_positive(q1, harmonic):
    rows = scaling_probe(Params(1, 0.5, 0.5 * q1.a_star), harmonic, q1, (0.5, 1.0, 5.0, 20.0))
    assert all(r["energy"] > 0 for r in rows)


def test_probe_rejects_bad_tau(q1, harmonic):
    with pytest.raises(UsageError):
        scaling_probe(Params(1, 0.5, 1.0), harmonic, q1, (0.0,))


def test_two_term_unit_case():
    assert two_term_min(1.0, 1.0, 2.0) == pytest.approx((1.0, 2.0), abs=1e-14)
    with pytest.raises(DomainError):
        two_term_min(0.0, 1.0, 2.0)


def test_g_minimum_against_scan(q1, harmonic):
    P = Params(1, 0.5, 0.9 * q1.a_star)
    alpha, gmin = minimize_g(P, harmonic, q1)
    grid = np.logspace(-3, 3, 100_000)
    vals = g_alpha(P, harmonic, q1, grid)
    assert vals.min() == pytest.approx(gmin, rel=1e-6)
    assert grid[np.argmin(vals)] == pytest.approx(alpha, rel=1e-3)


def test_g_minimizer_matches_lambda(q1, harmonic):
    for frac in (0.5, 0.9, 0.99):
        P = Params(1, 0.5, frac * q1.a_star)
        alpha, gmin = minimize_g(P, harmonic, q1)
        lam = lambda_const(P, harmonic, q1)
        gap = q1.a_star - P.a
        assert P.beta / alpha == pytest.approx(gap ** 0.25 / lam, rel=1e-10)
        d = gap / q1.a_star
        assert gmin == pytest.approx(energy_constant(P, harmonic, q1) * d**0.5, rel=1e-10)


def test_g_domain(q1, harmonic):
    with pytest.raises(DomainError):
        minimize_g(Params(1, 0.5, q1.a_star), harmonic, q1)


def test_lambda_homogeneous_in_kappa(q1):
    P = Params(1, 0.5)
    for l in (1.0, 2.0, 3.0):
        lam1 = lambda_const(P, PotentialSpec(l, 1.0), q1)
        lam2 = lambda_const(P, PotentialSpec(l, 2.0), q1)
        assert lam2 / lam1 == pytest.approx(2 ** (1 / (l + 2)), rel=1e-12)


def test_lambda_normalized_case(q1):
    P = Params(1, 0.5)
    B = trap_moment(PotentialSpec(2.0, 1.0), q1)
    kappa = 2 * P.beta2 / (q1.a_star * 2.0) / B
    assert lambda_const(P, PotentialSpec(2.0, kappa), q1) == pytest.approx(1.0, rel=1e-12)


def test_lambda_against_oracle(q1, oracle_q, harmonic):
    ref = oracle_q[(1, 0.5)]
    P = Params(1, 0.5)
    lam = (ref["a_star"] * 2 * ref["r2_moment"] / (2 * P.beta2 * ref["mass"])) ** 0.25
    assert lambda_const(P, harmonic, q1) == pytest.approx(lam, rel=1e-7)
