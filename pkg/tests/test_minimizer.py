import math

import numpy as np
import pytest

from critnls.energy import energy, minimize_g
from critnls.errors import ConfigError, DomainError, NonConvergenceError, UsageError
from critnls.grid import Profile, build_grid, integrate
from critnls.minimizer import (
    RADIAL_ASSUMPTION,
    FlowConfig,
    MinimizeResult,
    continuation_sweep,
    el_residual,
    flow_step,
    gaussian,
    minimize,
    multiplier,
    residual_norm,
)
from critnls.params import Params, PotentialSpec


@pytest.fixture(scope="module")
def g1():
    return build_grid(1, 0.5, 25.0, 4096)


@pytest.fixture(scope="module")
def harmonic_ground(g1, harmonic):
    return minimize(Params(1, 0.5, 0.0), harmonic, g1)


def mass(grid, u):
    return integrate(grid, Profile(grid, u.values**2))


def test_harmonic_ground_state(harmonic_ground):
    res = harmonic_ground
    assert res.energy == pytest.approx(1.0, abs=1e-4)
    assert res.mu == pytest.approx(1.0, abs=1e-4)
    assert RADIAL_ASSUMPTION in res.flags


def test_flow_decreases_energy(g1, harmonic):
    P = Params(1, 0.5, 0.0)
    u = gaussian(g1, 2.0)
    cfg = FlowConfig()
    E = [energy(P, harmonic, g1, u).total]
    for _ in range(30):
        u = flow_step(u, P, harmonic, g1, cfg, 0.1)
        assert mass(g1, u) == pytest.approx(1.0, abs=1e-12)
        E.append(energy(P, harmonic, g1, u).total)
    assert all(y < x for x, y in zip(E, E[1:]))
    assert E[-1] == pytest.approx(1.0, abs=1e-3)


def test_flow_fixed_point(sweep1):
    res = sweep1[0]
    out = flow_step(res.u, res.params, res.pot, res.grid, FlowConfig(), 0.05)
    assert np.max(np.abs(out.values - res.u.values)) < 1e-7


def test_minimizer_invariants(sweep1):
    for res in sweep1:
        g = res.grid
        assert mass(g, res.u) == pytest.approx(1.0, abs=1e-10)
        assert np.all(res.u.values > 0)
        lhs = res.mu
        nl = integrate(g, Profile(g, res.u.values ** (res.params.p + 1)), "singular")
        rhs = res.energy - res.params.a * res.params.beta2 / (1 + res.params.beta2) * nl
        assert lhs == pytest.approx(rhs, rel=1e-8)
        assert res.eps == pytest.approx(1 / math.sqrt(res.breakdown.kinetic), rel=1e-14)


def test_energy_below_test_function_bound(sweep1, q1, harmonic):
    res = sweep1[0]
    _, gmin = minimize_g(res.params, harmonic, q1)
    assert res.energy <= gmin + 1e-6


def test_energy_positive_below_threshold(q1, harmonic):
    res = minimize(Params(1, 0.5, 0.5 * q1.a_star), harmonic, q1.grid, q=q1)
    assert res.energy > 0


def test_el_residual(sweep1):
    for res in sweep1:
        assert el_residual(res) < 1e-6


def test_residual_detects_wrong_multiplier(sweep1):
    res = sweep1[1]
    bad = residual_norm(res.params, res.pot, res.grid, res.u.values, res.mu + 0.1)
    assert bad == pytest.approx(0.1, rel=1e-3)


def test_multiplier_is_rayleigh_quotient(harmonic_ground, g1, harmonic):
    u = harmonic_ground.u.values
    assert multiplier(Params(1, 0.5, 0.0), harmonic, g1, 3 * u) == pytest.approx(
        harmonic_ground.mu, rel=1e-12)


def test_sweep_against_oracle(sweep1, oracle_sweep):
    assert len(sweep1) == 5 and sweep1.error is None
    for res, ref in zip(sweep1, oracle_sweep["rows"]):
        assert res.params.a == pytest.approx(ref["a"], rel=1e-8)
        assert res.energy == pytest.approx(ref["energy"], rel=2e-3)
        assert res.eps == pytest.approx(ref["eps"], rel=2e-3)
        assert res.mu == pytest.approx(ref["mu"], rel=2e-3)


def test_sweep_monotone(sweep1):
    eps = [r.eps for r in sweep1]
    E = [r.energy for r in sweep1]
    assert all(y < x for x, y in zip(eps, eps[1:]))
    assert all(y <= x for x, y in zip(E, E[1:]))


def test_singleton_sweep_matches_minimize(q1, harmonic):
    P = Params(1, 0.5)
    a = 0.9 * q1.a_star
    (swept,) = continuation_sweep(P, harmonic, q1.grid, [a], q=q1)
    direct = minimize(P.with_a(a), harmonic, q1.grid, q=q1)
    assert np.array_equal(swept.u.values, direct.u.values)


def test_sweep_schedule_checks(q1, harmonic):
    P = Params(1, 0.5)
    with pytest.raises(UsageError):
        continuation_sweep(P, harmonic, q1.grid, [1.0, 0.5], q=q1)
    with pytest.raises(UsageError):
        continuation_sweep(P, harmonic, q1.grid, [], q=q1)
    with pytest.raises(DomainError):
        continuation_sweep(P, harmonic, q1.grid, [0.5, q1.a_star], q=q1)


def test_sweep_aborts_with_marker(q1_coarse, harmonic):
    out = continuation_sweep(Params(1, 0.5), harmonic, q1_coarse.grid,
                             [0.5, 0.9], FlowConfig(max_iter=1, newton=False), q=q1_coarse)
    assert len(out) == 0 and "a = 0.5" in out.error


def test_domain_error_above_threshold(q1, harmonic):
    for a in (q1.a_star, 1.1 * q1.a_star):
        with pytest.raises(DomainError, match="scaling_probe"):
            minimize(Params(1, 0.5, a), harmonic, q1.grid, q=q1)


def test_nonconvergence_carries_state(g1, harmonic):
    with pytest.raises(NonConvergenceError) as info:
        minimize(Params(1, 0.5, 0.5), harmonic, g1, config=FlowConfig(max_iter=2, newton=False))
    assert info.value.state is not None


def test_no_trap_flag(g1):
    g = build_grid(1, 0.5, 8.0, 512)
    res = minimize(Params(1, 0.5, 0.0), PotentialSpec(2.0, 0.0), g)
    assert any("kappa = 0" in f for f in res.flags)
    # Dirichlet box of radius 8 in one dimension: lowest even mode
    assert res.energy == pytest.approx((math.pi / 16) ** 2, rel=1e-3)


def test_initialization_independence(q1_coarse, harmonic):
    P = Params(1, 0.5, 0.5 * q1_coarse.a_star)
    g = q1_coarse.grid
    a = minimize(P, harmonic, g, gaussian(g, 1.0), q=q1_coarse)
    b = minimize(P, harmonic, g, q=q1_coarse)
    assert np.max(np.abs(a.u.values - b.u.values)) < 1e-6


def test_round_trip(sweep1):
    res = sweep1[2]
    back = MinimizeResult.from_dict(res.to_dict())
    assert np.array_equal(back.u.values, res.u.values)
    assert back.energy == res.energy and back.mu == res.mu and back.params == res.params


def test_grid_mismatch(harmonic):
    g = build_grid(3, 1.0, 25.0, 128)
    with pytest.raises(UsageError):
        minimize(Params(1, 0.5), harmonic, g)


def test_flow_config_validation():
    with pytest.raises(ConfigError):
        FlowConfig(dt=0.0)
    with pytest.raises(ConfigError):
        FlowConfig(max_iter=0)
