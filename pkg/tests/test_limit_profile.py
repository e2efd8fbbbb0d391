import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critnls.errors import NumericalError, UsageError
from critnls.grid import Profile, build_grid
from critnls.limit_profile import (
    CROSSED,
    DECAYED,
    TURNED,
    DECAY_FLOOR,
    QSolution,
    bisect_central_value,
    decay_fit,
    q_residual,
    series_start,
    shoot,
    solve_q,
    verify_q_identities,
)
from critnls.params import Params


@settings(max_examples=30, deadline=None)
@given(N=st.integers(1, 4), frac=st.floats(0.1, 0.5), q0=st.floats(0.2, 5.0))
def test_series_start_solves_ode_near_origin(N, frac, q0):
    b = frac * min(2.0, N)
    P = Params(N, b)
    r = np.array([1e-6, 2e-6, 4e-6])
    q, dq = series_start(P, q0, r)
    # Q'' from differentiating the series vs from the equation
    h = 1e-3 * r
    _, dq_p = series_start(P, q0, r + h)
    _, dq_m = series_start(P, q0, r - h)
    d2 = (dq_p - dq_m) / (2 * h)
    rhs = -(N - 1) / r * dq + q - r ** (-b) * q**P.p
    scale = r ** (-b) * q0**P.p
    assert np.all(np.abs(d2 - rhs) / scale < 1e-3)


def test_shoot_classifications(oracle_q):
    P = Params(1, 0.5)
    _, hi = bisect_central_value(P)
    assert shoot(P, 1e-3).classification == TURNED
    assert shoot(P, 10 * hi).classification == CROSSED


def test_converged_shot_decays():
    P = Params(3, 1.0)
    lo, hi = bisect_central_value(P)
    hit = shoot(P, 0.5 * (lo + hi))
    assert hit.classification == DECAYED
    assert abs(hit.q) <= DECAY_FLOOR * (1 + 1e-9) and hit.dq < 0


def test_converged_shot_resolves_late():
    # in one dimension the growing mode catches up before the floor; the
    # bracket ends still track Q until well inside the tail
    P = Params(1, 0.5)
    lo, hi = bisect_central_value(P)
    for q0 in (lo, hi):
        hit = shoot(P, q0)
        assert hit.classification in (TURNED, CROSSED)
        assert hit.radius > 14.0 and abs(hit.q) < 2e-6


@pytest.mark.parametrize("key", [(1, 0.5), (3, 1.0), (2, 1.0)])
def test_bisection_matches_oracle(oracle_q, key):
    lo, hi = bisect_central_value(Params(*key))
    assert lo <= hi
    assert 0.5 * (lo + hi) == pytest.approx(oracle_q[key]["q0"], rel=1e-10)


def test_bracket_failure_is_numerical_error():
    with pytest.raises(NumericalError):
        bisect_central_value(Params(1, 0.5), q_range=(1e-6, 1e-3))


@pytest.mark.parametrize("name", ["q1", "q3"])
def test_q_against_oracle(request, oracle_q, name):
    q = request.getfixturevalue(name)
    ref = oracle_q[(q.params.N, q.params.b)]
    assert q.q0 == pytest.approx(ref["q0"], rel=1e-10)
    for key in ("mass", "a_star", "kinetic", "interaction"):
        assert getattr(q, key) == pytest.approx(ref[key], rel=1e-8), key


def test_q_n2_threshold(oracle_q):
    q = solve_q(Params(2, 1.0), build_grid(2, 1.0, 25.0, 4096))
    assert q.a_star == pytest.approx(oracle_q[(2, 1.0)]["a_star"], rel=1e-8)


def test_q_invariants(q1, q3):
    for q in (q1, q3):
        Q = q.profile.values
        assert np.all(Q > 0)
        assert np.all(np.diff(Q) < 0)
        assert q.a_star == pytest.approx(q.mass ** q.params.beta2, rel=1e-14)
        rep = q.identities()
        assert rep.max_deviation < 1e-6
        assert rep.kinetic / rep.mass_over_beta2 == pytest.approx(1.0, abs=1e-6)
        assert q_residual(q) < 1e-6


def test_q_solve_time():
    t = time.perf_counter()
    solve_q(Params(1, 0.5), build_grid(1, 0.5, 25.0, 4096))
    assert time.perf_counter() - t < 5.0


def test_identity_detector(q1):
    rng = np.random.default_rng(3)
    noisy = Profile(q1.grid, q1.profile.values * (1 + 0.01 * rng.standard_normal(q1.grid.M)))
    clone = QSolution(q1.params, q1.grid, noisy, q1.q0, q1.tail_amplitude, q1.mass, q1.kinetic,
                      q1.interaction, q1.a_star, q1.decay_rate)
    assert verify_q_identities(clone).max_deviation > 1e-3


def test_identities_improve_with_refinement(q1):
    devs = [solve_q(Params(1, 0.5), build_grid(1, 0.5, 25.0, M), check_tol=None).identities().max_deviation
            for M in (128, 512)]
    assert devs[0] > devs[1] > q1.identities().max_deviation


def test_a_star_grid_invariant(q1, q1_coarse):
    assert q1_coarse.a_star == pytest.approx(q1.a_star, rel=1e-6)


def test_decay_rates(q1, q3):
    assert decay_fit(q1) == pytest.approx(-1.0, abs=0.02)
    assert decay_fit(q3) == pytest.approx(-1.0, abs=0.05)
    g = build_grid(1, 0.5, 25.0, 2048)
    assert decay_fit(Profile(g, np.exp(-2 * g.r))) == pytest.approx(-2.0, abs=1e-6)


def test_evaluate_pieces(q1):
    g = q1.grid
    # nodes reproduce samples, tail continues smoothly, series below r_1
    assert np.allclose(q1.evaluate(g.r[10:20]), q1.profile.values[10:20], rtol=1e-12)
    inside = q1.evaluate(np.array([g.r[-1]]))[0]
    beyond = q1.evaluate(np.array([g.r[-1] * (1 + 1e-9)]))[0]
    assert beyond == pytest.approx(inside, rel=1e-6)
    assert q1.evaluate(np.array([0.0]))[0] == pytest.approx(q1.q0, rel=1e-14)
    with pytest.raises(UsageError):
        q1.evaluate(np.array([-1.0]))


def test_normalized_limit_unit_mass(q1):
    g = build_grid(1, 0.5, 40.0, 4096)
    u = q1.normalized_limit(g.r)
    assert g.area * float(np.dot(g.w, u * u)) == pytest.approx(1.0, rel=1e-8)


def test_round_trip(q1):
    back = QSolution.from_dict(q1.to_dict())
    assert back.a_star == q1.a_star and back.q0 == q1.q0
    assert np.array_equal(back.profile.values, q1.profile.values)
    assert back.grid.same_as(q1.grid)


def test_solve_is_deterministic(q1_coarse):
    again = solve_q(Params(1, 0.5), q1_coarse.grid)
    assert again.q0 == q1_coarse.q0
    assert np.array_equal(again.profile.values, q1_coarse.profile.values)


def test_grid_params_mismatch():
    with pytest.raises(UsageError):
        solve_q(Params(1, 0.5), build_grid(3, 1.0, 25.0, 64))
