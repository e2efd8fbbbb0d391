"""Independent reference values for the limit profile.

LSODA shooting with the needed integrals carried as extra ODE components,
plain bisection on Q(0), and an asymptotic tail correction.  Shares no code
with the package.  Run once; output is frozen in ../fixtures/oracle_q.json.
"""

import json
import math
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp


def start(N, b, q0, r):
    p = 1 + 2 * (2 - b) / N
    A = -q0**p / ((2 - b) * (N - b))
    B = q0 / (2 * N)
    q = q0 + A * r ** (2 - b) + B * r**2
    dq = A * (2 - b) * r ** (1 - b) + 2 * B * r
    return q, dq


def run(N, b, q0, stop_rel=None, rtol=1e-13):
    p = 1 + 2 * (2 - b) / N

    def f(r, y):
        q, dq = y[0], y[1]
        rn = r ** (N - 1)
        return [dq, -(N - 1) / r * dq + q - r ** (-b) * abs(q) ** (p - 1) * q,
                q * q * rn, dq * dq * rn, r ** (-b) * abs(q) ** (p + 1) * rn,
                r * r * q * q * rn]

    r0 = 1e-7
    q, dq = start(N, b, q0, r0)
    # integrals over [0, r0] from the constant leading term
    y0 = [q, dq, q0**2 * r0**N / N, 0.0, q0 ** (p + 1) * r0 ** (N - b) / (N - b), 0.0]
    ev_cross = lambda r, y: y[0]
    ev_cross.terminal, ev_cross.direction = True, -1
    ev_turn = lambda r, y: y[1]
    ev_turn.terminal, ev_turn.direction = True, 1
    events = [ev_cross, ev_turn]
    if stop_rel is not None:
        ev_stop = lambda r, y: y[0] - stop_rel * q0
        ev_stop.terminal, ev_stop.direction = True, -1
        events.append(ev_stop)
    sol = solve_ivp(f, (r0, 60.0), y0, method="LSODA", rtol=rtol, atol=1e-24,
                    first_step=1e-8, events=events)
    kind = "cross" if sol.t_events[0].size else ("turn" if sol.t_events[1].size else "stop")
    return kind, sol.t[-1], sol.y[:, -1]


def solve(N, b):
    lo, hi = 1e-3, 1e3
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if run(N, b, mid)[0] == "turn":
            lo = mid
        else:
            hi = mid
    q0 = 0.5 * (lo + hi)
    kind, rc, y = run(N, b, q0, stop_rel=1e-5)
    assert kind == "stop", kind
    q = y[0]
    # tail beyond rc: Q ~ q * exp(-(r-rc)) (rc/r)^((N-1)/2); leading order
    tail = q * q * rc ** (N - 1) / 2
    area = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
    m, k, i, r2 = (area * (y[2] + tail), area * (y[3] + tail), area * y[4],
                   area * (y[5] + tail * rc * rc))
    beta2 = (2 - b) / N
    return {"N": N, "b": b, "q0": q0, "mass": m, "kinetic": k, "interaction": i,
            "a_star": m**beta2, "r2_moment": r2}


if __name__ == "__main__":
    out = [solve(N, b) for N, b in [(1, 0.5), (3, 1.0), (2, 1.0)]]
    for o in out:
        print(o)
    path = Path(__file__).resolve().parent.parent / "fixtures" / "oracle_q.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
