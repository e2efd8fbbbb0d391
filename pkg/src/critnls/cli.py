"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
or non-convergence, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .cache import Cache, cached_q
from .config import RunConfig, load_config, parse_coupling, resolve_config
from .errors import CritNLSError, DomainError, UsageError, VerificationError
from .grid import build_grid
from .io import RunManifest, Stopwatch, dumps, write_csv
from .minimizer import RADIAL_ASSUMPTION
from .params import Params

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n\n{self.format_help()}")


def _common(p: argparse.ArgumentParser, needs_a: bool = False):
    g = p.add_argument_group("problem")
    g.add_argument("--config", metavar="JSON", help="configuration file; flags override it")
    g.add_argument("--N", type=int)
    g.add_argument("--b", type=float)
    if needs_a:
        g.add_argument("--a", help="coupling, absolute or as a fraction of a* ('0.95ast')")
    g.add_argument("--l", type=float, help="trap degree (default 2)")
    g.add_argument("--kappa", type=float, help="trap coefficient (default 1)")
    n = p.add_argument_group("numerics")
    n.add_argument("--R", type=float, help="truncation radius (default 25)")
    n.add_argument("--M", type=int, help="node count (default 4096)")
    n.add_argument("--clustering", type=float, help="grading exponent (default 2)")
    n.add_argument("--tol", type=float, help="minimizer residual tolerance (default 1e-7)")
    n.add_argument("--max-iter", dest="max_iter", type=int)
    n.add_argument("--seed", type=int, help="random seed (default 0)")
    o = p.add_argument_group("output")
    o.add_argument("--out", metavar="DIR", help="write CSV tables and a manifest here")
    o.add_argument("--json", action="store_true", help="print the result as JSON")
    o.add_argument("--no-cache", action="store_true")
    o.add_argument("--cache-dir", metavar="DIR", help="overrides $CRITNLS_CACHE_DIR")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="critnls", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("q-profile", help="solve the limit equation for Q")
    _common(p)
    p = sub.add_parser("threshold", help="print a* = ||Q||^(2 beta^2)")
    _common(p)
    p = sub.add_parser("gn-check", help="GN ratio on the optimizer family and random bumps")
    _common(p)
    p.add_argument("--bumps", type=int, default=100)
    p = sub.add_parser("minimize", help="constrained minimizer at one coupling")
    _common(p, needs_a=True)
    p = sub.add_parser("sweep", help="continuation sweep over couplings below a*")
    _common(p)
    p.add_argument("--schedule", help="comma-separated couplings, e.g. 0.9ast,0.95ast")
    p = sub.add_parser("fit", help="sweep and fit the blow-up laws")
    _common(p)
    p.add_argument("--schedule", help="comma-separated couplings")
    p = sub.add_parser("diagnose", help="dilation identity, kernel probe, Pohozaev balance")
    _common(p, needs_a=True)
    p.add_argument("--delta-factor", type=float, default=10.0,
                   help="ball radius in units of eps (default 10)")
    p = sub.add_parser("probe-supercritical", help="energies of cut-off dilations for a > a*")
    _common(p, needs_a=True)
    p.add_argument("--taus", default="5,10,20")
    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="reduced resolution")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--json", action="store_true")
    return parser


class Context:
    """Resolved configuration plus the cache and manifest of one invocation."""

    def __init__(self, args, defaults: Optional[dict] = None):
        file_cfg = load_config(args.config) if getattr(args, "config", None) else {}
        flags = {k: getattr(args, k, None) for k in
                 ("N", "b", "a", "l", "kappa", "R", "M", "clustering", "tol", "max_iter",
                  "seed", "out", "schedule")}
        merged = dict(defaults or {})
        merged.update(file_cfg)
        self.cfg: RunConfig = resolve_config(merged, flags)
        self.args = args
        self.cache = Cache(args.cache_dir, enabled=not args.no_cache)
        self.watch = Stopwatch()
        self.manifest = RunManifest(args.command, self.cfg.to_dict(),
                                    assumptions=[RADIAL_ASSUMPTION])
        self._q = None

    @property
    def out(self) -> Optional[Path]:
        return Path(self.cfg.out) if self.cfg.out else None

    def grid(self):
        c = self.cfg
        return build_grid(c.N, c.b, c.R, c.M, c.clustering)

    def q(self):
        if self._q is None:
            self._q, key = cached_q(Params(self.cfg.N, self.cfg.b), self.grid(), self.cache)
            self.manifest.cache_keys["q"] = key
            self.manifest.cache_hits["q"] = self.cache.hits.get(key, False)
        return self._q

    def flow_config(self):
        from .minimizer import FlowConfig

        return FlowConfig(tol=self.cfg.tol, max_iter=self.cfg.max_iter)

    def coupling(self, default: Optional[str] = None) -> float:
        a = self.cfg.a or (parse_coupling(default) if default else None)
        if a is None:
            raise UsageError("--a is required for this command")
        return a.resolve(self.q().a_star)

    def params(self, default: Optional[str] = None) -> Params:
        return Params(self.cfg.N, self.cfg.b, self.coupling(default))

    def table(self, name: str, header, rows):
        if self.out is None:
            return
        path = write_csv(self.out / name, header, rows)
        self.manifest.outputs.append(str(path))

    def finish(self, payload: dict, text: Sequence[str]):
        if self.out is not None:
            self.manifest.duration = self.watch.elapsed()
            name = f"{self.args.command}.manifest.json"
            self.manifest.write(self.out / name)
        if self.args.json:
            sys.stdout.write(dumps(payload))
        else:
            for line in text:
                print(line)
        return EXIT_OK


def _floats(text: str, name: str):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(f"--{name}: empty list")
    return vals


def cmd_q_profile(ctx: Context) -> int:
    from .limit_profile import decay_fit

    q = ctx.q()
    ident = q.identities()
    g = q.grid
    ctx.table("q_profile.csv", ["r", "Q", "dQ"], zip(g.r, q.profile.values, q.profile.deriv))
    payload = {"N": q.params.N, "b": q.params.b, "q0": q.q0, "a_star": q.a_star,
               "mass": q.mass, "kinetic": q.kinetic, "interaction": q.interaction,
               "decay_rate": decay_fit(q), "identity_deviation": ident.max_deviation}
    text = [f"{k:>20} {v:.12g}" for k, v in payload.items()]
    return ctx.finish(payload, text)


def cmd_threshold(ctx: Context) -> int:
    q = ctx.q()
    payload = {"N": q.params.N, "b": q.params.b, "a_star": q.a_star}
    return ctx.finish(payload, [f"{q.a_star:.8g}"])


def cmd_gn_check(ctx: Context) -> int:
    from .energy import gn_bump_max, gn_family

    q = ctx.q()
    rows = gn_family(q)
    bump = gn_bump_max(q, np.random.default_rng(ctx.cfg.seed), ctx.args.bumps)
    ctx.table("gn_family.csv", ["m", "n", "ratio"], ([r["m"], r["n"], r["ratio"]] for r in rows))
    payload = {"family": rows, "bump_max": bump, "bumps": ctx.args.bumps, "seed": ctx.cfg.seed}
    text = [f"m={r['m']:g} n={r['n']:g} ratio={r['ratio']:.12f}" for r in rows]
    text.append(f"max over {ctx.args.bumps} random bumps: {bump:.12f}")
    return ctx.finish(payload, text)


def _sweep_rows(sweep, a_star):
    for r in sweep:
        e = r.breakdown
        yield [r.params.a, a_star, r.params.a / a_star, e.total, r.mu, r.eps, e.kinetic, e.trap,
               e.interaction, r.residual, r.iterations]


SWEEP_HEADER = ["a", "a_star", "a_over_astar", "energy", "mu", "eps", "kinetic", "trap",
                "interaction", "residual", "iterations"]


def cmd_minimize(ctx: Context) -> int:
    from .minimizer import minimize

    q = ctx.q()
    P = ctx.params()
    a = P.a
    res = minimize(P, ctx.cfg.potential(), q.grid, config=ctx.flow_config(), q=q)
    ctx.table("minimizer.csv", ["r", "u"], zip(q.grid.r, res.u.values))
    payload = res.to_dict(with_profile=False)
    payload["a_over_astar"] = a / q.a_star
    text = [f"a = {a:.10g} ({a / q.a_star:.6g} a*)",
            f"energy {res.energy:.12g}  mu {res.mu:.12g}  eps {res.eps:.12g}",
            f"iterations {res.iterations}  residual {res.residual:.3e}"]
    text += [f"flag: {f}" for f in res.flags]
    return ctx.finish(payload, text)


def _run_sweep(ctx: Context):
    from .minimizer import continuation_sweep

    q = ctx.q()
    sched = ctx.cfg.couplings(q.a_star)
    sweep = continuation_sweep(Params(ctx.cfg.N, ctx.cfg.b), ctx.cfg.potential(), q.grid, sched,
                               config=ctx.flow_config(), q=q)
    if sweep.error:
        warnings.warn(f"sweep stopped early: {sweep.error}", RuntimeWarning, stacklevel=2)
    ctx.table("sweep.csv", SWEEP_HEADER, _sweep_rows(sweep, q.a_star))
    return q, sweep


def cmd_sweep(ctx: Context) -> int:
    q, sweep = _run_sweep(ctx)
    rows = [dict(zip(SWEEP_HEADER, r)) for r in _sweep_rows(sweep, q.a_star)]
    text = [",".join(SWEEP_HEADER)] + [",".join(f"{x:.10g}" for x in r.values()) for r in rows]
    return ctx.finish({"a_star": q.a_star, "rows": rows, "error": sweep.error}, text)


def cmd_fit(ctx: Context) -> int:
    from .asymptotics import fit_blowup_rate, fit_energy_rate, mu_limit_check, rescaled_profile_distance
    from .energy import energy_constant, lambda_const

    q, sweep = _run_sweep(ctx)
    P, pot = Params(ctx.cfg.N, ctx.cfg.b), ctx.cfg.potential()
    eps_fit = fit_blowup_rate(sweep, lambda_const(P, pot, q), q.a_star)
    e_fit = fit_energy_rate(sweep, energy_constant(P, pot, q), q.a_star)
    mu_rows, monotone = mu_limit_check(sweep, P.beta2)
    dist = [rescaled_profile_distance(r, q) for r in sweep]
    ctx.table("fit_rows.csv", ["a", "eps", "energy", "mu_eps2", "sup_dist", "h1_dist"],
              ([r.params.a, r.eps, r.energy, m["mu_eps2"], d[0], d[1]]
               for r, m, d in zip(sweep, mu_rows, dist)))
    payload = {"eps": eps_fit.to_dict(), "energy": e_fit.to_dict(), "mu": mu_rows,
               "mu_monotone": monotone, "distances": dist}
    text = [
        f"eps   exponent {eps_fit.exponent:.5f} (target {eps_fit.target_exponent:.5f}, "
        f"rel {eps_fit.exponent_error:.2%}); prefactor {eps_fit.prefactor:.5f} "
        f"(target {eps_fit.target_prefactor:.5f}, rel {eps_fit.prefactor_error:.2%})",
        f"e(a)  exponent {e_fit.exponent:.5f} (target {e_fit.target_exponent:.5f}, "
        f"rel {e_fit.exponent_error:.2%}); constant {e_fit.prefactor:.5f} "
        f"(target {e_fit.target_prefactor:.5f}, rel {e_fit.prefactor_error:.2%})",
        "mu eps^2 deviation: " + ", ".join(f"{m['deviation']:.3e}" for m in mu_rows)
        + f" (monotone: {monotone})",
        "sup distance to limit profile: " + ", ".join(f"{d[0]:.3e}" for d in dist),
    ]
    return ctx.finish(payload, text)


def cmd_diagnose(ctx: Context) -> int:
    from .diagnostics import build_linearized, kernel_probe, dilation_identity_check, lq_check, pohozaev_balance
    from .minimizer import minimize

    q = ctx.q()
    L = build_linearized(q)
    eig = kernel_probe(L)
    P = ctx.params("0.95ast")
    a = P.a
    res = minimize(P, ctx.cfg.potential(), q.grid,
                   config=ctx.flow_config(), q=q)
    rep = pohozaev_balance(res, ctx.args.delta_factor * res.eps)
    payload = {"lq": lq_check(q, L), "dilation_identity": dilation_identity_check(q, L), "kernel_eig": eig,
               "kernel_sector": "radial", "kernel_asserted": q.params.N >= 3,
               "a": a, "pohozaev": rep.to_dict()}
    note = "" if q.params.N >= 3 else " (reported only for N < 3)"
    text = [f"L Q check            {payload['lq']:.3e}",
            f"dilation identity    {payload['dilation_identity']:.3e}",
            f"smallest |eig| (radial sector) {eig:.8g}{note}",
            f"Pohozaev at a = {a / q.a_star:.6g} a*, delta = {rep.delta:.6g}: "
            f"left {rep.left:.10g} right {rep.right:.10g} mismatch {rep.mismatch:.3e}"]
    return ctx.finish(payload, text)


def cmd_probe_supercritical(ctx: Context) -> int:
    from .energy import fit_scaling_coefficients, predicted_tau2_coefficient, scaling_probe

    q = ctx.q()
    P = ctx.params("1.05ast")
    a = P.a
    if a <= q.a_star:
        raise DomainError(f"the scaling probe targets a > a* = {q.a_star:.10g}; got a = {a:.10g}")
    taus = _floats(ctx.args.taus, "taus")
    rows = scaling_probe(P, ctx.cfg.potential(), q, taus)
    ctx.table("scaling_probe.csv", ["tau", "energy", "kinetic", "trap", "interaction"],
              ([r["tau"], r["energy"], r["kinetic"], r["trap"], r["interaction"]] for r in rows))
    payload = {"a": a, "rows": rows, "predicted_tau2": predicted_tau2_coefficient(P, q)}
    if len(rows) >= 2:
        payload["fitted_tau2"], payload["fitted_taul"] = fit_scaling_coefficients(rows, ctx.cfg.l)
    text = [f"tau {r['tau']:>8g}  E {r['energy']:.10g}" for r in rows]
    text.append(f"predicted tau^2 coefficient {payload['predicted_tau2']:.10g}")
    if "fitted_tau2" in payload:
        text.append(f"fitted tau^2 coefficient    {payload['fitted_tau2']:.10g}")
    return ctx.finish(payload, text)


def cmd_verify(args) -> int:
    from .verify import run_suite

    only = {int(x) for x in args.only.split(",")} if args.only else None
    results = run_suite(quick=args.quick, seed=args.seed, only=only,
                        echo=None if args.json else print)
    passed = all(r.passed for r in results)
    if args.out:
        out = Path(args.out)
        from .io import write_json

        path = write_json(out / "verify.json", [r.to_dict() for r in results])
        RunManifest("verify", {"quick": args.quick, "seed": args.seed, "only": sorted(only or [])},
                    outputs=[str(path)], assumptions=[RADIAL_ASSUMPTION]).write(
            out / "verify.manifest.json")
    if args.json:
        sys.stdout.write(dumps([r.to_dict() for r in results]))
    else:
        n_ok = sum(r.passed for r in results)
        print(f"{n_ok}/{len(results)} criteria passed")
    return EXIT_OK if passed else EXIT_VERIFY


COMMANDS = {
    "q-profile": cmd_q_profile,
    "threshold": cmd_threshold,
    "gn-check": cmd_gn_check,
    "minimize": cmd_minimize,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "probe-supercritical": cmd_probe_supercritical,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "verify":
            return cmd_verify(args)
        ctx = Context(args)
        return COMMANDS[args.command](ctx)
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except CritNLSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:  # pragma: no cover - load_config wraps these
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
