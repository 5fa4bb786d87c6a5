"""Command-line entry point ``elastokss``.

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure
(a check outside tolerance), 4 blow-up in a subcommand that requires a
regular run.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .harness import (
    SWEEP_COLUMNS,
    ConfigError,
    RunConfig,
    header_line,
    emit_plotdata,
    hodge_check,
    kss_free_run,
    kss_growth_experiment,
    load_config,
    sweep_lifespan,
    sweep_rows,
    verify_identity,
    write_csv,
    write_manifest,
)
from .inequalities import CHECKS, ensemble, write_ratio_csv
from .multiplier import LocalizationError

log = logging.getLogger("elastokss")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_BLOWUP = 0, 2, 3, 4

IDENTITY_TOL = 1e-3
HODGE_TOL = 1e-10
KSS_FIT_TOL = 0.10


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI run configuration")
    p.add_argument("--out", type=Path, default=Path("elastokss-out"), help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="grid points per axis")
    p.add_argument("--L", type=float, help="box half-width")
    p.add_argument("--delta", type=float)
    p.add_argument("--eps", type=str, help="amplitude (comma-separated list for sweep-lifespan)")
    p.add_argument("--T", type=float, help="final time (horizon cap for sweep-lifespan)")
    p.add_argument("--mode", choices=("linear", "perturbed", "quasilinear"))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="elastokss", description="Elastic wave space-time estimate toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="time-integrate radial data (needs --config)")
    _common(s)
    s.add_argument("--snapshot-every", type=int, default=0)

    s = sub.add_parser("verify-identity", help="manufactured-solution multiplier identity residual")
    _common(s)

    s = sub.add_parser("verify-kss", help="space-time estimate ratio and exact radial log-growth fit")
    _common(s)
    s.add_argument("--growth-points", type=int, default=40, help="log-spaced T values in [1, 200]; 0 skips")

    s = sub.add_parser("hodge-check", help="Hodge split residuals on a random field")
    _common(s)

    s = sub.add_parser("sobolev-check", help="inequality ratio ensembles")
    _common(s)
    s.add_argument("--seeds", type=int, default=10, help="ensemble size")
    s.add_argument("--checks", type=str, default="all", help="comma-separated check names")

    s = sub.add_parser("sweep-lifespan", help="blow-up time against amplitude")
    _common(s)
    s.add_argument("--kappa0", type=float, default=1.0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--wall-budget", type=float, default=None, help="seconds per sweep point")
    return p


def _resolve(args, **defaults) -> RunConfig:
    cfg = RunConfig(**defaults)
    if args.config is not None:
        cfg = load_config(args.config, cfg)
    upd = {k: getattr(args, k) for k in ("seed", "n", "L", "delta", "T", "mode") if getattr(args, k) is not None}
    if args.eps is not None and args.command != "sweep-lifespan":
        upd["eps"] = float(args.eps)
    return replace(cfg, **upd)


def _summary(out: Path, lines) -> None:
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    sys.stdout.write(text)


# -- subcommands ---------------------------------------------------------------

def _simulate(args, out: Path) -> int:
    if args.config is None:
        raise ConfigError("simulate needs --config (no built-in run defaults)")
    cfg = _resolve(args)
    sc = cfg.solver_config()
    from .solver import simulate

    snap = out / "snapshots" if args.snapshot_every else None
    rep = simulate(sc, cfg.data(), cfg.mode, snapshot_dir=snap, snapshot_every=args.snapshot_every or None)
    write_csv(out / "run.csv", ("t", "energy", "elastic_energy", "sup_gradient"), rep.as_rows(), cfg, cfg.seed)
    emit_plotdata(out, energy=(rep.times, rep.energies))
    status = "no blow-up" if rep.blowup_time is None else f"blow-up at t = {rep.blowup_time:.6g} ({rep.blowup_kind})"
    _summary(out, [f"simulate mode={cfg.mode} n={cfg.n} L={cfg.L} eps={cfg.eps} T={cfg.T} steps={rep.steps}",
                   status])
    return EXIT_OK


def _verify_identity(args, out: Path) -> int:
    cfg = _resolve(args, T=2.0, seed=3)
    try:
        rep = verify_identity(cfg.n, cfg.delta, cfg.T, cfg.L, seed=cfg.seed)
    except LocalizationError as exc:
        _summary(out, [f"identity check aborted: {exc}"])
        return EXIT_NUMERIC
    rows = [(k, v) for k, v in rep.constituents.items()]
    rows += [("residual", rep.residual), ("normalized_residual", rep.normalized),
             ("boundary_fraction", rep.boundary_fraction), ("min_q12_density", rep.min_q12),
             ("lower_bound_violations", float(rep.lower_bound_violations))]
    write_csv(out / "identity.csv", ("quantity", "value"), rows, cfg, cfg.seed)
    ok = rep.normalized <= IDENTITY_TOL
    rel = "<=" if ok else ">"
    _summary(out, [f"normalized residual {rep.normalized:.3e} {rel} {IDENTITY_TOL:.0e}",
                   f"lower-bound violations {rep.lower_bound_violations}"])
    return EXIT_OK if ok else EXIT_NUMERIC


def _verify_kss(args, out: Path) -> int:
    cfg = _resolve(args, T=2.0)
    grid = cfg.grid()
    ratio, rep = kss_free_run(grid, cfg.seed, cfg.T, cfg.delta, cfg.medium())
    if rep.blowup_time is not None:
        _summary(out, [f"free run blew up at t = {rep.blowup_time:.6g} ({rep.blowup_kind})"])
        return EXIT_BLOWUP
    rows = [("lhs", ratio.lhs), ("rhs", ratio.rhs), ("ratio", ratio.ratio), ("ratio_unweighted", ratio.ratio0)]
    rows += [(k, float(v)) for k, v in ratio.terms.items()]
    write_csv(out / "kss_ratio.csv", ("quantity", "value"), rows, cfg, cfg.seed)
    lines = [f"space-time estimate ratio {ratio.ratio:.6g} (seed {cfg.seed}, T = {cfg.T})"]
    code = EXIT_OK if np.isfinite(ratio.ratio) else EXIT_NUMERIC
    growth = None
    if args.growth_points > 0:
        growth = kss_growth_experiment(np.geomspace(1.0, 200.0, args.growth_points), cfg.delta)
        write_csv(out / "kss_growth.csv", ("T", "integral", "fit"),
                  zip(growth.T, growth.integrals, growth.fit.predict(growth.T)), cfg, cfg.seed)
        f = growth.fit
        lines.append(f"log-growth fit a = {f.a:.6g}, b = {f.b:.6g}, relative L2 residual {f.relative_l2_residual:.3e}")
        if not f.relative_l2_residual <= KSS_FIT_TOL:
            code = EXIT_NUMERIC
    emit_plotdata(out, energy=(rep.times, rep.energies),
                  kss=(growth.T, growth.integrals) if growth is not None else None)
    _summary(out, lines)
    return code


def _hodge_check(args, out: Path) -> int:
    cfg = _resolve(args)
    res = hodge_check(cfg.grid(), cfg.seed)
    write_csv(out / "hodge.csv", ("quantity", "relative_residual"), res.items(), cfg, cfg.seed)
    worst = max(res.values())
    ok = worst <= HODGE_TOL
    _summary(out, [f"{k}: {v:.3e}" for k, v in res.items()]
             + [f"orthogonality {'ok' if ok else 'FAILED'} (worst {worst:.3e}, tolerance {HODGE_TOL:.0e})"])
    return EXIT_OK if ok else EXIT_NUMERIC


def _sobolev_check(args, out: Path) -> int:
    cfg = _resolve(args)
    names = list(CHECKS) if args.checks == "all" else [c.strip() for c in args.checks.split(",")]
    bad = [c for c in names if c not in CHECKS]
    if bad:
        raise ConfigError(f"unknown checks: {', '.join(bad)}")
    seeds = range(cfg.seed, cfg.seed + args.seeds)
    reps = ensemble(names, seeds, cfg.grid(), cfg.delta)
    write_ratio_csv(out / "ratios.csv", reps.values(), header_line(cfg, cfg.seed))
    allr = np.concatenate([r.ratios for r in reps.values()])
    emit_plotdata(out, ratios=allr)
    lines = [f"{k}: max {r.max:.6g} median {r.median:.6g}" for k, r in reps.items()]
    finite = bool(np.all(np.isfinite(allr)))
    lines.append("all ratios finite" if finite else "non-finite ratios present")
    _summary(out, lines)
    return EXIT_OK if finite else EXIT_NUMERIC


def _sweep_lifespan(args, out: Path) -> int:
    cfg = _resolve(args, mode="quasilinear", n=32, width=2.0, support_tol=1e-2)
    eps = [0.4, 0.2, 0.1] if args.eps is None else [float(e) for e in args.eps.split(",") if e.strip()]
    T_cap = cfg.T if args.T is not None or args.config is not None else 400.0
    res = sweep_lifespan(eps, cfg, args.kappa0, T_cap, args.wall_budget, args.workers)
    write_csv(out / "lifespan.csv", SWEEP_COLUMNS, sweep_rows(res), cfg, cfg.seed)
    emit_plotdata(out, sweep=res)
    lines = [f"eps={r.eps:g}: " + (f"censored at T = {r.time:.6g}" if r.censored
                                    else f"blow-up at T = {r.time:.6g} ({r.trigger})") for r in res.rows]
    if res.fit is None:
        lines.append("fit omitted (too few uncensored rows)")
    else:
        lines.append(f"log T = {res.fit.kappa:.4g}/eps + {res.fit.intercept:.4g}, correlation {res.fit.correlation:.4f}")
    _summary(out, lines)
    return EXIT_OK


_COMMANDS = {
    "simulate": _simulate,
    "verify-identity": _verify_identity,
    "verify-kss": _verify_kss,
    "hodge-check": _hodge_check,
    "sobolev-check": _sobolev_check,
    "sweep-lifespan": _sweep_lifespan,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        code = _COMMANDS[args.command](args, args.out)
    except (ConfigError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"elastokss: error: {exc}\n")
        return EXIT_USAGE
    write_manifest(args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
