"""Experiment orchestration and persistence.

Experiments: manufactured-solution identity residuals, free-run space-time
estimate ratios, exact radial log-growth fits, Hodge checks, inequality
ensembles and lifespan sweeps.  Every CSV starts with a comment line
carrying the config hash, seed and package version; every output directory
gets a ``manifest.json`` listing artifacts with their SHA-256.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .elastic import ElasticMedium, PerturbationField, apply_H, elastic_spatial
from .fields import GaussianProfile, random_localized_field
from .grid import GridSpec, curl, divergence, gradient, l2_norm
from .hodge import hodge_decompose
from .multiplier import KSSAccumulator, KSSRatio, ResidualReport, identity_residual
from .radial import LogFit, RadialWave, fit_log_growth, kss_growth
from .solver import RunReport, SolverConfig, radial_data, simulate
from .tensors import DEFAULT_D, isotropic_g

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "write_csv",
    "write_manifest",
    "ManufacturedProblem",
    "manufactured_problem",
    "verify_identity",
    "kss_free_run",
    "KSSGrowth",
    "kss_growth_experiment",
    "hodge_check",
    "SweepRow",
    "LifespanFit",
    "SweepResult",
    "fit_lifespan",
    "lifespan_horizon",
    "sweep_lifespan",
    "emit_plotdata",
    "header_line",
]


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


# -- configuration -------------------------------------------------------------

_SECTIONS = {
    "grid": ("n", "L"),
    "medium": ("c1", "c2", "g"),
    "solver": ("dt", "T", "cfl", "dealias", "record_every", "blowup_threshold", "mode"),
    "data": ("eps", "width", "velocity_width", "support_tol"),
    "experiment": ("delta", "seed"),
}


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; the INI file mirrors it section by section.

    ``g`` is ``"default"``, ``"none"`` or five comma-separated coefficients
    in the isotropic basis.  ``dt = None`` picks the largest CFL step that
    divides ``T``.
    """

    n: int = 64
    L: float = 8.0
    c1: float = 2.0
    c2: float = 1.0
    g: str = "default"
    dt: float | None = None
    T: float = 1.0
    cfl: float = 0.5
    dealias: bool = True
    record_every: int = 1
    blowup_threshold: float = 1e3
    mode: str = "linear"
    eps: float = 0.1
    width: float = 1.2
    velocity_width: float | None = None
    support_tol: float = 1e-8
    delta: float = 0.25
    seed: int = 0

    def grid(self) -> GridSpec:
        return GridSpec(self.n, self.L)

    def g_tensor(self):
        key = str(self.g).strip().lower()
        if key == "none":
            return None
        if key == "default":
            return isotropic_g(DEFAULT_D)
        try:
            d = tuple(float(x) for x in key.split(","))
        except ValueError:
            raise ConfigError(f"cannot parse g = {self.g!r}") from None
        return isotropic_g(d)

    def medium(self) -> ElasticMedium:
        return ElasticMedium(self.c1, self.c2, self.g_tensor())

    def solver_config(self) -> SolverConfig:
        grid, med = self.grid(), self.medium()
        kw = dict(dealias=self.dealias, record_every=self.record_every, blowup_threshold=self.blowup_threshold)
        if self.dt is None:
            return SolverConfig.from_cfl(grid, med, self.T, self.cfl, **kw)
        return SolverConfig(grid, med, self.dt, self.T, self.cfl, **kw)

    def data(self):
        vel = None if self.velocity_width is None else GaussianProfile(1.0, self.velocity_width)
        return radial_data(self.grid(), self.eps, GaussianProfile(1.0, self.width), vel, self.support_tol)

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_ini(self, path) -> None:
        cp = configparser.ConfigParser()
        d = asdict(self)
        for sec, keys in _SECTIONS.items():
            cp[sec] = {k: str(d[k]) for k in keys}
        with open(path, "w") as fh:
            cp.write(fh)


def _coerce(name: str, raw: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    raw = raw.strip()
    try:
        if "None" in kind and raw.lower() in ("", "none"):
            return None
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
        if kind.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read an INI file with sections ``grid``, ``medium``, ``solver``,
    ``data`` and ``experiment``; unknown sections or keys are errors."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cp = configparser.ConfigParser()
    try:
        cp.read(p)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    upd = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        for key, val in cp[sec].items():
            name = {k.lower(): k for k in _SECTIONS[sec]}.get(key)
            if name is None:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            upd[name] = _coerce(name, val)
    return replace(base or RunConfig(), **upd)


# -- persistence ---------------------------------------------------------------

def header_line(cfg: RunConfig | None, seed) -> str:
    h = cfg.config_hash() if cfg is not None else "none"
    return f"# config_hash={h}, seed={seed}, version={__version__}"


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def write_csv(path, columns, rows, cfg: RunConfig | None = None, seed=None) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(header_line(cfg, seed) + "\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def write_manifest(outdir) -> Path:
    """``manifest.json`` with the SHA-256 of every other file under ``outdir``."""
    outdir = Path(outdir)
    items = []
    for p in sorted(outdir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            items.append({"path": str(p.relative_to(outdir)), "sha256": hashlib.sha256(p.read_bytes()).hexdigest(),
                          "bytes": p.stat().st_size})
    m = outdir / "manifest.json"
    m.write_text(json.dumps({"version": __version__, "artifacts": items}, indent=2) + "\n")
    return m


# -- manufactured solution -----------------------------------------------------

@dataclass
class ManufacturedProblem:
    """``u(t) = cos(w1 t) grad(phi) + sin(w2 t) curl(A)`` with the forcing
    ``F = u_tt - A u + H u`` computed spectrally, so the identity holds with
    ``F`` as right-hand side."""

    grid: GridSpec
    medium: ElasticMedium
    h: PerturbationField
    dt: float
    steps: int
    w: tuple
    parts: tuple = field(repr=False)

    def records(self):
        U1, U2, F1, F2 = self.parts
        w1, w2 = self.w
        for s in range(self.steps + 1):
            t = s * self.dt
            c, sn = np.cos(w1 * t), np.sin(w2 * t)
            yield (t, c * U1 + sn * U2, -w1 * np.sin(w1 * t) * U1 + w2 * np.cos(w2 * t) * U2,
                   c * F1 + sn * F2)


def manufactured_problem(n: int = 64, L: float = 8.0, T: float = 2.0, cfl: float = 0.5, seed: int = 3,
                         h_size: float = 0.05, w=(1.0, 1.3)) -> ManufacturedProblem:
    """Smooth localized test problem with a variable symmetric perturbation
    ``h = h0 exp(-r^2/4)``, ``sum |h0| = h_size``; ``dt`` from the CFL number."""
    grid = GridSpec(n, L)
    x = grid.coords
    r2 = np.sum(x * x, axis=0)
    env = r2 ** 2 * np.exp(-r2 / 2)
    phi = env * (1 + 0.3 * x[0] * x[1])
    A = np.stack([env * (0.5 + 0.2 * x[1] * x[2]), env * -0.3, env * 0.2 * x[0] ** 2])
    U1, U2 = gradient(phi, grid), curl(A, grid)
    rng = np.random.default_rng(seed)
    R = rng.normal(size=(3, 3, 3, 3))
    h0 = 0.5 * (R + R.transpose(1, 0, 3, 2))
    h0 *= h_size / np.abs(h0).sum()
    h = PerturbationField(h0, np.exp(-r2 / 4))
    med = ElasticMedium(2.0, 1.0, None, h)
    w1, w2 = w
    F1 = -w1 ** 2 * U1 - elastic_spatial(U1, med, grid) + apply_H(U1, h, grid)
    F2 = -w2 ** 2 * U2 - elastic_spatial(U2, med, grid) + apply_H(U2, h, grid)
    steps = max(1, math.ceil(T / (cfl * grid.h / med.c1) - 1e-9))
    return ManufacturedProblem(grid, med, h, T / steps, steps, (w1, w2), (U1, U2, F1, F2))


def verify_identity(n: int = 64, delta: float = 0.25, T: float = 2.0, L: float = 8.0, cfl: float = 0.5,
                    seed: int = 3) -> ResidualReport:
    prob = manufactured_problem(n, L, T, cfl, seed)
    return identity_residual(prob.records(), prob.medium, prob.grid, delta, prob.h)


# -- space-time estimate runs --------------------------------------------------

def kss_free_run(grid: GridSpec, seed: int, T: float = 2.0, delta: float = 0.25,
                 medium: ElasticMedium | None = None, cfl: float = 0.5) -> tuple[KSSRatio, RunReport]:
    """Linear free evolution from a random localized displacement at rest;
    both sides of the space-time estimate accumulated at every step."""
    medium = ElasticMedium(2.0, 1.0) if medium is None else medium
    cfg = SolverConfig.from_cfl(grid, medium, T, cfl, dealias=False)
    u0 = random_localized_field(grid, seed)
    acc = KSSAccumulator(grid, delta)
    rep = simulate(cfg, (u0, np.zeros_like(u0)), "linear", observers=[acc.add])
    return acc.result(), rep


@dataclass
class KSSGrowth:
    T: np.ndarray
    integrals: np.ndarray
    fit: LogFit


def kss_growth_experiment(T_values=None, delta: float = 0.25, sigma: float = 1.0, c: float = 2.0) -> KSSGrowth:
    """Weighted space-time integral of an exact radial pressure wave at each
    ``T``, fitted by ``a log(2 + T) + b``."""
    T = np.geomspace(1.0, 200.0, 40) if T_values is None else np.asarray(T_values, dtype=float)
    wave = RadialWave(c=c, sigma=sigma)
    I = kss_growth(wave, T, delta)
    return KSSGrowth(np.sort(T), I, fit_log_growth(np.sort(T), I))


# -- Hodge check ---------------------------------------------------------------

def hodge_check(grid: GridSpec, seed: int) -> dict:
    """Relative residuals of the Hodge split for one random localized field.

    The field's grid mean (sampling error of order ``exp(-(pi w / h)^2)``
    for bump width ``w``) is removed first.
    """
    u = random_localized_field(grid, seed)
    u = u - u.mean(axis=(1, 2, 3), keepdims=True)
    pair = hodge_decompose(u, grid)
    nu = l2_norm(u, grid)
    Gu = np.sqrt(np.sum(gradient(u, grid) ** 2) * grid.cell_volume)
    g_cf = np.sqrt(np.sum(gradient(pair.u_cf, grid) ** 2) * grid.cell_volume)
    g_df = np.sqrt(np.sum(gradient(pair.u_df, grid) ** 2) * grid.cell_volume)
    return {
        "reconstruction": l2_norm(pair.u_cf + pair.u_df - u, grid) / nu,
        "curl_of_cf": l2_norm(curl(pair.u_cf, grid), grid) / Gu,
        "div_of_df": l2_norm(divergence(pair.u_df, grid), grid) / Gu,
        "parseval_l2": abs(nu ** 2 - l2_norm(pair.u_cf, grid) ** 2 - l2_norm(pair.u_df, grid) ** 2) / nu ** 2,
        "parseval_grad": abs(Gu ** 2 - g_cf ** 2 - g_df ** 2) / Gu ** 2,
    }


# -- lifespan sweep ------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    eps: float
    time: float           # blow-up time, or the horizon when censored
    censored: bool
    trigger: str          # blow-up trigger kind, "censored" otherwise
    n: int
    seed: int
    wall: float = 0.0


@dataclass(frozen=True)
class LifespanFit:
    kappa: float          # slope of log T against 1/eps
    intercept: float
    correlation: float
    points: int


@dataclass
class SweepResult:
    rows: list
    fit: LifespanFit | None
    config: RunConfig | None = None

    @property
    def uncensored(self) -> list:
        return [r for r in self.rows if not r.censored]


def fit_lifespan(rows, min_points: int = 4) -> LifespanFit | None:
    """Ordinary least squares of ``log T`` on ``1/eps`` over uncensored rows.

    Censored rows never enter; with fewer than ``min_points`` usable rows
    no fit is returned.
    """
    pts = [(1.0 / r.eps, math.log(r.time)) for r in rows if not r.censored and r.time > 0]
    if len(pts) < max(2, min_points):
        return None
    x, y = np.array(pts).T
    slope, icpt = np.polyfit(x, y, 1)
    corr = float(np.corrcoef(x, y)[0, 1]) if np.ptp(x) > 0 and np.ptp(y) > 0 else float("nan")
    return LifespanFit(float(slope), float(icpt), corr, len(pts))


def lifespan_horizon(eps: float, kappa0: float, T_cap: float) -> float:
    """``min(10 exp(kappa0 / eps), T_cap)``."""
    return min(10.0 * math.exp(min(kappa0 / eps, 700.0)), T_cap)


def _lifespan_point(args) -> SweepRow:
    cfg, eps, horizon, wall_budget = args
    cfg = replace(cfg, eps=eps, T=horizon)
    sc = cfg.solver_config()
    start = time.perf_counter()
    max_steps = None
    if wall_budget is not None:
        # calibrate the step cost on a short prefix, then cap the step count
        probe = min(sc.steps, 8)
        simulate(sc, cfg.data(), cfg.mode, max_steps=probe)
        per_step = (time.perf_counter() - start) / probe
        max_steps = max(1, int(wall_budget / max(per_step, 1e-9)))
    rep = simulate(sc, cfg.data(), cfg.mode, max_steps=max_steps)
    wall = time.perf_counter() - start
    if rep.blowup_time is not None:
        return SweepRow(eps, rep.blowup_time, False, rep.blowup_kind, cfg.n, cfg.seed, wall)
    reached = rep.steps * sc.dt
    return SweepRow(eps, reached, True, "censored", cfg.n, cfg.seed, wall)


def sweep_lifespan(eps_list, cfg: RunConfig, kappa0: float = 1.0, T_cap: float = 400.0,
                   wall_budget: float | None = None, workers: int = 1, min_points: int = 4) -> SweepResult:
    """Radial runs per amplitude until blow-up or the horizon
    ``min(10 exp(kappa0/eps), T_cap)``; rows reaching the horizon (or the
    per-point wall-clock budget) are censored."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("amplitude list is empty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("amplitude list must be strictly decreasing")
    jobs = [(cfg, e, lifespan_horizon(e, kappa0, T_cap), wall_budget) for e in eps_list]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_lifespan_point, jobs))
    else:
        rows = [_lifespan_point(j) for j in jobs]
    return SweepResult(rows, fit_lifespan(rows, min_points), cfg)


SWEEP_COLUMNS = ("eps", "time", "censored", "trigger", "n", "seed")


def sweep_rows(result: SweepResult):
    for r in result.rows:
        yield (r.eps, r.time, int(r.censored), r.trigger, r.n, r.seed)


# -- plot data -----------------------------------------------------------------

def _write_dat(path: Path, header: str, cols) -> Path:
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for row in zip(*cols):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    return path


def emit_plotdata(outdir, energy=None, kss=None, ratios=None, sweep: SweepResult | None = None,
                  bins: int = 20) -> list:
    """Plain-text column files for plotting.

    ``energy.dat``: ``t  ||du||``; ``kss_growth.dat``: ``log(2+T)  I(T)``;
    ``ratio_hist.dat``: ``bin_centre  count``; ``lifespan.dat``:
    ``1/eps  log T`` over uncensored rows, sorted by ``1/eps``.  Missing
    inputs give header-only files.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    t, e = energy if energy is not None else ((), ())
    T, I = kss if kss is not None else ((), ())
    paths = [
        _write_dat(out / "energy.dat", "t energy", (t, e)),
        _write_dat(out / "kss_growth.dat", "log(2+T) weighted_spacetime_integral",
                   (np.log(2 + np.asarray(T, dtype=float)), I)),
    ]
    r = np.asarray([] if ratios is None else ratios, dtype=float)
    r = r[np.isfinite(r)]
    if r.size:
        counts, edges = np.histogram(r, bins=bins)
        centres = 0.5 * (edges[1:] + edges[:-1])
    else:
        counts, centres = (), ()
    paths.append(_write_dat(out / "ratio_hist.dat", "ratio_bin_centre count", (centres, counts)))
    pts = sorted((1.0 / row.eps, math.log(row.time)) for row in (sweep.uncensored if sweep else []))
    paths.append(_write_dat(out / "lifespan.dat", "inv_eps log_T", tuple(zip(*pts)) if pts else ((), ())))
    return paths
