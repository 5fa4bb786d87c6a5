"""Empirical ratio checks for weighted Sobolev, trace, Hardy and weighted
Riesz inequalities.

Every check evaluates both sides numerically and returns ``lhs / rhs``.
Nothing here asserts a constant: ensembles over seeded random fields
report the spread of the ratios, which is what the test-suite monitors.

Conventions: sup norms are grid maxima over the support window
``|x| <= 0.6 L`` (lower bounds of the true sup); angular norms come from
trilinear resampling onto spherical shells; ``Z`` words run over
``(d1, d2, d3, O12, O13, O23)`` and rotation words over ``(O12, O13, O23)``.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .elastic import OMEGA_LABELS, Z_LABELS, iter_z_words
from .fields import random_localized_field, random_scalar_field
from .grid import GridSpec, gradient, l2_norm, radial_frames
from .hodge import riesz_ratio
from .norms import h1_norm, hs_seminorm
from .weights import SupportWarning, WeightSpec, angular_norms, resample_shells, shell_grid, weight

__all__ = [
    "CHECKS",
    "RatioReport",
    "FieldContext",
    "inequality_check",
    "run_checks",
    "EnsembleReport",
    "ensemble",
    "write_ratio_csv",
]

WINDOW = 0.6


@dataclass
class RatioReport:
    which: str
    lhs: float
    rhs: float
    ratio: float
    status: str          # "ok", "degenerate" (0/0) or "artifact" (rhs = 0 < lhs)
    detail: dict = field(default_factory=dict)


def _norm(f, vol, w=None):
    s = f * f
    while s.ndim > 3:
        s = s.sum(axis=0)
    if w is not None:
        s = s * w * w
    return float(np.sqrt(np.sum(s) * vol))


class FieldContext:
    """Derived quantities of one vector field, computed lazily and shared
    between checks."""

    def __init__(self, u: np.ndarray, grid: GridSpec, delta: float = 0.25, n_theta: int = 32):
        self.u, self.grid, self.delta, self.n_theta = u, grid, delta, n_theta
        self.vol = grid.cell_volume
        r, om = radial_frames(grid)
        self.r, self.om = r, om
        self.window = r <= WINDOW * grid.L

    # weights
    @cached_property
    def w_half(self):
        return weight(WeightSpec("W_HALF", self.delta), self.grid)

    @cached_property
    def w1(self):
        return weight(WeightSpec("W_KSS1", self.delta), self.grid)

    @cached_property
    def w2(self):
        return weight(WeightSpec("W_KSS2", self.delta), self.grid)

    @cached_property
    def magnitude(self):
        return np.sqrt(np.sum(self.u * self.u, axis=0))

    @cached_property
    def shells(self):
        return shell_grid(self.grid, self.n_theta)

    @cached_property
    def shell_values(self):
        return resample_shells(self.u, self.grid, self.shells)

    def angular(self, q):
        return angular_norms(self.shell_values, self.shells, q)

    # exterior integrals: int_{|y| >= r_s} |f|^2 at every shell radius
    @cached_property
    def _sorted_r(self):
        flat = self.r.ravel()
        order = np.argsort(flat, kind="stable")
        return order, flat[order]

    def exterior(self, dens):
        order, rs = self._sorted_r
        d = dens.ravel()[order]
        tail = np.concatenate([np.cumsum(d[::-1])[::-1], [0.0]]) * self.vol
        idx = np.searchsorted(rs, self.shells.radii, side="left")
        return tail[idx]

    # word sums
    @cached_property
    def z_sums(self):
        """Sums over ``Z`` words of ``||<r>^-1/2 Z^a u||`` by word length."""
        out = {0: 0.0, 1: 0.0, 2: 0.0}
        for word, f in iter_z_words(self.u, 2, self.grid, Z_LABELS):
            out[len(word)] += _norm(f, self.vol, self.w_half)
        return out

    @cached_property
    def omega_sums(self):
        """Per word length, sums over rotation words of the norms used below."""
        keys = ("plain", "half", "grad", "grad_half", "w1_grad", "w1", "w2")
        out = {n: dict.fromkeys(keys, 0.0) for n in range(3)}
        ext_plain = {n: 0.0 for n in range(3)}
        ext_dr = {n: 0.0 for n in range(2)}
        for word, f in iter_z_words(self.u, 2, self.grid, OMEGA_LABELS):
            n = len(word)
            d = out[n]
            dens = np.sum(f * f, axis=0)
            d["plain"] += float(np.sqrt(np.sum(dens) * self.vol))
            d["half"] += float(np.sqrt(np.sum(dens * self.w_half ** 2) * self.vol))
            d["w1"] += float(np.sqrt(np.sum(dens * self.w1 ** 2) * self.vol))
            d["w2"] += float(np.sqrt(np.sum(dens * self.w2 ** 2) * self.vol))
            ext_plain[n] = ext_plain[n] + np.sqrt(self.exterior(dens))
            if n <= 1:
                G = gradient(f, self.grid)
                g2 = np.sum(G * G, axis=(0, 1))
                d["grad"] += float(np.sqrt(np.sum(g2) * self.vol))
                d["grad_half"] += float(np.sqrt(np.sum(g2 * self.w_half ** 2) * self.vol))
                d["w1_grad"] += float(np.sqrt(np.sum(g2 * self.w1 ** 2) * self.vol))
                dr = np.einsum("m...,mj...->j...", self.om, G)
                ext_dr[n] = ext_dr[n] + np.sqrt(self.exterior(np.sum(dr * dr, axis=0)))
        self._ext_plain, self._ext_dr = ext_plain, ext_dr
        return out

    def osum(self, key, max_len):
        return sum(self.omega_sums[n][key] for n in range(max_len + 1))

    def ext_plain(self, max_len):
        self.omega_sums
        return sum(self._ext_plain[n] for n in range(max_len + 1))

    def ext_dr(self, max_len):
        self.omega_sums
        return sum(self._ext_dr[n] for n in range(max_len + 1))


# -- individual checks (each returns lhs, rhs, detail) -------------------------

def _pointwise_decay(c: FieldContext, **kw):
    lhs = float(np.max((np.sqrt(1 + c.r ** 2) ** 0.5 * c.magnitude)[c.window]))
    return lhs, sum(c.z_sums.values()), {}


def _angular_embedding(c: FieldContext, q: float = 6.0, **kw):
    from .weights import radial_reduce

    lhs = radial_reduce(c.angular(q), c.shells, 2)
    return lhs, c.osum("plain", 1), {"q": q}


def _trace_far(c: FieldContext, p: float = 4.0, **kw):
    r = c.shells.radii
    keep = (r >= 1.0) & (r <= WINDOW * c.grid.L)
    lhs = float(np.max(np.sqrt(r[keep]) * c.angular(p)[keep]))
    return lhs, c.z_sums[0] + c.z_sums[1], {"p": p}


def _trace_sobolev(c: FieldContext, s: float = 0.75, **kw):
    p = 2.0 / (1.5 - s)
    r = c.shells.radii
    keep = r <= WINDOW * c.grid.L
    lhs = float(np.max((r ** (1.5 - s) * c.angular(p))[keep]))
    return lhs, h1_norm(c.u, c.grid), {"s": s, "p": p}


def _fractional_trace(c: FieldContext, s: float = 0.75, **kw):
    p = 2.0 / (1.5 - s)
    r = c.shells.radii
    keep = r <= WINDOW * c.grid.L
    lhs = float(np.max((r ** (1.5 - s) * c.angular(p))[keep]))
    return lhs, hs_seminorm(c.u, s, c.grid), {"s": s, "p": p}


def _interpolation(c: FieldContext, s: float = 0.5, **kw):
    lhs = hs_seminorm(c.u, s, c.grid)
    rhs = l2_norm(c.u, c.grid) ** (1 - s) * hs_seminorm(c.u, 1.0, c.grid) ** s
    return lhs, rhs, {"s": s}


def _shellwise(c: FieldContext, lhs_r, rhs_r, rel_floor: float):
    r = c.shells.radii
    keep = (r <= WINDOW * c.grid.L) & (lhs_r >= rel_floor * lhs_r.max()) & (rhs_r > 0)
    if not np.any(keep):
        return float(lhs_r.max()), 0.0, {}
    q = np.where(keep, lhs_r / np.where(rhs_r > 0, rhs_r, 1.0), -np.inf)
    j = int(np.argmax(q))
    return float(lhs_r[j]), float(rhs_r[j]), {"radius": float(r[j])}


def _exterior_sup(c: FieldContext, rel_floor: float = 1e-6, **kw):
    lhs_r = c.shells.radii * c.angular(np.inf)
    rhs_r = np.sqrt(c.ext_dr(1)) * np.sqrt(c.ext_plain(2))
    return _shellwise(c, lhs_r, rhs_r, rel_floor)


def _exterior_l4(c: FieldContext, rel_floor: float = 1e-6, **kw):
    lhs_r = c.shells.radii * c.angular(4.0)
    rhs_r = np.sqrt(c.ext_dr(0)) * np.sqrt(c.ext_plain(1))
    return _shellwise(c, lhs_r, rhs_r, rel_floor)


def _radial_sup_far(c: FieldContext, **kw):
    sel = c.window & (c.r >= 1.0)
    lhs = float(np.max((np.sqrt(c.r) * c.magnitude)[sel]))
    return lhs, c.osum("grad_half", 1) + c.osum("half", 2), {}


def _radial_sup_near(c: FieldContext, **kw):
    sel = c.r <= 1.0
    lhs = float(np.max((c.r ** (0.5 - c.delta) * c.magnitude)[sel]))
    return lhs, c.osum("w1_grad", 1) + c.osum("w1", 1) + c.osum("w2", 1), {}


def _sup_half(c: FieldContext, **kw):
    lhs = float(np.max((np.sqrt(c.r) * c.magnitude)[c.window]))
    return lhs, c.osum("grad", 1), {}


def _hardy(c: FieldContext, **kw):
    lhs = _norm(c.u / c.r, c.vol)
    return lhs, _norm(gradient(c.u, c.grid), c.vol), {}


CHECKS = {
    "pointwise_decay": _pointwise_decay,
    "angular_embedding": _angular_embedding,
    "trace_far": _trace_far,
    "trace_sobolev": _trace_sobolev,
    "exterior_sup": _exterior_sup,
    "exterior_l4": _exterior_l4,
    "fractional_trace": _fractional_trace,
    "interpolation": _interpolation,
    "radial_sup_far": _radial_sup_far,
    "radial_sup_near": _radial_sup_near,
    "sup_half": _sup_half,
    "hardy": _hardy,
    "weighted_riesz": None,
}


def _report(which, lhs, rhs, detail) -> RatioReport:
    if rhs == 0.0:
        status = "degenerate" if lhs == 0.0 else "artifact"
        if status == "artifact":
            detail = dict(detail, note="right side vanished on the grid while the left did not; discretization artifact")
        return RatioReport(which, lhs, rhs, float("nan"), status, detail)
    return RatioReport(which, lhs, rhs, lhs / rhs, "ok", detail)


def run_checks(u: np.ndarray, grid: GridSpec, names=None, delta: float = 0.25, **kw) -> dict[str, RatioReport]:
    """Several checks on one vector field sharing the word computations."""
    names = [n for n in CHECKS if n != "weighted_riesz"] if names is None else list(names)
    ctx = FieldContext(u, grid, delta)
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportWarning)
        for name in names:
            if name == "weighted_riesz":
                out[name] = inequality_check(name, u, grid, delta)
                continue
            if name not in CHECKS:
                raise ValueError(f"unknown inequality check {name!r}")
            if not np.any(u):
                out[name] = RatioReport(name, 0.0, 0.0, float("nan"), "degenerate")
                continue
            lhs, rhs, detail = CHECKS[name](ctx, **kw)
            out[name] = _report(name, lhs, rhs, detail)
    return out


def inequality_check(which: str, u: np.ndarray, grid: GridSpec, delta: float = 0.25, **kw) -> RatioReport:
    """Ratio report for one inequality.

    ``weighted_riesz`` takes a zero-mean scalar field (or uses the first
    component of a vector field); every other check takes a vector field.
    """
    if which not in CHECKS:
        raise ValueError(f"unknown inequality check {which!r}")
    if which == "weighted_riesz":
        f = u if u.ndim == 3 else u[0] - u[0].mean()
        if not np.any(f):
            return RatioReport(which, 0.0, 0.0, float("nan"), "degenerate")
        rho = riesz_ratio(f, grid, delta, kw.get("axis", 0))
        return RatioReport(which, rho, 1.0, rho, "ok", {"delta": delta})
    return run_checks(u, grid, [which], delta, **kw)[which]


# -- ensembles -----------------------------------------------------------------

@dataclass
class EnsembleReport:
    which: str
    seeds: list
    ratios: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    n: int
    L: float
    delta: float

    @property
    def max(self) -> float:
        return float(np.nanmax(self.ratios))

    @property
    def median(self) -> float:
        return float(np.nanmedian(self.ratios))

    def flagged(self, factor: float = 3.0) -> list:
        """Seeds whose ratio exceeds ``factor`` times the ensemble median."""
        med = self.median
        return [s for s, q in zip(self.seeds, self.ratios) if q > factor * med]

    def rows(self):
        for s, l, r, q in zip(self.seeds, self.lhs, self.rhs, self.ratios):
            yield (self.which, s, self.n, self.L, self.delta, l, r, q)


def ensemble(names, seeds, grid: GridSpec, delta: float = 0.25, **kw) -> dict[str, EnsembleReport]:
    """Run checks over seeded random localized fields.

    Vector checks use :func:`random_localized_field`; the weighted Riesz
    check uses :func:`random_scalar_field` with the same seeds.
    """
    names = [names] if isinstance(names, str) else list(names)
    seeds = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    acc = {n: ([], [], []) for n in names}
    vec_names = [n for n in names if n != "weighted_riesz"]
    for s in seeds:
        if vec_names:
            reps = run_checks(random_localized_field(grid, s), grid, vec_names, delta, **kw)
            for n, rep in reps.items():
                for lst, val in zip(acc[n], (rep.lhs, rep.rhs, rep.ratio)):
                    lst.append(val)
        if "weighted_riesz" in names:
            rep = inequality_check("weighted_riesz", random_scalar_field(grid, s), grid, delta)
            for lst, val in zip(acc["weighted_riesz"], (rep.lhs, rep.rhs, rep.ratio)):
                lst.append(val)
    return {n: EnsembleReport(n, seeds, np.array(acc[n][2]), np.array(acc[n][0]), np.array(acc[n][1]),
                              grid.n, grid.L, delta) for n in names}


CSV_HEADER = ("inequality", "seed", "n", "L", "delta", "lhs", "rhs", "ratio")


def write_ratio_csv(path, reports, header_line: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_line:
            fh.write(header_line + "\n")
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for rep in reports:
            for row in rep.rows():
                w.writerow([row[0], row[1], row[2], repr(float(row[3])), repr(float(row[4])),
                            repr(float(row[5])), repr(float(row[6])), repr(float(row[7]))])
