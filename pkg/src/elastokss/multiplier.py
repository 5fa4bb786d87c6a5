"""Radial multiplier ``M = f(r) d_r + f(r)/r`` with ``f = (r/(1+r))^(2 delta)``,
the densities of the multiplier identity, its pointwise lower bound, the
integrated identity residual and the space-time estimate ratio.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar

from .elastic import ElasticMedium, PerturbationField, flux_hat_divergence
from .grid import GridSpec, curl_hat, gradient, gradient_hat, irfft, radial_frames, rfft
from .hodge import hodge_hat

__all__ = [
    "FValues",
    "f_eval",
    "lap_f_over_r",
    "lower_bound_constant",
    "MultiplierDensities",
    "densities",
    "multiplier_apply",
    "div_M_df",
    "curl_M_cf",
    "LocalizationError",
    "ResidualReport",
    "identity_residual",
    "KSSRatio",
    "KSSAccumulator",
    "kss_ratio",
]


class FValues(NamedTuple):
    f: np.ndarray
    fp: np.ndarray
    angular_coef: np.ndarray    # f/r - f'/2
    lap_bound: np.ndarray       # upper bound of Delta(f/r)
    radial_coef: np.ndarray     # f' - f/r


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")


def f_eval(r, delta: float) -> FValues:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("f_eval needs r > 0")
    _check_delta(delta)
    base = r ** (2 * delta - 1) * (1 + r) ** (-2 * delta)
    return FValues(
        f=(r / (1 + r)) ** (2 * delta),
        fp=2 * delta * r ** (2 * delta - 1) * (1 + r) ** (-2 * delta - 1),
        angular_coef=base * (1 - delta / (1 + r)),
        lap_bound=-2 * delta * (1 - 2 * delta) * r ** (2 * delta - 3) * (1 + r) ** (-2 * delta - 2),
        radial_coef=base * (2 * delta / (1 + r) - 1),
    )


def lap_f_over_r(r, delta: float) -> np.ndarray:
    """Exact ``Delta(f/r) = -2 delta r^(2d-3) (1+r)^(-2d-2) (1 - 2 delta + 2 r)``."""
    r = np.asarray(r, dtype=float)
    return -2 * delta * r ** (2 * delta - 3) * (1 + r) ** (-2 * delta - 2) * (1 - 2 * delta + 2 * r)


def _bound_weights(r, delta):
    a = r ** (2 * delta - 1) * (1 + r) ** (-2 * delta - 1)
    b = r ** (2 * delta - 1) * (1 + r) ** (-2 * delta)
    d = r ** (2 * delta - 3) * (1 + r) ** (-2 * delta - 2)
    return a, b, d


def lower_bound_constant(delta: float, c1: float, c2: float, r_range=(1e-8, 1e8)) -> float:
    """Largest ``c`` with ``q1 + q2 >= c * (weighted quadratic terms)`` pointwise.

    Each density coefficient is divided by its weight and minimized over
    ``log r`` numerically; the answer is the smallest of these minima over
    both wave speeds.
    """
    _check_delta(delta)

    def ratios(logr, c):
        r = np.exp(logr)
        fv = f_eval(r, delta)
        a, b, d = _bound_weights(r, delta)
        lap = lap_f_over_r(r, delta)
        return (
            0.5 * fv.fp / a,
            0.5 * c * c * fv.fp / a,
            c * c * fv.angular_coef / b,
            -0.5 * c * c * lap / d,
        )

    lo, hi = np.log(r_range[0]), np.log(r_range[1])
    best = np.inf
    for c in (c1, c2):
        for idx in range(4):
            fun = lambda s, i=idx, c=c: float(ratios(s, c)[i])
            grid = np.linspace(lo, hi, 2001)
            vals = np.array([fun(s) for s in grid])
            j = int(np.argmin(vals))
            a_, b_ = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
            res = minimize_scalar(fun, bounds=(a_, b_), method="bounded", options={"xatol": 1e-12})
            best = min(best, vals[j], float(res.fun))
    return float(best)


# -- densities ---------------------------------------------------------------

@dataclass
class MultiplierDensities:
    e1: np.ndarray
    e2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    q4: np.ndarray
    q5: np.ndarray
    lower_bound_lhs: np.ndarray
    lower_bound_rhs: np.ndarray
    forcing: np.ndarray | None = None

    def lower_bound_violations(self, c: float) -> int:
        return int(np.count_nonzero(self.lower_bound_lhs - c * self.lower_bound_rhs < 0))


class _Frame:
    """Radial quantities on an offset grid, cached per ``(grid, delta)``."""

    _cache: dict = {}

    def __init__(self, grid: GridSpec, delta: float):
        r, om = radial_frames(grid)
        fv = f_eval(r, delta)
        self.r, self.om, self.fv = r, om, fv
        self.lap = lap_f_over_r(r, delta)
        self.a, self.b, self.d = _bound_weights(r, delta)

    @classmethod
    def get(cls, grid, delta):
        key = (grid, delta)
        if key not in cls._cache:
            cls._cache.clear()
            cls._cache[key] = cls(grid, delta)
        return cls._cache[key]


def _radial_parts(G, om):
    """``d_r u`` and the squared angular gradient from ``G[m, j] = d_m u^j``."""
    dr = np.einsum("m...,mj...->j...", om, G)
    ang = G - om[:, None] * dr[None]
    return dr, np.sum(ang * ang, axis=(0, 1))


def multiplier_apply(u: np.ndarray, grid: GridSpec, delta: float, G=None) -> np.ndarray:
    """``M u = f d_r u + (f/r) u``."""
    fr = _Frame.get(grid, delta)
    G = gradient(u, grid) if G is None else G
    dr = np.einsum("m...,mj...->j...", fr.om, G)
    return fr.fv.f * (dr + u / fr.r)


def div_M_df(u_df: np.ndarray, grid: GridSpec, delta: float, G=None) -> np.ndarray:
    """Closed form of ``div(M u_df)`` for divergence-free ``u_df``."""
    fr = _Frame.get(grid, delta)
    G = gradient(u_df, grid) if G is None else G
    dr = np.einsum("m...,mj...->j...", fr.om, G)
    return fr.fv.radial_coef * np.einsum("j...,j...->...", fr.om, dr + u_df / fr.r)


def curl_M_cf(u_cf: np.ndarray, grid: GridSpec, delta: float, G=None) -> np.ndarray:
    """Closed form of ``curl(M u_cf)`` for curl-free ``u_cf``."""
    fr = _Frame.get(grid, delta)
    G = gradient(u_cf, grid) if G is None else G
    dr = np.einsum("m...,mj...->j...", fr.om, G)
    w = dr + u_cf / fr.r
    return fr.fv.radial_coef * np.cross(fr.om, w, axis=0)


def _wave_density(fr: _Frame, c: float, u, v, G):
    """``e``, ``q`` and the lower-bound weight sum for one Hodge part."""
    dr, ang2 = _radial_parts(G, fr.om)
    f, fp = fr.fv.f, fr.fv.fp
    v2 = np.sum(v * v, axis=0)
    dr2 = np.sum(dr * dr, axis=0)
    u2 = np.sum(u * u, axis=0)
    e = f * np.sum(v * (dr + u / fr.r), axis=0)
    q = 0.5 * fp * v2 + c * c * 0.5 * fp * dr2 + c * c * fr.fv.angular_coef * ang2 - 0.5 * c * c * fr.lap * u2
    rhs = fr.a * v2 + fr.a * dr2 + fr.b * ang2 + fr.d * u2
    return e, q, rhs


def _inv_lap_parts(HU: np.ndarray, grid: GridSpec):
    """``div(Delta^-1 Hu)`` and ``curl(Delta^-1 Hu)`` from transformed ``Hu``."""
    k2 = grid.k2_odd.copy()
    zero = k2 == 0.0
    k2[zero] = 1.0
    W = -HU / k2
    W[:, zero] = 0.0
    kx, ky, kz = grid.kvec
    psi = irfft(1j * (kx * W[0] + ky * W[1] + kz * W[2]), grid)
    chi = irfft(curl_hat(W, grid), grid)
    return psi, chi


def densities(u: np.ndarray, v: np.ndarray, medium: ElasticMedium, grid: GridSpec, delta: float,
              h: PerturbationField | None = None, forcing: np.ndarray | None = None) -> MultiplierDensities:
    """All multiplier-identity densities at one time.

    ``v`` is the time derivative of ``u``.  ``h`` defaults to the medium's
    perturbation; with no perturbation ``q3 = q4 = q5 = 0``.  When a
    forcing ``F = L_h u`` is given, the density
    ``<M u_cf, F_cf> + <M u_df, F_df>`` is returned as well.
    """
    _check_delta(delta)
    fr = _Frame.get(grid, delta)
    h = medium.h if h is None else h
    U = rfft(u)
    U_cf, U_df = hodge_hat(U, grid)
    V_cf, V_df = hodge_hat(rfft(v), grid)
    u_cf, u_df = irfft(U_cf, grid), irfft(U_df, grid)
    v_cf, v_df = irfft(V_cf, grid), irfft(V_df, grid)
    G_cf, G_df = gradient_hat(U_cf, grid), gradient_hat(U_df, grid)

    e1, q1, rhs1 = _wave_density(fr, medium.c1, u_cf, v_cf, G_cf)
    e2, q2, rhs2 = _wave_density(fr, medium.c2, u_df, v_df, G_df)

    zero = np.zeros(grid.shape)
    q3 = q4 = q5 = zero
    if h is not None:
        G = G_cf + G_df
        sigma = h.flux(G)                                  # sigma[i, l] = h^{ij}_{lm} d_m u^j
        dr_u = np.einsum("k...,ki...->i...", fr.om, G)     # d_r u^i
        f, fp, r = fr.fv.f, fr.fv.fp, fr.r
        rad = (r * fp - f) / r
        s_rr = np.einsum("i...,il...,l...->...", dr_u, sigma, fr.om)
        s_tr = np.einsum("li...,il...->...", G, sigma)     # h d_l u^i d_m u^j
        s_u = np.einsum("i...,il...,l...->...", u, sigma, fr.om)
        dh = h.radial_derivative(grid)
        s_dh = np.einsum("li...,il...->...", G, dh.flux(G))
        q3 = -rad * s_rr + 0.5 * fp * s_tr + 0.5 * f * s_dh - (f / r) * s_tr - rad / r * s_u
        S = rfft(sigma)
        psi, chi = _inv_lap_parts(flux_hat_divergence(S, grid), grid)
        q4 = -div_M_df(u_df, grid, delta, G_df) * psi
        q5 = -np.sum(curl_M_cf(u_cf, grid, delta, G_cf) * chi, axis=0)

    forcing_density = None
    if forcing is not None:
        F_cf, F_df = hodge_hat(rfft(forcing), grid)
        Mcf = multiplier_apply(u_cf, grid, delta, G_cf)
        Mdf = multiplier_apply(u_df, grid, delta, G_df)
        forcing_density = np.sum(Mcf * irfft(F_cf, grid) + Mdf * irfft(F_df, grid), axis=0)

    return MultiplierDensities(e1, e2, q1, q2, q3, q4, q5, q1 + q2, rhs1 + rhs2, forcing_density)


# -- integrated identity -----------------------------------------------------

class LocalizationError(ValueError):
    """Field energy reached the box boundary, so the flux terms no longer vanish."""


def boundary_fraction(fields, grid: GridSpec, layer: float) -> float:
    x = grid.coords
    edge = np.max(np.abs(x), axis=0) >= grid.L - layer
    tot = 0.0
    out = 0.0
    for f in fields:
        s = f * f
        while s.ndim > 3:
            s = s.sum(axis=0)
        tot += s.sum()
        out += s[edge].sum()
    return float(out / tot) if tot > 0 else 0.0


@dataclass
class ResidualReport:
    residual: float
    normalized: float
    constituents: dict
    boundary_fraction: float
    min_q12: float
    lower_bound_violations: int
    times: np.ndarray = field(repr=False)

    @property
    def scale(self) -> float:
        return max(abs(v) for v in self.constituents.values())


def identity_residual(records: Iterable, medium: ElasticMedium, grid: GridSpec, delta: float,
                      h: PerturbationField | None = None, localization_tol: float = 1e-10,
                      boundary_layer: float | None = None, lower_bound_c: float | None = None) -> ResidualReport:
    """Integrated multiplier identity over a recorded time window.

    ``records`` yields ``(t, u, v, F)`` on a uniform time mesh, ``F = L_h u``
    (``None`` for free evolution).  Computes

        R = int int (q1 + q2 + q3 - q4 - q5) + [int (e1 + e2)]_0^T
            - int int (<M u_cf, F_cf> + <M u_df, F_df>)

    with the trapezoid rule in time; spatial flux terms integrate to zero on
    the torus for localized fields.
    """
    layer = 0.1 * grid.L if boundary_layer is None else boundary_layer
    c = lower_bound_constant(delta, medium.c1, medium.c2) if lower_bound_c is None else lower_bound_c
    times, qsum, q3s, q4s, q5s, q12s, fsum, esum = [], [], [], [], [], [], [], []
    worst_edge = 0.0
    min_q12 = np.inf
    viol = 0
    for t, u, v, F in records:
        worst_edge = max(worst_edge, boundary_fraction([u, v], grid, layer))
        d = densities(u, v, medium, grid, delta, h, F)
        vol = grid.cell_volume
        q12 = float(np.sum(d.q1 + d.q2) * vol)
        q3, q4, q5 = (float(np.sum(q) * vol) for q in (d.q3, d.q4, d.q5))
        times.append(t)
        q12s.append(q12)
        q3s.append(q3)
        q4s.append(q4)
        q5s.append(q5)
        qsum.append(q12 + q3 - q4 - q5)
        fsum.append(0.0 if d.forcing is None else float(np.sum(d.forcing) * vol))
        esum.append(float(np.sum(d.e1 + d.e2) * vol))
        min_q12 = min(min_q12, float(d.lower_bound_lhs.min()))
        viol += d.lower_bound_violations(c)
    if worst_edge > localization_tol:
        raise LocalizationError(
            f"{worst_edge:.2e} of the field energy reached the boundary layer (tolerance {localization_tol:.0e})")
    times = np.asarray(times)
    if times.size < 2:
        raise ValueError("identity residual needs at least two time samples")
    trap = lambda y: float(trapezoid(np.asarray(y), times))
    parts = {
        "q12": trap(q12s),
        "q3": trap(q3s),
        "q4": trap(q4s),
        "q5": trap(q5s),
        "e_boundary": esum[-1] - esum[0],
        "forcing": trap(fsum),
    }
    R = parts["q12"] + parts["q3"] - parts["q4"] - parts["q5"] + parts["e_boundary"] - parts["forcing"]
    scale = max(abs(x) for x in parts.values())
    norm = abs(R) / scale if scale > 0 else 0.0
    return ResidualReport(R, norm, parts, worst_edge, min_q12, viol, times)


# -- space-time estimate ratio ------------------------------------------------

@dataclass
class KSSRatio:
    lhs: float
    rhs: float
    ratio: float
    lhs0: float
    rhs0: float
    ratio0: float
    terms: dict
    degenerate: bool


class KSSAccumulator:
    """Streaming evaluation of both sides of the weighted space-time estimates.

    Feed ``(t, u, v, F)`` samples on a uniform mesh with :meth:`add`, then
    call :meth:`result`.  The estimate with ``<r>^-1/2, <r>^-3/2`` weights is
    reported alongside the ``delta`` version (suffix ``0``).
    """

    def __init__(self, grid: GridSpec, delta: float, h: PerturbationField | None = None):
        _check_delta(delta)
        r, _ = radial_frames(grid)
        br2 = 1 + r * r
        self.grid, self.delta, self.h = grid, delta, h
        self.w1 = br2 ** (-delta / 2) * r ** (-0.5 + delta)
        self.w2 = br2 ** (-delta / 2) * r ** (-1.5 + delta)
        self.w1_0 = br2 ** -0.25
        self.w2_0 = br2 ** -0.75
        self.inv_br = br2 ** -0.5
        self.hmag = None if h is None else h.magnitude()
        self.dh = None if h is None else h.gradient_magnitude(grid)
        self.t, self.rows = [], []

    def add(self, t, u, v, F=None):
        g = self.grid
        vol = g.cell_volume
        G = gradient(u, g)
        du2 = np.sum(v * v, axis=0) + np.sum(G * G, axis=(0, 1))
        u2 = np.sum(u * u, axis=0)
        row = {
            "du": np.sqrt(np.sum(du2) * vol),
            "kss_du": np.sum(self.w1 ** 2 * du2) * vol,
            "kss_u": np.sum(self.w2 ** 2 * u2) * vol,
            "kss0_du": np.sum(self.w1_0 ** 2 * du2) * vol,
            "kss0_u": np.sum(self.w2_0 ** 2 * u2) * vol,
            "F": 0.0 if F is None else np.sqrt(np.sum(F * F) * vol),
            "dh_gu": 0.0, "h_gu": 0.0, "wh_gu": 0.0,
        }
        if self.h is not None:
            gu = np.sqrt(np.sum(G * G, axis=(0, 1)))
            hg = self.hmag * gu
            row["dh_gu"] = np.sqrt(np.sum((self.dh * gu) ** 2) * vol)
            row["h_gu"] = np.sqrt(np.sum((self.inv_br * hg) ** 2) * vol)
            row["wh_gu"] = np.sum((self.w1 * hg) ** 2) * vol
        self.t.append(float(t))
        self.rows.append(row)

    def result(self) -> KSSRatio:
        if not self.rows:
            raise ValueError("no samples recorded")
        t = np.asarray(self.t)
        col = lambda k: np.array([r[k] for r in self.rows])
        T = t[-1] - t[0]
        trap = (lambda y: float(trapezoid(y, t))) if t.size > 1 else (lambda y: 0.0)
        lg = np.log(2 + T)
        terms = {
            "sup_du": float(col("du").max()),
            "kss_du": np.sqrt(trap(col("kss_du"))),
            "kss_u": np.sqrt(trap(col("kss_u"))),
            "kss0_du": np.sqrt(trap(col("kss0_du"))),
            "kss0_u": np.sqrt(trap(col("kss0_u"))),
            "du0": float(col("du")[0]),
            "F_L1L2": trap(col("F")),
            "dh_gu_L1L2": trap(col("dh_gu")),
            "h_gu_L1L2": trap(col("h_gu")),
            "wh_gu_L2L2": np.sqrt(trap(col("wh_gu"))),
            "log": lg,
        }
        lhs = terms["sup_du"] + (terms["kss_du"] + terms["kss_u"]) / np.sqrt(lg)
        lhs0 = terms["sup_du"] + (terms["kss0_du"] + terms["kss0_u"]) / np.sqrt(lg)
        rhs0 = terms["du0"] + terms["F_L1L2"] + terms["dh_gu_L1L2"] + terms["h_gu_L1L2"]
        rhs = rhs0 + np.sqrt(lg) * terms["wh_gu_L2L2"]
        degenerate = rhs == 0.0
        ratio = np.nan if degenerate else lhs / rhs
        ratio0 = np.nan if rhs0 == 0.0 else lhs0 / rhs0
        return KSSRatio(lhs, rhs, ratio, lhs0, rhs0, ratio0, terms, degenerate)


def kss_ratio(records: Iterable, grid: GridSpec, delta: float, h: PerturbationField | None = None) -> KSSRatio:
    """Quotient of the two sides of the weighted estimate with unit constants."""
    acc = KSSAccumulator(grid, delta, h)
    for rec in records:
        acc.add(*rec)
    return acc.result()
