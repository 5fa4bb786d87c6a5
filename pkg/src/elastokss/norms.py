"""Space-time solution norms built from vector-field words ``Z^a u``.

The ``Z`` variant uses words over ``(d1, d2, d3, O12, O13, O23)`` and the
plain variant words over ``(d1, d2, d3)`` only.  For a history on
``[0, T]`` and order ``k`` the norm is

    sum_a sup_t ||d Z^a u||
      + log(2+T)^-1/2 sum_a ||W_KSS1 d Z^a u||_{L^2_t L^2_x}
      + log(2+T)^-1/2 sum_a ||W_KSS2 Z^a u||_{L^2_t L^2_x}

with ``|a| <= k - 1`` and ``d = (d_t, grad)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.integrate import trapezoid

from .elastic import GRAD_LABELS, Z_LABELS, iter_z_words
from .grid import GridSpec, gradient, rfft
from .weights import WeightSpec, weight

__all__ = ["XNormBreakdown", "x_norm", "VARIANTS", "hs_seminorm", "h1_norm"]

VARIANTS = {"Z": Z_LABELS, "grad": GRAD_LABELS}
_MAX_K = {"Z": 4, "grad": 3}


@dataclass(frozen=True)
class XNormBreakdown:
    energy_sup: float
    kss_grad: float
    kss_field: float
    k: int
    variant: str
    T: float
    words: int

    @property
    def total(self) -> float:
        return self.energy_sup + self.kss_grad + self.kss_field


def x_norm(history: Iterable, k: int, delta: float, grid: GridSpec, variant: str = "Z",
           T: float | None = None) -> XNormBreakdown:
    """Evaluate the norm on samples ``(t, u, v)`` uniform in ``t``.

    ``T`` defaults to the last sample time minus the first.  Time
    integrals use the trapezoid rule and the sup is a max over samples.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {sorted(VARIANTS)}")
    if not 1 <= k <= _MAX_K[variant]:
        raise ValueError(f"order k must lie in [1, {_MAX_K[variant]}] for the {variant} variant")
    if not 0 < delta <= 0.25:
        raise ValueError(f"delta must lie in (0, 1/4], got {delta}")
    labels = VARIANTS[variant]
    w1 = weight(WeightSpec("W_KSS1", delta), grid) ** 2
    w2 = weight(WeightSpec("W_KSS2", delta), grid) ** 2
    vol = grid.cell_volume
    times: list[float] = []
    rows: list[dict] = []
    for t, u, v in history:
        row = {}
        vw = dict(iter_z_words(v, k - 1, grid, labels))
        for word, zu in iter_z_words(u, k - 1, grid, labels):
            zv = vw[word]
            G = gradient(zu, grid)
            d2 = np.sum(zv * zv, axis=0) + np.sum(G * G, axis=(0, 1))
            row[word] = (
                np.sqrt(np.sum(d2) * vol),
                np.sum(w1 * d2) * vol,
                np.sum(w2 * np.sum(zu * zu, axis=0)) * vol,
            )
        times.append(float(t))
        rows.append(row)
    if not rows:
        raise ValueError("empty history")
    t = np.asarray(times)
    span = (t[-1] - t[0]) if T is None else T
    lg = np.log(2.0 + span)
    words = list(rows[0])
    energy = sum(max(r[w][0] for r in rows) for w in words)
    if t.size > 1:
        kg = sum(np.sqrt(trapezoid([r[w][1] for r in rows], t)) for w in words)
        kf = sum(np.sqrt(trapezoid([r[w][2] for r in rows], t)) for w in words)
    else:
        kg = kf = 0.0
    return XNormBreakdown(float(energy), float(kg / np.sqrt(lg)), float(kf / np.sqrt(lg)), k, variant,
                          float(span), len(words))


def hs_seminorm(u: np.ndarray, s: float, grid: GridSpec) -> float:
    """``|| |k|^s u_hat ||`` in physical normalisation (torus stand-in for the
    homogeneous Sobolev seminorm)."""
    F = rfft(u)
    w = grid.rweights * grid.volume / grid.n ** 6
    kk = grid.k2 ** (0.5 * s)
    return float(np.sqrt(np.sum(np.abs(kk * F) ** 2 * w)))


def h1_norm(u: np.ndarray, grid: GridSpec) -> float:
    G = gradient(u, grid)
    return float(np.sqrt((np.sum(u * u) + np.sum(G * G)) * grid.cell_volume))
