"""Exact free-space radial solutions of the linear elastic system.

A radial field ``u = x phi(r)`` is a gradient, ``u = grad Phi``, so it only
carries pressure waves: ``Phi`` solves the scalar wave equation with speed
``c1`` and ``W = r Phi`` solves the 1-D wave equation on the half line with
``W(0, t) = 0``.  With Gaussian profiles the d'Alembert solution is in
closed form, which gives the weighted space-time integrals on all of R^3
for times far beyond what a periodic box can host.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

__all__ = ["RadialWave", "kss_growth", "fit_log_growth", "LogFit"]


@dataclass(frozen=True)
class RadialWave:
    """Solution with ``u(0) = A x exp(-r^2/sigma^2)``, ``u_t(0) = B x exp(-r^2/tau^2)``."""

    c: float = 2.0
    A: float = 1.0
    sigma: float = 1.0
    B: float = 0.0
    tau: float = 1.0

    # W0(s) = s Phi0(s), Phi0 = -(A sigma^2 / 2) exp(-s^2/sigma^2)
    def _w0(self, s, d):
        a = -0.5 * self.A * self.sigma ** 2
        s2 = self.sigma ** 2
        e = np.exp(-s * s / s2)
        if d == 0:
            return a * s * e
        if d == 1:
            return a * (1 - 2 * s * s / s2) * e
        if d == 2:
            return a * (-6 * s / s2 + 4 * s ** 3 / s2 ** 2) * e
        return a * (-6 / s2 + 24 * s * s / s2 ** 2 - 8 * s ** 4 / s2 ** 3) * e

    # Q' = s Psi0(s), Psi0 = -(B tau^2 / 2) exp(-s^2/tau^2)
    def _q(self, s, d):
        b = -0.5 * self.B * self.tau ** 2
        t2 = self.tau ** 2
        e = np.exp(-s * s / t2)
        if d == 0:
            return -0.5 * b * t2 * e
        if d == 1:
            return b * s * e
        if d == 2:
            return b * (1 - 2 * s * s / t2) * e
        return b * (-6 * s / t2 + 4 * s ** 3 / t2 ** 2) * e

    def _W(self, r, t, dr=0, dt=0):
        """Derivatives of ``W = r Phi``; only ``dt <= 1`` is needed."""
        c = self.c
        m, p = r - c * t, r + c * t
        if dt == 0:
            return 0.5 * (self._w0(m, dr) + self._w0(p, dr)) + (self._q(p, dr) - self._q(m, dr)) / (2 * c)
        return 0.5 * c * (self._w0(p, dr + 1) - self._w0(m, dr + 1)) + 0.5 * (self._q(p, dr + 1) + self._q(m, dr + 1))

    def derivatives(self, r, t):
        """``(Phi_r, Phi_rr, Phi_tr)`` at radius ``r > 0`` and time ``t``."""
        r = np.asarray(r, dtype=float)
        W, Wr, Wrr = self._W(r, t), self._W(r, t, 1), self._W(r, t, 2)
        Wt, Wtr = self._W(r, t, 0, 1), self._W(r, t, 1, 1)
        phi_r = Wr / r - W / r ** 2
        phi_rr = Wrr / r - 2 * Wr / r ** 2 + 2 * W / r ** 3
        phi_tr = Wtr / r - Wt / r ** 2
        return phi_r, phi_rr, phi_tr

    def field(self, x: np.ndarray, t: float):
        """``(u, u_t)`` sampled at points ``x`` of shape ``(3, ...)``."""
        r = np.sqrt(np.einsum("i...,i...->...", x, x))
        phi_r, _, phi_tr = self.derivatives(r, t)
        return x * (phi_r / r), x * (phi_tr / r)

    def du_squared(self, r, t):
        """``|d_t u|^2 + |grad u|^2``; the Hessian of ``Phi`` has eigenvalues
        ``Phi_rr`` and ``Phi_r / r`` (twice)."""
        phi_r, phi_rr, phi_tr = self.derivatives(r, t)
        return phi_tr ** 2 + phi_rr ** 2 + 2 * (phi_r / r) ** 2

    def u_squared(self, r, t):
        phi_r, _, _ = self.derivatives(r, t)
        return phi_r ** 2


def _panels(a, b, width):
    n = max(1, int(np.ceil((b - a) / width)))
    return np.linspace(a, b, n + 1)


def _gl_nodes(edges, order):
    x, w = roots_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    return (lo + half * (x + 1)).ravel(), (half * w).ravel()


def _weighted_energy(wave: RadialWave, t: float, delta: float, r_min: float, order: int) -> float:
    """``int <r>^-2d r^(-1+2d) |du|^2 dx`` over R^3 at one time."""
    s = max(wave.sigma, wave.tau)
    reach = 9.0 * s
    front = wave.c * t
    pieces = [(r_min, reach)]
    if front - reach > reach:
        pieces.append((front - reach, front + reach))
    else:
        pieces = [(r_min, front + reach)]
    tot = 0.0
    for a, b in pieces:
        r, w = _gl_nodes(_panels(a, b, 0.25 * min(wave.sigma, wave.tau)), order)
        weight = (1 + r * r) ** (-delta) * r ** (-1 + 2 * delta)
        tot += np.sum(w * 4 * np.pi * r * r * weight * wave.du_squared(r, t))
    return float(tot)


def kss_growth(wave: RadialWave, T_values, delta: float = 0.25, r_min: float = 1e-3,
               order: int = 12, t_panels_per_decade: int = 24) -> np.ndarray:
    """``||<r>^-d r^(-1/2+d) du||^2_{L^2 L^2([0,T] x R^3)}`` for each ``T``.

    Gauss-Legendre panels in ``r`` around the origin and around the
    outgoing front ``r = c t``; in time, uniform panels up to ``t = 1`` and
    log-spaced panels beyond.  The ball ``r < r_min`` is dropped (its
    contribution is ``O(r_min^(2 + 2 delta))``).
    """
    T_values = np.asarray(sorted(T_values), dtype=float)
    T_max = T_values[-1]
    first = np.linspace(0.0, min(1.0, T_max), 9)
    edges = list(first)
    if T_max > 1.0:
        n_dec = np.log10(T_max)
        edges += list(np.logspace(0, n_dec, max(2, int(np.ceil(n_dec * t_panels_per_decade)) + 1))[1:])
    edges = np.unique(np.concatenate([edges, T_values]))
    out = []
    acc = 0.0
    x, w = roots_legendre(order)
    k = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        ts = lo + half * (x + 1)
        acc += half * sum(wi * _weighted_energy(wave, ti, delta, r_min, order) for ti, wi in zip(ts, w))
        while k < T_values.size and np.isclose(T_values[k], hi):
            out.append(acc)
            k += 1
    while k < T_values.size:
        out.append(acc)
        k += 1
    return np.asarray(out)


@dataclass(frozen=True)
class LogFit:
    a: float
    b: float
    max_relative_residual: float
    rms_relative_residual: float
    relative_l2_residual: float

    def predict(self, T):
        return self.a * np.log(2 + np.asarray(T, dtype=float)) + self.b


def fit_log_growth(T_values, integrals) -> LogFit:
    """Least-squares fit ``I(T) = a log(2 + T) + b``.

    Residuals are reported pointwise relative to ``I(T)`` and as
    ``||I - I_fit||_2 / ||I||_2`` over the sample.
    """
    T = np.asarray(T_values, dtype=float)
    I = np.asarray(integrals, dtype=float)
    X = np.stack([np.log(2 + T), np.ones_like(T)], axis=1)
    (a, b), *_ = np.linalg.lstsq(X, I, rcond=None)
    res = X @ np.array([a, b]) - I
    rel = np.abs(res) / np.abs(I)
    return LogFit(float(a), float(b), float(rel.max()), float(np.sqrt(np.mean(rel ** 2))),
                  float(np.linalg.norm(res) / np.linalg.norm(I)))
