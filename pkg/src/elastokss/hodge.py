"""Helmholtz-Hodge splitting and Riesz transforms on the periodic box."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, ZeroModeError, _mean_check, check_finite, irfft, l2_norm, rfft
from .weights import WeightSpec, weight

__all__ = ["HodgePair", "hodge_decompose", "hodge_hat", "riesz", "weighted_riesz_ratio", "RieszStats"]


@dataclass
class HodgePair:
    u_cf: np.ndarray
    u_df: np.ndarray


def _projector_parts(grid: GridSpec):
    k2 = grid.k2_odd.copy()
    zero = k2 == 0.0
    k2[zero] = 1.0
    return grid.kvec, k2, zero


def hodge_hat(U: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Split real-transform coefficients of a vector field.

    ``U_cf = k (k.U) / |k|^2``; modes with no resolvable wavevector (the mean
    and the pure-Nyquist corners) are assigned to the divergence-free part.
    """
    k, k2, zero = _projector_parts(grid)
    kdotu = (k[0] * U[0] + k[1] * U[1] + k[2] * U[2]) / k2
    kdotu[zero] = 0.0
    U_cf = np.stack([ki * kdotu for ki in k])
    return U_cf, U - U_cf


def hodge_decompose(u: np.ndarray, grid: GridSpec, tol: float = 1e-10) -> HodgePair:
    """Curl-free / divergence-free split ``u = u_cf + u_df``.

    Raises :class:`ZeroModeError` if any component carries a mean above
    ``tol`` times its RMS; constants are harmonic on the torus and belong to
    neither part.
    """
    check_finite(u)
    U = rfft(u)
    _mean_check(U, u, grid, tol, "harmonic (constant) component present; decomposition not unique on the torus")
    U_cf, U_df = hodge_hat(U, grid)
    U_df[..., 0, 0, 0] = 0.0
    return HodgePair(irfft(U_cf, grid), irfft(U_df, grid))


def riesz(i: int, f: np.ndarray, grid: GridSpec, tol: float = 1e-10) -> np.ndarray:
    """Riesz transform ``R_i = d_i / sqrt(-Delta)``; multiplier ``i k_i / |k|``."""
    check_finite(f)
    F = rfft(f)
    _mean_check(F, f, grid, tol, "Riesz transform needs a zero-mean field")
    kabs = np.sqrt(grid.k2)
    kabs[0, 0, 0] = 1.0
    return irfft(1j * grid.kvec[i] / kabs * F, grid)


@dataclass
class RieszStats:
    delta: float
    ratios: np.ndarray
    seeds: list[int]

    @property
    def max(self) -> float:
        return float(self.ratios.max())

    @property
    def mean(self) -> float:
        return float(self.ratios.mean())

    def histogram(self, bins: int = 10) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.ratios, bins=bins)


def riesz_ratio(f: np.ndarray, grid: GridSpec, delta: float, axis: int = 0) -> float:
    """``||w R_i f|| / ||w f||`` with ``w = <r>^-delta r^(-1/2+delta)``."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2) for the weighted Riesz bound, got {delta}")
    w = weight(WeightSpec("W_KSS1", delta), grid)
    den = l2_norm(w * f, grid)
    if den == 0.0:
        raise ValueError("ratio undefined for the zero field")
    return l2_norm(w * riesz(axis, f, grid), grid) / den


def weighted_riesz_ratio(delta: float, seeds, grid: GridSpec, axis: int = 0) -> RieszStats:
    """Ensemble of weighted Riesz ratios over random zero-mean localized fields."""
    from .fields import random_scalar_field

    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2) for the weighted Riesz bound, got {delta}")
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    seeds = list(seeds)
    ratios = np.array([riesz_ratio(random_scalar_field(grid, s), grid, delta, axis) for s in seeds])
    return RieszStats(delta, ratios, seeds)
