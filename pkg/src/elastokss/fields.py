"""Seeded test-field generators.

All fields are built from closed-form Gaussians, so a given seed describes
the same physical field at every resolution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec

__all__ = [
    "GaussianProfile",
    "gaussian_bumps",
    "random_localized_field",
    "random_scalar_field",
    "radial_field",
]


@dataclass(frozen=True)
class GaussianProfile:
    """Radial profile ``phi(r) = amplitude * exp(-r^2 / width^2)``."""

    amplitude: float = 1.0
    width: float = 1.0

    def __call__(self, r):
        return self.amplitude * np.exp(-(np.asarray(r) / self.width) ** 2)

    def potential(self, r):
        """``Phi`` with ``Phi'(r) = r phi(r)``, vanishing at infinity."""
        return -0.5 * self.amplitude * self.width ** 2 * np.exp(-(np.asarray(r) / self.width) ** 2)


def radial_field(profile, grid: GridSpec) -> np.ndarray:
    """The radial vector field ``x phi(|x|)``."""
    x = grid.coords
    r = np.sqrt(np.einsum("i...,i...->...", x, x))
    return x * profile(r)


@dataclass(frozen=True)
class _Bumps:
    centers: np.ndarray   # (B, 3)
    widths: np.ndarray    # (B,)
    amps: np.ndarray      # (B,) or (B, 3)


def gaussian_bumps(rng: np.random.Generator, count: int, vector: bool,
                   center_radius: float = 1.0, widths=(0.7, 1.1)) -> _Bumps:
    c = rng.normal(size=(count, 3))
    c *= (center_radius * rng.uniform(size=count) ** (1 / 3) / np.linalg.norm(c, axis=1))[:, None]
    w = rng.uniform(*widths, size=count)
    a = rng.normal(size=(count, 3) if vector else count)
    return _Bumps(c, w, a)


def _gauss(grid: GridSpec, c, s):
    d = grid.coords - np.asarray(c)[:, None, None, None]
    return d, np.exp(-np.einsum("i...,i...->...", d, d) / s ** 2)


def random_localized_field(grid: GridSpec, seed: int, count: int = 3, center_radius: float = 1.0,
                           widths=(0.7, 1.1)) -> np.ndarray:
    """Zero-mean localized vector field ``grad(phi) + curl(A)``.

    ``phi`` and ``A`` are sums of ``count`` Gaussians with random centres,
    widths and amplitudes; derivatives are taken in closed form.
    """
    rng = np.random.default_rng(seed)
    sb = gaussian_bumps(rng, count, False, center_radius, widths)
    vb = gaussian_bumps(rng, count, True, center_radius, widths)
    u = grid.zeros(3)
    for c, s, a in zip(sb.centers, sb.widths, sb.amps):
        d, g = _gauss(grid, c, s)
        u += a * (-2.0 / s ** 2) * d * g
    for c, s, a in zip(vb.centers, vb.widths, vb.amps):
        d, g = _gauss(grid, c, s)
        grad = (-2.0 / s ** 2) * d * g
        u += np.stack([
            grad[1] * a[2] - grad[2] * a[1],
            grad[2] * a[0] - grad[0] * a[2],
            grad[0] * a[1] - grad[1] * a[0],
        ])
    return u


def random_scalar_field(grid: GridSpec, seed: int, count: int = 3, center_radius: float = 1.0,
                        widths=(0.7, 1.1)) -> np.ndarray:
    """Zero-mean localized scalar field: a sum of Laplacians of Gaussians.

    The sampled mean (nonzero on coarse grids) is subtracted.
    """
    rng = np.random.default_rng(seed)
    b = gaussian_bumps(rng, count, False, center_radius, widths)
    f = grid.zeros()
    for c, s, a in zip(b.centers, b.widths, b.amps):
        d, g = _gauss(grid, c, s)
        rr = np.einsum("i...,i...->...", d, d)
        f += a * s ** 2 * (4.0 * rr / s ** 4 - 6.0 / s ** 2) * g
    return f - f.mean()
