"""Radial weights, weighted L2 norms and mixed radial/angular norms."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import map_coordinates

from .grid import GridSpec, radial_frames

__all__ = [
    "WeightSpec",
    "KINDS",
    "SupportWarning",
    "weight",
    "weight_fn",
    "weighted_l2",
    "support_fraction",
    "check_support",
    "ShellGrid",
    "shell_grid",
    "resample_shells",
    "mixed_norm",
    "angular_norms",
]

KINDS = ("W_HALF", "W_3HALF", "W_KSS1", "W_KSS2", "W_INV")
_SINGULAR = {"W_KSS1", "W_KSS2"}


class SupportWarning(UserWarning):
    """Field energy outside the window where coordinate multiplication is valid."""


@dataclass(frozen=True)
class WeightSpec:
    """One of the radial weights used in the space-time norms.

    ``W_HALF = <r>^-1/2``, ``W_3HALF = <r>^-3/2``,
    ``W_KSS1 = <r>^-d r^(-1/2+d)``, ``W_KSS2 = <r>^-d r^(-3/2+d)``,
    ``W_INV = <r>^-1``.
    """

    kind: str
    delta: float = 0.25

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not 0.0 < self.delta <= 0.5:
            raise ValueError(f"delta must lie in (0, 1/2], got {self.delta}")

    @property
    def singular(self) -> bool:
        return self.kind in _SINGULAR


def weight_fn(spec: WeightSpec, r):
    r = np.asarray(r, dtype=float)
    br = np.sqrt(1.0 + r * r)
    d = spec.delta
    if spec.kind == "W_HALF":
        return br ** -0.5
    if spec.kind == "W_3HALF":
        return br ** -1.5
    if spec.kind == "W_INV":
        return 1.0 / br
    if spec.kind == "W_KSS1":
        return br ** -d * r ** (-0.5 + d)
    return br ** -d * r ** (-1.5 + d)


def weight(spec: WeightSpec, grid: GridSpec) -> np.ndarray:
    if spec.singular and not grid.offset:
        raise ValueError(f"{spec.kind} is singular at r = 0 and needs an offset grid")
    return weight_fn(spec, _radius(grid))


def _radius(grid: GridSpec) -> np.ndarray:
    x = grid.coords
    return np.sqrt(np.einsum("i...,i...->...", x, x))


def weighted_l2(u: np.ndarray, spec: WeightSpec, grid: GridSpec) -> float:
    """``||w(r) u||_2`` by the rectangle rule; vector/tensor indices are summed.

    Integrands with the singular kinds are only first-order accurate near
    the origin.
    """
    w2 = weight(spec, grid) ** 2
    s = u * u
    while s.ndim > 3:
        s = s.sum(axis=0)
    return float(np.sqrt(np.sum(w2 * s) * grid.cell_volume))


def support_fraction(u: np.ndarray, grid: GridSpec, radius: float) -> float:
    """Fraction of ``int |u|^2`` lying outside the ball of the given radius."""
    r = _radius(grid)
    s = u * u
    while s.ndim > 3:
        s = s.sum(axis=0)
    total = s.sum()
    if total == 0.0:
        return 0.0
    return float(s[r > radius].sum() / total)


def check_support(u: np.ndarray, grid: GridSpec, frac: float = 0.6, tol: float = 1e-8) -> bool:
    """Warn (and return False) if ``u`` is not localized in ``|x| <= frac L``."""
    out = support_fraction(u, grid, frac * grid.L)
    if out > tol:
        warnings.warn(
            f"{out:.2e} of the field energy lies outside |x| <= {frac}L; coordinate multiplication is unreliable",
            SupportWarning,
            stacklevel=3,
        )
        return False
    return True


# -- shell resampling --------------------------------------------------------

@dataclass(frozen=True)
class ShellGrid:
    radii: np.ndarray          # (N_shell,)
    dr: float
    theta: np.ndarray          # (n_theta,)
    phi: np.ndarray            # (2 n_theta,)
    dOmega: np.ndarray         # (n_theta, 1) solid-angle weights

    @property
    def points_shape(self) -> tuple[int, int, int]:
        return (self.radii.size, self.theta.size, self.phi.size)


@lru_cache(maxsize=16)
def shell_grid(grid: GridSpec, n_theta: int = 32, n_shell: int | None = None, r_max: float | None = None) -> ShellGrid:
    """Midpoint shells on ``(0, r_max]`` and a midpoint lat-long sphere grid."""
    n_shell = n_shell or grid.n // 2
    r_max = r_max or grid.L
    dr = r_max / n_shell
    radii = (np.arange(n_shell) + 0.5) * dr
    dth = np.pi / n_theta
    theta = (np.arange(n_theta) + 0.5) * dth
    dph = 2.0 * np.pi / (2 * n_theta)
    phi = np.arange(2 * n_theta) * dph
    dOmega = (np.sin(theta) * dth * dph)[:, None]
    return ShellGrid(radii, dr, theta, phi, dOmega)


def resample_shells(f: np.ndarray, grid: GridSpec, shells: ShellGrid) -> np.ndarray:
    """Trilinear interpolation of ``f`` onto the shell points.

    Leading (component) axes of ``f`` are kept; result shape is
    ``lead + (N_shell, n_theta, 2 n_theta)``.
    """
    r = shells.radii[:, None, None]
    th = shells.theta[None, :, None]
    ph = shells.phi[None, None, :]
    pts = np.stack(np.broadcast_arrays(
        r * np.sin(th) * np.cos(ph),
        r * np.sin(th) * np.sin(ph),
        r * np.cos(th),
    ))
    shift = 0.5 if grid.offset else 0.0
    idx = (pts + grid.L) / grid.h - shift
    flat = idx.reshape(3, -1)
    lead = f.shape[:-3]
    fs = f.reshape((-1,) + grid.shape)
    out = np.stack([map_coordinates(c, flat, order=1, mode="grid-wrap") for c in fs])
    return out.reshape(lead + shells.points_shape)


def angular_norms(vals: np.ndarray, shells: ShellGrid, q: float) -> np.ndarray:
    """``||u(r .)||_{L^q(S^2)}`` per shell from resampled values.

    Vector components (leading axes) are combined with the Euclidean norm
    before the angular integral.  The surface measure is the standard one
    (total mass 4 pi).
    """
    mag = vals * vals
    while mag.ndim > 3:
        mag = mag.sum(axis=0)
    mag = np.sqrt(mag)
    if np.isinf(q):
        return mag.max(axis=(1, 2))
    return (np.sum(mag ** q * shells.dOmega, axis=(1, 2))) ** (1.0 / q)


def mixed_norm(u: np.ndarray, grid: GridSpec, p_r: float, q_w: float,
               r_min: float = 0.0, r_max: float | None = None, radial_weight=None,
               n_theta: int = 32) -> float:
    """Mixed norm ``|| ||u(r w)||_{L^q_w} ||_{L^p_r(r^2 dr)}``.

    ``p_r`` is 2 or inf; ``q_w`` lies in ``[2, inf)``.  Shells with radius
    outside ``[r_min, r_max]`` are ignored; ``radial_weight(r)`` multiplies
    the angular norm shell by shell.
    """
    if p_r not in (2, np.inf):
        raise ValueError("p_r must be 2 or inf")
    if not 2.0 <= q_w < np.inf:
        raise ValueError("q_w must lie in [2, inf)")
    check_support(u, grid)
    shells = shell_grid(grid, n_theta)
    ang = angular_norms(resample_shells(u, grid, shells), shells, q_w)
    return radial_reduce(ang, shells, p_r, r_min, r_max, radial_weight)


def radial_reduce(ang: np.ndarray, shells: ShellGrid, p_r: float, r_min: float = 0.0,
                  r_max: float | None = None, radial_weight=None) -> float:
    r = shells.radii
    keep = r >= r_min
    if r_max is not None:
        keep &= r <= r_max
    vals = ang[keep]
    if radial_weight is not None:
        vals = vals * radial_weight(r[keep])
    if vals.size == 0:
        return 0.0
    if np.isinf(p_r):
        return float(vals.max())
    return float(np.sqrt(np.sum(vals ** 2 * r[keep] ** 2) * shells.dr))
