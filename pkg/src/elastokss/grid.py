"""Uniform periodic grid, Fourier transforms and spectral calculus.

Fields are plain numpy arrays: a scalar field has shape ``(n, n, n)`` and a
vector field ``(3, n, n, n)``; array axis ``a`` of a field runs along the
coordinate ``x_{a+1}``.  Higher-rank fields (gradients, tensor fields) carry
their extra indices in front.

Public coefficients follow the convention

    f(x) = sum_k c_k exp(i k.x),   c_k = (1/n^3) sum_x f(x) exp(-i k.x),

with physical wavevectors ``k = (pi/L) m`` and integer ``m`` in FFT order.
With this normalisation ``cos(pi x_1/L)`` has the two coefficients 1/2 at
``m = +-(1, 0, 0)`` and Parseval reads ``int |f|^2 dx = (2L)^3 sum |c_k|^2``.

Operators work on real-to-complex transforms internally.  Odd multipliers
(first derivatives) drop the Nyquist plane so that they map real fields to
real fields and commute exactly; even multipliers keep it.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "NonFiniteFieldError",
    "ZeroModeError",
    "check_finite",
    "fft_forward",
    "fft_inverse",
    "rfft",
    "irfft",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "inverse_laplacian",
    "partial",
    "radial_frames",
    "integrate",
    "inner",
    "l2_norm",
    "write_snapshot",
    "read_snapshot",
]

_AXES = (-3, -2, -1)


class NonFiniteFieldError(ValueError):
    """A field contains NaN or Inf samples."""


class ZeroModeError(ValueError):
    """An operation that has no inverse on constants received a constant part."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic box ``[-L, L)^3`` sampled with ``n`` points per axis.

    With ``offset`` the samples sit at cell centres,
    ``x_j = -L + (j + 1/2) h``, so that no sample lands on ``r = 0``.
    """

    n: int
    L: float
    offset: bool = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 8, got {self.n!r}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** 3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def x1d(self) -> np.ndarray:
        shift = 0.5 if self.offset else 0.0
        return -self.L + (np.arange(self.n) + shift) * self.h

    @cached_property
    def coords(self) -> np.ndarray:
        """Centred coordinates, shape ``(3, n, n, n)``."""
        x = self.x1d
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    @cached_property
    def m1d(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, 1.0 / self.n)

    @cached_property
    def _kfull(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = np.pi / self.L
        kx = (s * self.m1d)[:, None, None]
        ky = (s * self.m1d)[None, :, None]
        kz = (s * np.fft.rfftfreq(self.n, 1.0 / self.n))[None, None, :]
        return kx, ky, kz

    @cached_property
    def kvec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavevector components for odd multipliers (Nyquist removed)."""
        half = self.n // 2
        out = []
        for ax, k in enumerate(self._kfull):
            k = k.copy()
            idx = [slice(None)] * 3
            idx[ax] = half
            k[tuple(idx)] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the real-transform layout, Nyquist included."""
        kx, ky, kz = self._kfull
        return kx ** 2 + ky ** 2 + kz ** 2

    @cached_property
    def k2_odd(self) -> np.ndarray:
        kx, ky, kz = self.kvec
        return kx ** 2 + ky ** 2 + kz ** 2

    @cached_property
    def rweights(self) -> np.ndarray:
        """Multiplicity of each real-transform coefficient in a full sum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, None, :]

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer wave numbers |m| on the real-transform layout."""
        mx = self.m1d[:, None, None]
        my = self.m1d[None, :, None]
        mz = np.fft.rfftfreq(self.n, 1.0 / self.n)[None, None, :]
        return np.sqrt(mx ** 2 + my ** 2 + mz ** 2)

    def dealias_mask(self) -> np.ndarray:
        """Spherical two-thirds truncation: keep modes with ``|m| < n/3``."""
        return self.mode_index < self.n / 3.0

    def zeros(self, *lead: int) -> np.ndarray:
        return np.zeros(lead + self.shape)


def check_finite(f: np.ndarray, name: str = "field") -> None:
    if not np.all(np.isfinite(f)):
        bad = np.argwhere(~np.isfinite(f))[0]
        raise NonFiniteFieldError(f"{name} has a non-finite sample at index {tuple(int(i) for i in bad)}")


def rfft(f: np.ndarray) -> np.ndarray:
    """Real-to-complex transform over the three spatial axes (unnormalised)."""
    return sfft.rfftn(f, axes=_AXES, workers=-1)


def irfft(F: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.irfftn(F, s=grid.shape, axes=_AXES, workers=-1)


def _phase(grid: GridSpec) -> np.ndarray:
    x0 = grid.x1d[0]
    s = np.pi / grid.L
    p = np.exp(-1j * s * grid.m1d * x0)
    return p[:, None, None] * p[None, :, None] * p[None, None, :]


def fft_forward(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Fourier coefficients of a real field on the full ``(n, n, n)`` layout."""
    check_finite(f)
    F = sfft.fftn(f, axes=_AXES, norm="forward", workers=-1)
    return F * _phase(grid)


def fft_inverse(F: np.ndarray, grid: GridSpec) -> np.ndarray:
    f = sfft.ifftn(F / _phase(grid), axes=_AXES, norm="forward", workers=-1)
    return f.real


def partial(f: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    """Spectral derivative along ``x_{axis+1}`` of any field."""
    return irfft(1j * grid.kvec[axis] * rfft(f), grid)


def gradient(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Gradient with the derivative index in front.

    A scalar field gives shape ``(3, n, n, n)``; a vector field ``u`` gives
    ``G[m, j] = d_m u^j`` with shape ``(3, 3, n, n, n)``.
    """
    check_finite(f)
    F = rfft(f)
    return np.stack([irfft(1j * k * F, grid) for k in grid.kvec])


def gradient_hat(F: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.stack([irfft(1j * k * F, grid) for k in grid.kvec])


def divergence(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    check_finite(u)
    U = rfft(u)
    return irfft(sum(1j * k * U[i] for i, k in enumerate(grid.kvec)), grid)


def curl(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    check_finite(u)
    return irfft(curl_hat(rfft(u), grid), grid)


def curl_hat(U: np.ndarray, grid: GridSpec) -> np.ndarray:
    kx, ky, kz = grid.kvec
    return 1j * np.stack([
        ky * U[2] - kz * U[1],
        kz * U[0] - kx * U[2],
        kx * U[1] - ky * U[0],
    ])


def laplacian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    check_finite(f)
    return irfft(-grid.k2 * rfft(f), grid)


def _mean_check(F: np.ndarray, f: np.ndarray, grid: GridSpec, tol: float, what: str) -> None:
    n3 = grid.n ** 3
    means = np.abs(np.atleast_1d(F[..., 0, 0, 0].real / n3).ravel())
    rms = np.sqrt(np.mean(f * f))
    if np.any(means > tol * max(rms, np.finfo(float).tiny)):
        raise ZeroModeError(what)


def inverse_laplacian(f: np.ndarray, grid: GridSpec, tol: float = 1e-10) -> np.ndarray:
    """Solve ``Delta g = f`` for zero-mean ``g``.

    The box mean of ``f`` must be below ``tol`` times its RMS value.
    """
    check_finite(f)
    F = rfft(f)
    _mean_check(F, f, grid, tol, "inverse Laplacian undefined on constants")
    k2 = grid.k2.copy()
    k2[0, 0, 0] = 1.0
    G = -F / k2
    G[..., 0, 0, 0] = 0.0
    return irfft(G, grid)


def radial_frames(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``r = |x|`` and the unit radial field ``omega = x / r``."""
    if not grid.offset:
        raise ValueError("radial frames need an offset grid: r = 0 is a grid point otherwise")
    x = grid.coords
    r = np.sqrt(np.einsum("i...,i...->...", x, x))
    return r, x / r


def integrate(f: np.ndarray, grid: GridSpec) -> float | np.ndarray:
    """Rectangle-rule integral over the box (spectrally exact for trig modes)."""
    return np.sum(f, axis=_AXES) * grid.cell_volume


def inner(u: np.ndarray, v: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(u * v) * grid.cell_volume)


def l2_norm(u: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(np.sum(u * u) * grid.cell_volume))


# -- snapshots ---------------------------------------------------------------

_MAGIC = b"EKSS"
_VERSION = 1
_HEADER = struct.Struct("<4sIIdBI")


def write_snapshot(path: str | Path, field: np.ndarray, grid: GridSpec) -> None:
    """Binary dump: header then little-endian f64 samples, x_1 fastest."""
    data = np.asarray(field, dtype="<f8")
    comps = data.reshape((-1,) + grid.shape)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, grid.n, grid.L, int(grid.offset), comps.shape[0]))
        for c in comps:
            fh.write(np.ascontiguousarray(c.transpose(2, 1, 0)).tobytes())


def read_snapshot(path: str | Path) -> tuple[np.ndarray, GridSpec]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, n, L, offset, ncomp = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        raw = np.frombuffer(fh.read(), dtype="<f8")
    grid = GridSpec(n, L, bool(offset))
    if raw.size != ncomp * n ** 3:
        raise ValueError(f"{path}: truncated payload")
    comps = raw.reshape(ncomp, n, n, n).transpose(0, 3, 2, 1).astype(float)
    return (comps[0] if ncomp == 1 else comps), grid
