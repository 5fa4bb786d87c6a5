"""Elastic operators: the isotropic spatial operator, the divergence-form
perturbation ``H``, the quadratic nonlinearity ``N`` and the rotation
vector fields ``Z = (grad, simultaneous rotations)``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, check_finite, gradient, gradient_hat, irfft, partial, read_snapshot, rfft, write_snapshot
from .hodge import hodge_hat
from .tensors import DEFAULT_D, Tensor6, isotropic_g
from .weights import SupportWarning, check_support

__all__ = [
    "ElasticMedium",
    "PerturbationField",
    "SMALLNESS_FLAG",
    "elastic_spatial",
    "elastic_hat",
    "apply_H",
    "apply_H_hat",
    "apply_N",
    "apply_N_hat",
    "flux_hat_divergence",
    "linearized_perturbation",
    "rotation_field",
    "Z_LABELS",
    "apply_z",
    "iter_z_words",
    "z_derivatives",
    "default_medium",
]

SMALLNESS_FLAG = 0.1


@dataclass(frozen=True)
class ElasticMedium:
    """Wave speeds ``c1 > c2 > 0``, nonlinearity tensor and optional perturbation."""

    c1: float = 2.0
    c2: float = 1.0
    g: Tensor6 | None = None
    h: "PerturbationField | None" = None

    def __post_init__(self):
        if not 0.0 < self.c2 < self.c1:
            raise ValueError(f"wave speeds must satisfy 0 < c2 < c1, got c1={self.c1}, c2={self.c2}")


def default_medium(with_g: bool = True) -> ElasticMedium:
    return ElasticMedium(2.0, 1.0, isotropic_g(DEFAULT_D) if with_g else None)


# -- linear operator -----------------------------------------------------------

def elastic_hat(U: np.ndarray, medium: ElasticMedium, grid: GridSpec) -> np.ndarray:
    """``A = c2^2 Delta + (c1^2 - c2^2) grad div`` on real-transform coefficients.

    Written through the Hodge projector, so the curl-free and
    divergence-free parts are scaled by ``-c1^2 |k|^2`` and ``-c2^2 |k|^2``.
    """
    U_cf, U_df = hodge_hat(U, grid)
    return -grid.k2 * (medium.c1 ** 2 * U_cf + medium.c2 ** 2 * U_df)


def elastic_spatial(u: np.ndarray, medium: ElasticMedium, grid: GridSpec) -> np.ndarray:
    check_finite(u)
    return irfft(elastic_hat(rfft(u), medium, grid), grid)


# -- perturbation --------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationField:
    """Coefficients ``h^{ij}_{lm}`` stored as ``coeffs[i, j, l, m]``.

    ``coeffs`` is either a constant ``(3, 3, 3, 3)`` tensor or a full field
    of shape ``(3, 3, 3, 3, n, n, n)``.  An optional scalar ``profile``
    multiplies a constant tensor pointwise, which keeps smooth localized
    perturbations cheap.
    """

    coeffs: np.ndarray
    profile: np.ndarray | None = None
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape[:4] != (3, 3, 3, 3) or c.ndim not in (4, 7):
            raise ValueError(f"perturbation coefficients need shape (3,3,3,3[,n,n,n]), got {c.shape}")
        if self.profile is not None and c.ndim != 4:
            raise ValueError("a profile can only multiply a constant coefficient tensor")
        check_finite(c, "perturbation")
        object.__setattr__(self, "coeffs", c)
        self.check_symmetry()

    @property
    def constant(self) -> bool:
        return self.coeffs.ndim == 4 and self.profile is None

    def check_symmetry(self) -> None:
        c = self.coeffs
        swapped = c.transpose((1, 0, 3, 2) + tuple(range(4, c.ndim)))
        bad = np.argwhere(c != swapped)
        if bad.size:
            i, j, l, m = (int(x) + 1 for x in bad[0][:4])
            raise ValueError(f"perturbation is not symmetric: h^{{{i}{j}}}_{{{l}{m}}} != h^{{{j}{i}}}_{{{m}{l}}}")

    def magnitude(self) -> np.ndarray | float:
        """Pointwise ``|h| = sum |h^{ij}_{lm}|``."""
        s = np.abs(self.coeffs).sum(axis=(0, 1, 2, 3))
        if self.profile is not None:
            return s * np.abs(self.profile)
        return s

    @property
    def sup(self) -> float:
        return float(np.max(self.magnitude()))

    @property
    def small(self) -> bool:
        """False when ``sup |h|`` reaches the smallness flag level."""
        return self.sup < SMALLNESS_FLAG

    def flux(self, G: np.ndarray) -> np.ndarray:
        """``sigma[i, l] = h^{ij}_{lm} G[m, j]`` for a gradient ``G[m, j] = d_m u^j``."""
        if self.coeffs.ndim == 4:
            s = np.einsum("ijlm,mj...->il...", self.coeffs, G, optimize=True)
            return s if self.profile is None else s * self.profile
        return np.einsum("ijlm...,mj...->il...", self.coeffs, G, optimize=True)

    def radial_derivative(self, grid: GridSpec) -> "PerturbationField":
        """``omega . grad h`` (zero for constant coefficients)."""
        from .grid import radial_frames

        _, om = radial_frames(grid)
        if self.constant:
            return PerturbationField(np.zeros((3, 3, 3, 3)))
        if self.profile is not None:
            gp = gradient(self.profile, grid)
            return PerturbationField(self.coeffs, np.einsum("i...,i...->...", om, gp))
        d = sum(om[k] * partial(self.coeffs, k, grid) for k in range(3))
        return PerturbationField(d)

    def gradient_magnitude(self, grid: GridSpec) -> np.ndarray | float:
        """Pointwise ``|grad h| = (sum over components and directions of (d_k h)^2)^(1/2)``."""
        if self.constant:
            return 0.0
        if self.profile is not None:
            gp = gradient(self.profile, grid)
            return np.sqrt(np.sum(self.coeffs ** 2)) * np.sqrt(np.sum(gp * gp, axis=0))
        tot = 0.0
        for k in range(3):
            d = partial(self.coeffs, k, grid)
            tot = tot + np.sum(d * d, axis=(0, 1, 2, 3))
        return np.sqrt(tot)

    def dense(self, grid: GridSpec) -> np.ndarray:
        c = self.coeffs
        if c.ndim == 7:
            return c
        base = c[..., None, None, None] * np.ones(grid.shape)
        return base if self.profile is None else base * self.profile

    def save(self, path, grid: GridSpec) -> None:
        write_snapshot(path, self.dense(grid).reshape((81,) + grid.shape), grid)

    @classmethod
    def load(cls, path) -> tuple["PerturbationField", GridSpec]:
        data, grid = read_snapshot(path)
        return cls(data.reshape((3, 3, 3, 3) + grid.shape)), grid


def flux_hat_divergence(S: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``sum_l i k_l S[i, l]`` for transformed fluxes ``S[i, l]``."""
    kx, ky, kz = grid.kvec
    return 1j * (kx * S[:, 0] + ky * S[:, 1] + kz * S[:, 2])


def apply_H_hat(U: np.ndarray, h: PerturbationField, grid: GridSpec, mask=None) -> np.ndarray:
    G = gradient_hat(U if mask is None else U * mask, grid)
    S = rfft(h.flux(G))
    if mask is not None:
        S *= mask
    return flux_hat_divergence(S, grid)


def apply_H(u: np.ndarray, h: PerturbationField, grid: GridSpec) -> np.ndarray:
    """``(Hu)^i = d_l (h^{ij}_{lm} d_m u^j)``; the outer derivative is spectral,
    so every component of the result integrates to zero."""
    check_finite(u)
    return irfft(apply_H_hat(rfft(u), h, grid), grid)


def linearized_perturbation(g: Tensor6, u: np.ndarray, grid: GridSpec) -> PerturbationField:
    """``h^{ij}_{lm} = g^{ijk}_{lmn} d_n u^k``, so that ``H u = N(u, u)`` up to sign.

    The pair symmetry of ``g`` makes ``h`` symmetric.
    """
    G = gradient(u, grid)
    h = np.einsum("ijklmn,nk...->ijlm...", g.coeffs, G, optimize=True)
    return PerturbationField(h)


# -- nonlinearity --------------------------------------------------------------

_CHUNK = 1 << 15


def _contract(gmat: np.ndarray, Gu: np.ndarray, Gv: np.ndarray) -> np.ndarray:
    """Flux ``[i, l]`` from gradients ``G[m, j]`` via the ``(9, 81)`` matrix."""
    shape = Gu.shape[2:]
    a = Gu.transpose(1, 0, *range(2, Gu.ndim)).reshape(9, -1)   # rows (j, m)
    b = Gv.transpose(1, 0, *range(2, Gv.ndim)).reshape(9, -1)   # rows (k, n)
    npts = a.shape[1]
    out = np.empty((9, npts))
    for s in range(0, npts, _CHUNK):
        e = min(s + _CHUNK, npts)
        prod = (a[:, None, s:e] * b[None, :, s:e]).reshape(81, e - s)
        out[:, s:e] = gmat @ prod
    return out.reshape((3, 3) + shape)


def apply_N_hat(U: np.ndarray, V: np.ndarray, g: Tensor6, grid: GridSpec, mask=None) -> np.ndarray:
    if mask is not None:
        U = U * mask
        V = V * mask if V is not U else U
    Gu = gradient_hat(U, grid)
    Gv = Gu if V is U else gradient_hat(V, grid)
    S = rfft(_contract(g.as_matrix(), Gu, Gv))
    if mask is not None:
        S *= mask
    return flux_hat_divergence(S, grid)


def apply_N(u: np.ndarray, v: np.ndarray, g: Tensor6, grid: GridSpec, dealias: bool = False) -> np.ndarray:
    """``N(u, v)^i = d_l (g^{ijk}_{lmn} d_m u^j d_n v^k)``.

    With ``dealias`` the inputs and the pointwise product are truncated by
    the two-thirds mask before the outer derivative.
    """
    check_finite(u)
    check_finite(v)
    mask = grid.dealias_mask() if dealias else None
    U = rfft(u)
    V = U if v is u else rfft(v)
    return irfft(apply_N_hat(U, V, g, grid, mask), grid)


# -- rotation fields -----------------------------------------------------------

def rotation_field(i: int, j: int, u: np.ndarray, grid: GridSpec, check: bool = True) -> np.ndarray:
    """Simultaneous rotation ``(x_i d_j - x_j d_i) u + (e_i (x) e_j - e_j (x) e_i) u``.

    Axes are 0-based.  Coordinates multiply in physical space, so the
    result is only meaningful for fields localized well inside the box; a
    :class:`SupportWarning` is issued otherwise.
    """
    if i == j:
        raise ValueError("rotation needs two distinct axes")
    check_finite(u)
    if check:
        check_support(u, grid)
    x = grid.coords
    U = rfft(u)
    out = x[i] * irfft(1j * grid.kvec[j] * U, grid) - x[j] * irfft(1j * grid.kvec[i] * U, grid)
    if u.ndim == 4:
        out[i] += u[j]
        out[j] -= u[i]
    return out


Z_LABELS = ("d1", "d2", "d3", "O12", "O13", "O23")
_ROT = {"O12": (0, 1), "O13": (0, 2), "O23": (1, 2)}
OMEGA_LABELS = ("O12", "O13", "O23")
GRAD_LABELS = ("d1", "d2", "d3")


def apply_z(label: str, u: np.ndarray, grid: GridSpec) -> np.ndarray:
    if label in _ROT:
        return rotation_field(*_ROT[label], u, grid, check=False)
    return partial(u, int(label[1]) - 1, grid)


def iter_z_words(u: np.ndarray, k: int, grid: GridSpec, labels=Z_LABELS):
    """Depth-first ``(word, Z^word u)`` for all ordered words of length ``<= k``.

    The word ``(a1, ..., ak)`` means ``Z_a1 (Z_a2 (... Z_ak u))``.  Only one
    branch of intermediate fields is alive at a time.
    """
    if k > 3:
        raise ValueError(f"order {k} refused: more than 3 nested vector fields is too costly")
    if any(lab in _ROT for lab in labels):
        check_support(u, grid)

    def rec(word, f, depth):
        yield word, f
        if depth == k:
            return
        for lab in labels:
            yield from rec((lab,) + word, apply_z(lab, f, grid), depth + 1)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportWarning)
        yield from rec((), u, 0)


def z_derivatives(u: np.ndarray, k: int, grid: GridSpec, labels=Z_LABELS) -> list[np.ndarray]:
    """All ordered products ``Z^a u`` with ``|a| <= k`` (no deduplication).

    Order: shorter words first, then lexicographic in ``labels``.
    """
    words = dict(iter_z_words(u, k, grid, labels))
    keys = [w for n in range(k + 1) for w in itertools.product(labels, repeat=n)]
    return [words[w] for w in keys]
