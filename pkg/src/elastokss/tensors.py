"""Six-index isotropic tensors with pair symmetry.

Index convention: ``g[i, j, k, l, m, n]`` stores ``g^{ijk}_{lmn}``, so the
three (upper, lower) pairs are ``(i, l)``, ``(j, m)`` and ``(k, n)``.  The
pair symmetry ``g^{ijk}_{lmn} = g^{jik}_{mln} = g^{kji}_{nml}`` makes ``g``
invariant under every permutation of the three pairs.

Isotropic six-tensors in three dimensions are spanned by the 15 products of
three Kronecker deltas.  Averaging each product over the pair permutations
groups the 15 pairings into 5 orbits; the orbit averages form the basis used
by :func:`isotropic_g`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

__all__ = [
    "Tensor6",
    "isotropic_g",
    "pairings",
    "symmetric_basis",
    "symmetrize",
    "BASIS_SIZE",
    "rotate",
    "random_rotation",
    "DEFAULT_D",
]

# position of each index in g[i, j, k, l, m, n]
_PAIRS = ((0, 3), (1, 4), (2, 5))
_PAIR_PERMS = list(itertools.permutations(range(3)))


def pairings() -> list[tuple[tuple[int, int], ...]]:
    """All 15 ways to split six index slots into three delta pairs."""
    out = []

    def rec(rest, acc):
        if not rest:
            out.append(tuple(acc))
            return
        a = rest[0]
        for b in rest[1:]:
            rec([x for x in rest if x not in (a, b)], acc + [(a, b)])

    rec(list(range(6)), [])
    return out


def _delta_product(pairing) -> np.ndarray:
    eye = np.eye(3)
    letters = "ijklmn"
    subs = ",".join(letters[a] + letters[b] for a, b in pairing)
    return np.einsum(subs + "->" + letters, *([eye] * 3))


def _pair_permutation_axes(perm) -> list[int]:
    # slot s of pair p moves to slot s of pair perm[p]
    axes = [0] * 6
    for p, q in enumerate(perm):
        for s in range(2):
            axes[_PAIRS[q][s]] = _PAIRS[p][s]
    return axes


def symmetrize(g: np.ndarray) -> np.ndarray:
    """Average over the six permutations of the index pairs."""
    return sum(np.transpose(g, _pair_permutation_axes(p)) for p in _PAIR_PERMS) / 6.0


@lru_cache(maxsize=1)
def symmetric_basis() -> tuple[np.ndarray, ...]:
    """Orbit averages of the delta products, in a fixed order.

    Order: the all-within-pair product ``d_il d_jm d_kn``; one pair closed
    with the other two crossed upper-upper/lower-lower; one pair closed with
    the other two crossed upper-lower; the two cyclic upper-lower chains; the
    six mixed chains.
    """
    seen: dict[bytes, np.ndarray] = {}
    for p in pairings():
        t = symmetrize(_delta_product(p))
        key = np.round(t, 12).tobytes()
        seen.setdefault(key, t)
    basis = list(seen.values())

    def sort_key(t):
        within = t[0, 0, 0, 0, 0, 0]
        return (-np.count_nonzero(np.abs(t) > 1e-14), -within)

    basis.sort(key=sort_key)
    return tuple(basis)


BASIS_SIZE = 5
DEFAULT_D = (1.0, 0.5, 0.5, 0.25, 0.25)


@dataclass(frozen=True)
class Tensor6:
    """Dense ``3^6`` coefficient array, immutable after construction."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (3,) * 6:
            raise ValueError(f"Tensor6 needs shape (3,)*6, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def sup(self) -> float:
        return float(np.abs(self.coeffs).max())

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def symmetry_defect(self) -> float:
        g = self.coeffs
        a = np.transpose(g, _pair_permutation_axes((1, 0, 2)))
        b = np.transpose(g, _pair_permutation_axes((2, 1, 0)))
        return float(max(np.abs(g - a).max(), np.abs(g - b).max()))

    def genuine_nonlinearity(self) -> float:
        """Full contraction with ``e (x) ... (x) e``; direction independent when isotropic."""
        return float(self.coeffs[0, 0, 0, 0, 0, 0])

    def as_matrix(self) -> np.ndarray:
        """``(9, 81)`` matrix mapping ``(du^j/dx_m)(dv^k/dx_n)`` to the flux ``[i, l]``."""
        return self.coeffs.transpose(0, 3, 1, 4, 2, 5).reshape(9, 81)

    def save(self, path: str | Path) -> None:
        lines = ["# Tensor6 g^{ijk}_{lmn}; index order i j k l m n (n fastest), 729 values"]
        for idx in itertools.product(range(3), repeat=6):
            lines.append(" ".join(str(i) for i in idx) + f" {float(self.coeffs[idx])!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Tensor6":
        g = np.zeros((3,) * 6)
        count = 0
        for line in Path(path).read_text().splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            g[tuple(int(p) for p in parts[:6])] = float(parts[6])
            count += 1
        if count != 729:
            raise ValueError(f"{path}: expected 729 coefficients, found {count}")
        return cls(g)


def isotropic_g(d) -> Tensor6:
    """Pair-symmetric isotropic tensor ``sum_b d_b B_b`` over :func:`symmetric_basis`."""
    d = np.asarray(d, dtype=float).ravel()
    if d.size != BASIS_SIZE:
        raise ValueError(f"isotropic_g takes {BASIS_SIZE} parameters, got {d.size}")
    g = np.zeros((3,) * 6)
    for coef, b in zip(d, symmetric_basis()):
        g += coef * b
    return Tensor6(g)


def rotate(g: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Rotate all six indices of ``g`` by the orthogonal matrix ``Q``."""
    return np.einsum("ai,bj,ck,dl,em,fn,ijklmn->abcdef", Q, Q, Q, Q, Q, Q, g, optimize=True)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
