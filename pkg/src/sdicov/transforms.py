"""Rank-one change-of-variable transforms and chains of them.

A transform is the linear map

    l(x) = x + p * (g . x) / |p|^2

stored as the vector pair ``(p, g)``.  Its adjoint swaps the roles of ``p``
and ``g`` and its inverse follows from the Sherman-Morrison formula.  No
matrix is ever formed; every application costs O(n).

A :class:`TransformChain` holds ``l_1, ..., l_k``.  ``chain_forward``
evaluates ``l_1(l_2(...l_k(x)))`` and ``chain_adjoint`` evaluates
``l_k^T(...l_1^T(x))``, so ``h_apply = chain_forward o chain_adjoint`` is the
implicit symmetric operator ``H = L L^T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NearSingular, ZeroDirection

DEFAULT_EPS_INV = 1e-10


@dataclass(frozen=True)
class RankOneTransform:
    """The map ``I + p g^T / |p|^2``.

    Build with :func:`make_transform`, which validates the direction and the
    invertibility margin ``mu``.
    """

    p: np.ndarray
    g: np.ndarray
    p_norm_sq: float
    mu: float

    @property
    def dimension(self) -> int:
        return self.p.shape[0]


def make_transform(p, g, eps_inv: float = DEFAULT_EPS_INV) -> RankOneTransform:
    """Construct ``l = I + p g^T / |p|^2``.

    Raises :class:`ZeroDirection` when ``|p|^2`` is zero and
    :class:`NearSingular` when ``|mu| < eps_inv`` where
    ``mu = 1 + g.p / |p|^2`` is the determinant of ``l``.
    """
    p = np.array(p, dtype=float)
    g = np.array(g, dtype=float)
    if p.ndim != 1 or p.shape != g.shape or p.shape[0] < 1:
        raise DimensionMismatch(f"p has shape {p.shape}, g has shape {g.shape}")
    p_norm_sq = float(np.dot(p, p))
    if not p_norm_sq > 0.0:
        raise ZeroDirection("direction p has zero norm")
    mu = 1.0 + float(np.dot(g, p)) / p_norm_sq
    if not abs(mu) >= eps_inv:
        raise NearSingular(mu, eps_inv)
    p.flags.writeable = False
    g.flags.writeable = False
    return RankOneTransform(p=p, g=g, p_norm_sq=p_norm_sq, mu=mu)


def _check(t: RankOneTransform, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != t.p.shape:
        raise DimensionMismatch(f"expected shape {t.p.shape}, got {x.shape}")
    return x


def apply(t: RankOneTransform, x) -> np.ndarray:
    """``x + p (g.x) / |p|^2``."""
    x = _check(t, x)
    return x + t.p * (np.dot(t.g, x) / t.p_norm_sq)


def apply_adjoint(t: RankOneTransform, x) -> np.ndarray:
    """``x + g (p.x) / |p|^2``."""
    x = _check(t, x)
    return x + t.g * (np.dot(t.p, x) / t.p_norm_sq)


def apply_inverse(t: RankOneTransform, x, eps_inv: float = DEFAULT_EPS_INV) -> np.ndarray:
    """``x - p (g.x) / (|p|^2 + g.p)`` (Sherman-Morrison)."""
    x = _check(t, x)
    if not abs(t.mu) >= eps_inv:
        raise NearSingular(t.mu, eps_inv)
    return x - t.p * (np.dot(t.g, x) / (t.p_norm_sq * t.mu))


@dataclass(frozen=True)
class TransformChain:
    """Immutable ordered sequence ``l_1, ..., l_k`` of transforms.

    ``transforms[0]`` is ``l_1``.  :meth:`extended` returns a new chain with
    one more member; the original is left untouched.
    """

    dimension: int
    transforms: tuple[RankOneTransform, ...] = field(default=())

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionMismatch("chain dimension must be positive")
        for t in self.transforms:
            if t.dimension != self.dimension:
                raise DimensionMismatch(
                    f"member of dimension {t.dimension} in chain of dimension {self.dimension}"
                )

    def __len__(self) -> int:
        return len(self.transforms)

    def __getitem__(self, i):
        return self.transforms[i]

    def extended(self, t: RankOneTransform) -> "TransformChain":
        if t.dimension != self.dimension:
            raise DimensionMismatch(f"cannot add dimension {t.dimension} to chain of {self.dimension}")
        return TransformChain(self.dimension, self.transforms + (t,))

    def prefix(self, k: int) -> "TransformChain":
        """Chain of the first ``k`` members, ``l_1 ... l_k``."""
        if not 0 <= k <= len(self.transforms):
            raise IndexError(f"prefix length {k} outside [0, {len(self.transforms)}]")
        return TransformChain(self.dimension, self.transforms[:k])


def _check_chain(c: TransformChain, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (c.dimension,):
        raise DimensionMismatch(f"expected shape ({c.dimension},), got {x.shape}")
    return x


def chain_forward(c: TransformChain, x) -> np.ndarray:
    """``l_1(l_2(...l_k(x)))``: members applied from last to first."""
    y = _check_chain(c, x).copy()
    for t in reversed(c.transforms):
        y += t.p * (np.dot(t.g, y) / t.p_norm_sq)
    return y


def chain_adjoint(c: TransformChain, x) -> np.ndarray:
    """``l_k^T(...l_1^T(x))``: adjoints applied from first to last."""
    y = _check_chain(c, x).copy()
    for t in c.transforms:
        y += t.g * (np.dot(t.p, y) / t.p_norm_sq)
    return y


def chain_inverse(c: TransformChain, x, eps_inv: float = DEFAULT_EPS_INV) -> np.ndarray:
    """``(l_1 o ... o l_k)^{-1}(x) = l_k^{-1}(...l_1^{-1}(x))``."""
    y = _check_chain(c, x).copy()
    for t in c.transforms:
        if not abs(t.mu) >= eps_inv:
            raise NearSingular(t.mu, eps_inv)
        y -= t.p * (np.dot(t.g, y) / (t.p_norm_sq * t.mu))
    return y


def h_apply(c: TransformChain, v) -> np.ndarray:
    """Apply ``H = l_1 ... l_k l_k^T ... l_1^T`` to ``v``."""
    return chain_forward(c, chain_adjoint(c, v))

