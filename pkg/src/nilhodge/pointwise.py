"""Pointwise (numeric) Hermitian linear algebra on the exterior algebra of C^2.

Everything here acts on coefficient vectors in the complex coframe basis
``(Phi^1, Phi^2, Phi^1b, Phi^2b)`` and is vectorised over leading axes, so a
whole grid of metrics is handled at once.  The metric enters through its
Hermitian matrix ``h``, with fundamental form ``omega = (i/2) h_jk Phi^j ^ Phi^kb``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .algebra import sort_sign

__all__ = [
    "MetricError",
    "basis",
    "bidegree_positions",
    "unitary_transform",
    "exterior_power",
    "star_matrices",
    "gram_matrices",
    "volume_factor",
    "pointwise_star",
]


class MetricError(ValueError):
    """A metric that is not positive definite (or otherwise invalid)."""


@lru_cache(maxsize=None)
def basis(k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(4), k))


@lru_cache(maxsize=None)
def bidegree_positions(p: int, q: int) -> tuple[int, ...]:
    """Positions, inside ``basis(p+q)``, of the monomials of bidegree (p, q)."""
    return tuple(n for n, idx in enumerate(basis(p + q)) if sum(i < 2 for i in idx) == p)


@lru_cache(maxsize=None)
def _real_star(k: int) -> np.ndarray:
    # star on an oriented orthonormal coframe f^0..f^3 with volume f^0123
    B = basis(k)
    Bc = basis(4 - k)
    R = np.zeros((len(Bc), len(B)))
    for j, J in enumerate(B):
        comp = tuple(i for i in range(4) if i not in J)
        s, _ = sort_sign(J + comp)
        R[Bc.index(comp), j] = s
    return R


def _cholesky(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    herm = np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))), initial=0.0)
    if herm > 1e-12 * max(1.0, np.max(np.abs(h), initial=0.0)):
        raise MetricError("metric matrix is not Hermitian")
    try:
        return np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        bad = np.argwhere(np.linalg.eigvalsh(h)[..., 0] <= 0)
        where = tuple(bad[0]) if bad.size else ()
        raise MetricError(f"metric is not positive definite (first bad site {where})") from None


def unitary_transform(h: np.ndarray) -> np.ndarray:
    """Matrix T with eps^a = sum_b T[a, b] f^b for a unitary-adapted real coframe f.

    With h = L L^H (lower-triangular L, positive diagonal), psi = L^T Phi is a
    unitary coframe and psi^m = f^{2m} + i f^{2m+1}.
    """
    L = _cholesky(h)
    Cinv = np.swapaxes(np.linalg.inv(L), -1, -2)
    T = np.zeros(h.shape[:-2] + (4, 4), dtype=complex)
    for j in range(2):
        for m in range(2):
            T[..., j, 2 * m] = Cinv[..., j, m]
            T[..., j, 2 * m + 1] = 1j * Cinv[..., j, m]
            T[..., 2 + j, 2 * m] = np.conj(Cinv[..., j, m])
            T[..., 2 + j, 2 * m + 1] = -1j * np.conj(Cinv[..., j, m])
    return T


def exterior_power(T: np.ndarray, k: int) -> np.ndarray:
    """k-th exterior power: entry [I, J] is det T[I, J]."""
    B = basis(k)
    if k == 0:
        return np.ones(T.shape[:-2] + (1, 1), dtype=T.dtype)
    idx = np.array(B)
    sub = T[..., idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


def star_matrices(h: np.ndarray, k: int) -> np.ndarray:
    """Hodge star on k-forms, as matrices acting on eps-basis coefficient vectors."""
    T = unitary_transform(np.asarray(h, dtype=complex))
    to_f = np.swapaxes(exterior_power(T, k), -1, -2)
    # inverse of the (4-k)-th power is the power of the inverse
    from_f = np.swapaxes(exterior_power(np.linalg.inv(T), 4 - k), -1, -2)
    return from_f @ _real_star(k) @ to_f


def gram_matrices(h: np.ndarray, k: int) -> np.ndarray:
    """Pointwise Hermitian inner products <eps^I, eps^J> on k-forms."""
    M = exterior_power(unitary_transform(np.asarray(h, dtype=complex)), k)
    return M @ np.conj(np.swapaxes(M, -1, -2))


def volume_factor(h: np.ndarray) -> np.ndarray:
    """v with omega^2 / 2 = v * eps^0123."""
    return 1.0 / np.linalg.det(unitary_transform(np.asarray(h, dtype=complex)))


def pointwise_star(h, coeffs, bidegree: tuple[int, int]) -> np.ndarray:
    """Hodge star of a (p,q)-form given by its coefficients on that bidegree.

    ``coeffs[..., n]`` multiplies the n-th monomial of bidegree (p, q) in the
    canonical order; the result is on bidegree (2 - q, 2 - p).
    """
    p, q = bidegree
    k = p + q
    h = np.asarray(h, dtype=complex)
    S = star_matrices(h, k)
    src = bidegree_positions(p, q)
    dst = bidegree_positions(2 - q, 2 - p)
    sub = S[..., np.array(dst)[:, None], np.array(src)[None, :]]
    return np.einsum("...ij,...j->...i", sub, np.asarray(coeffs, dtype=complex))
