"""Forms with grid-function coefficients on the twisted lattice.

A FieldForm stores, per canonical multi-index over ``(Phi^1, Phi^2, Phi^1b,
Phi^2b)``, a complex array of shape ``grid.shape``.  Exterior derivative uses

    d(f eps^I) = sum_b X_b(f) eps^b ^ eps^I + f d(eps^I),

with ``X_b`` the frame dual to the complex coframe, expanded in the real frame
``e_1..e_4`` whose action on samples is provided by the grid.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .algebra import AcsFrame, InvariantForm, sort_sign
from .exact import det
from .grid import TwistedGrid
from .pointwise import basis, bidegree_positions, gram_matrices, star_matrices, volume_factor

__all__ = [
    "FieldForm",
    "d_field",
    "dbar_field",
    "partial_field",
    "star_field",
    "codifferential_field",
    "pointwise_inner",
    "inner_product_L2",
    "volume_weight",
    "metric_on_grid",
]


def metric_on_grid(metric, grid: TwistedGrid) -> np.ndarray:
    """Metric matrices at every site, shape ``grid.shape + (2, 2)``."""
    if hasattr(metric, "sample"):
        return metric.sample(grid)
    h = np.asarray(metric, dtype=complex)
    if h.shape == (2, 2):
        return np.broadcast_to(h, grid.shape + (2, 2))
    return h


class FieldForm:
    """A complex differential form with sampled coefficients."""

    __slots__ = ("frame", "grid", "coeffs")

    def __init__(self, frame: AcsFrame, grid: TwistedGrid, coeffs: Mapping | None = None):
        self.frame = frame
        self.grid = grid
        self.coeffs: dict[tuple[int, ...], np.ndarray] = {}
        for idx, arr in (coeffs or {}).items():
            s, key = sort_sign(idx)
            if not s:
                continue
            arr = np.broadcast_to(np.asarray(arr, dtype=complex), grid.shape)
            if key in self.coeffs:
                self.coeffs[key] = self.coeffs[key] + s * arr
            else:
                self.coeffs[key] = s * np.array(arr)

    # construction ------------------------------------------------------------

    @classmethod
    def from_invariant(cls, form: InvariantForm, frame: AcsFrame, grid: TwistedGrid) -> "FieldForm":
        if form.coframe is not frame.coframe:
            form = frame.to_complex(form)
        return cls(frame, grid, {k: complex(v) for k, v in form.coeffs.items()})

    @classmethod
    def from_components(cls, frame, grid, bidegree: tuple[int, int], comps) -> "FieldForm":
        """Stack of arrays on the monomials of one bidegree, in canonical order."""
        p, q = bidegree
        idxs = [basis(p + q)[n] for n in bidegree_positions(p, q)]
        comps = list(comps)
        if len(comps) != len(idxs):
            raise ValueError(f"bidegree {bidegree} needs {len(idxs)} components, got {len(comps)}")
        return cls(frame, grid, dict(zip(idxs, comps)))

    def components(self, bidegree: tuple[int, int]) -> np.ndarray:
        p, q = bidegree
        idxs = [basis(p + q)[n] for n in bidegree_positions(p, q)]
        out = np.zeros((len(idxs),) + self.grid.shape, dtype=complex)
        for n, idx in enumerate(idxs):
            if idx in self.coeffs:
                out[n] = self.coeffs[idx]
        return out

    def degree_vector(self, k: int) -> np.ndarray:
        """Coefficients on all k-monomials, stacked last: shape ``grid.shape + (C(4,k),)``."""
        out = np.zeros(self.grid.shape + (len(basis(k)),), dtype=complex)
        for n, idx in enumerate(basis(k)):
            if idx in self.coeffs:
                out[..., n] = self.coeffs[idx]
        return out

    @classmethod
    def from_degree_vector(cls, frame, grid, k: int, vec) -> "FieldForm":
        return cls(frame, grid, {idx: vec[..., n] for n, idx in enumerate(basis(k))})

    # structure ---------------------------------------------------------------

    def _check(self, other: "FieldForm"):
        if self.grid != other.grid or self.frame is not other.frame:
            raise ValueError("field forms live on different grids or frames")

    def degrees(self) -> set[int]:
        return {len(k) for k in self.coeffs}

    def part(self, k: int) -> "FieldForm":
        return FieldForm(self.frame, self.grid, {i: c for i, c in self.coeffs.items() if len(i) == k})

    def bidegree_part(self, p: int, q: int) -> "FieldForm":
        keep = {i: c for i, c in self.coeffs.items() if len(i) == p + q and sum(x < 2 for x in i) == p}
        return FieldForm(self.frame, self.grid, keep)

    def bidegree(self) -> tuple[int, int] | None:
        bds = {(sum(x < 2 for x in i), sum(x >= 2 for x in i)) for i, c in self.coeffs.items() if np.any(c)}
        if len(bds) > 1:
            raise ValueError(f"form is not bihomogeneous: {sorted(bds)}")
        return bds.pop() if bds else None

    def max_norm(self) -> float:
        return max((float(np.max(np.abs(c))) for c in self.coeffs.values()), default=0.0)

    def conj(self) -> "FieldForm":
        out = {}
        for idx, c in self.coeffs.items():
            s, key = sort_sign([(i + 2) % 4 for i in idx])
            out[key] = s * np.conj(c)
        return FieldForm(self.frame, self.grid, out)

    def j_action(self) -> "FieldForm":
        """Multiply each (p,q) component by i^(q-p)."""
        out = {}
        for idx, c in self.coeffs.items():
            p = sum(x < 2 for x in idx)
            out[idx] = (1j ** ((len(idx) - 2 * p) % 4)) * c
        return FieldForm(self.frame, self.grid, out)

    def j_inverse(self) -> "FieldForm":
        out = {}
        for idx, c in self.coeffs.items():
            p = sum(x < 2 for x in idx)
            out[idx] = (1j ** ((2 * p - len(idx)) % 4)) * c
        return FieldForm(self.frame, self.grid, out)

    # arithmetic ----------------------------------------------------------------

    def __add__(self, other: "FieldForm") -> "FieldForm":
        self._check(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return FieldForm(self.frame, self.grid, out)

    def __sub__(self, other: "FieldForm") -> "FieldForm":
        return self + other * -1

    def __neg__(self):
        return self * -1

    def __mul__(self, scalar) -> "FieldForm":
        """Multiply by a number or a grid function."""
        return FieldForm(self.frame, self.grid, {k: v * scalar for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def wedge(self, other) -> "FieldForm":
        if isinstance(other, InvariantForm):
            other = FieldForm.from_invariant(other, self.frame, self.grid)
        self._check(other)
        out: dict[tuple[int, ...], np.ndarray] = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                s, key = sort_sign(i + j)
                if s:
                    out[key] = out[key] + s * a * b if key in out else s * a * b
        return FieldForm(self.frame, self.grid, out)

    def __repr__(self):
        keys = ", ".join(self.frame.coframe.label(k) for k in sorted(self.coeffs))
        return f"FieldForm({self.grid!r}, [{keys}])"


# exterior derivative ------------------------------------------------------------


def _dual_frame_weights(frame: AcsFrame) -> np.ndarray:
    # X_b = sum_j W[j, b] e_j
    return np.array([[complex(x) for x in row] for row in frame.Q_inv])


def d_field(a: FieldForm) -> FieldForm:
    frame, grid = a.frame, a.grid
    W = _dual_frame_weights(frame)
    cf = frame.coframe
    out: dict[tuple[int, ...], np.ndarray] = {}

    def acc(key, val):
        out[key] = out[key] + val if key in out else val

    for idx, f in a.coeffs.items():
        ef = [grid.frame_derivative(j + 1, f) for j in range(4)]
        for b in range(4):
            if b in idx:
                continue
            Xf = sum(W[j, b] * ef[j] for j in range(4) if W[j, b] != 0)
            if isinstance(Xf, int):
                continue
            s, key = sort_sign((b,) + idx)
            acc(key, s * Xf)
        for key, c in cf.d_monomial(idx).items():
            acc(key, complex(c) * f)
    return FieldForm(frame, grid, out)


def dbar_field(a: FieldForm) -> FieldForm:
    p, q = a.bidegree() or (0, 0)
    return d_field(a).bidegree_part(p, q + 1)


def partial_field(a: FieldForm) -> FieldForm:
    p, q = a.bidegree() or (0, 0)
    return d_field(a).bidegree_part(p + 1, q)


# metric operations ---------------------------------------------------------------


def star_field(metric, a: FieldForm) -> FieldForm:
    """Hodge star applied site by site."""
    h = metric_on_grid(metric, a.grid)
    out = FieldForm(a.frame, a.grid)
    for k in sorted(a.degrees()):
        S = star_matrices(h, k)
        vec = a.part(k).degree_vector(k)
        res = np.einsum("...ij,...j->...i", S, vec)
        out = out + FieldForm.from_degree_vector(a.frame, a.grid, 4 - k, res)
    return out


def codifferential_field(metric, a: FieldForm) -> FieldForm:
    """d* = -* d * (real dimension 4)."""
    return -star_field(metric, d_field(star_field(metric, a)))


def volume_weight(metric, frame: AcsFrame, grid: TwistedGrid) -> np.ndarray:
    """Riemannian volume density relative to dx1..dx4 (unit-volume domain)."""
    h = metric_on_grid(metric, grid)
    return np.abs(volume_factor(h) * complex(det(frame.Q)))


def pointwise_inner(metric, a: FieldForm, b: FieldForm) -> np.ndarray:
    """<a, b>_h at every site (Hermitian, conjugate-linear in b)."""
    a._check(b)
    h = metric_on_grid(metric, a.grid)
    total = np.zeros(a.grid.shape, dtype=complex)
    for k in sorted(a.degrees() & b.degrees()):
        G = gram_matrices(h, k)
        va, vb = a.part(k).degree_vector(k), b.part(k).degree_vector(k)
        total += np.einsum("...i,...ij,...j->...", va, G, np.conj(vb))
    return total


def inner_product_L2(a: FieldForm, b: FieldForm, metric) -> complex:
    """Integral of <a, b> against the metric volume; the mean is the quadrature."""
    w = volume_weight(metric, a.frame, a.grid)
    return complex(np.mean(pointwise_inner(metric, a, b) * w))
