"""Twisted-periodic lattice on the Kodaira-Thurston fundamental domain.

Sites are ``(n1, n2, n3, n4)`` with ``x_k = n_k / N``.  The lattice is periodic
in x2, x3, x4; stepping past ``x1 = 1`` applies the deck transformation
``(x1, x2, x3) -> (x1 - 1, x2, x3 - shear * x2)``, which is an exact index shift
because x2 and x3 share the resolution N.

Derivatives use a 5-point fourth-order stencil biased one point forward
(offsets -1..3), or its mirror image (offsets -3..1) with ``bias=-1``.  The
centred 5-point stencil is avoided on purpose: it annihilates the alternating
(Nyquist) mode along every untwisted axis, which adds spurious exact kernel
vectors to first-order systems.
"""

from __future__ import annotations

import struct
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "STENCIL_OFFSETS",
    "STENCIL_WEIGHTS",
    "GridError",
    "stencil",
    "TwistedGrid",
    "write_grid_functions",
    "read_grid_functions",
    "write_csv_slice",
]

STENCIL_OFFSETS = (-1, 0, 1, 2, 3)
STENCIL_WEIGHTS = tuple(Fraction(w, 12) for w in (-3, -10, 18, -6, 1))

_MAGIC = b"NILGRID1"


class GridError(ValueError):
    pass


def stencil(bias: int = 1) -> tuple[tuple[int, ...], tuple[Fraction, ...]]:
    """(offsets, weights) of the forward (+1) or backward (-1) biased stencil."""
    if bias == 1:
        return STENCIL_OFFSETS, STENCIL_WEIGHTS
    if bias == -1:
        return tuple(-s for s in STENCIL_OFFSETS), tuple(-w for w in STENCIL_WEIGHTS)
    raise ValueError("bias must be +1 or -1")


class TwistedGrid:
    def __init__(self, N: int, N4: int | None = None, shear: int = 1):
        N4 = N if N4 is None else N4
        width = len(STENCIL_OFFSETS)
        if N < width or N4 < width:
            raise GridError(f"grid needs at least {width} points per axis for the stencil, got N={N}, N4={N4}")
        self.N = int(N)
        self.N4 = int(N4)
        self.shear = int(shear)
        self.shape = (self.N, self.N, self.N, self.N4)
        self.size = int(np.prod(self.shape))
        self._neighbors: dict[tuple[int, int], np.ndarray] = {}
        self._matrices: dict[int, tuple] = {}
        self._check_wrap()

    @classmethod
    def for_algebra(cls, algebra, N: int, N4: int | None = None) -> "TwistedGrid":
        """Lattice realising the quotient for the algebra: only the Heisenberg
        pattern de^3 = -s e^12 (integer s, s = 0 for the torus) is supported."""
        consts = dict(algebra.constants)
        s = consts.pop((3, 1, 2), 0)
        if consts or s != int(s):
            raise GridError(f"no lattice model for structure constants {algebra.constants}")
        return cls(N, N4, shear=int(s))

    def __repr__(self):
        return f"TwistedGrid(N={self.N}, N4={self.N4}, shear={self.shear})"

    def __eq__(self, other):
        return isinstance(other, TwistedGrid) and (self.shape, self.shear) == (other.shape, other.shear)

    def __hash__(self):
        return hash((self.shape, self.shear))

    @property
    def spacing(self) -> tuple[float, float, float, float]:
        return (1 / self.N, 1 / self.N, 1 / self.N, 1 / self.N4)

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        """x1..x4 as full arrays of shape ``self.shape``."""
        n = np.indices(self.shape, dtype=float)
        return tuple(n[k] / self.shape[k] for k in range(4))

    def env(self) -> dict[str, np.ndarray]:
        return dict(zip(("x1", "x2", "x3", "x4"), self.coordinates))

    def neighbor_index(self, axis: int, step: int) -> np.ndarray:
        """Flat index of the site reached from every site by ``step`` along ``axis``."""
        key = (axis, step)
        hit = self._neighbors.get(key)
        if hit is not None:
            return hit
        n = list(np.indices(self.shape))
        size = self.shape[axis]
        moved = n[axis] + step
        if axis == 0:
            wraps = np.floor_divide(moved, size)
            n[2] = np.mod(n[2] - self.shear * n[1] * wraps, self.N)
        n[axis] = np.mod(moved, size)
        idx = np.ravel_multi_index(tuple(n), self.shape).ravel()
        self._neighbors[key] = idx
        return idx

    def _check_wrap(self):
        # the x1 step must be a bijection, invert the opposite step, and
        # N full wraps must compose to the identity through x3 periodicity
        fwd = self.neighbor_index(0, 1)
        if np.unique(fwd).size != self.size:
            raise GridError("x1 wrap is not a bijection on lattice sites")
        if not np.array_equal(self.neighbor_index(0, -1)[fwd], np.arange(self.size)):
            raise GridError("x1 steps +1 and -1 are not inverse to each other")
        p = np.arange(self.size)
        for _ in range(self.N * self.N):
            p = fwd[p]
        if not np.array_equal(p, np.arange(self.size)):
            raise GridError("repeated x1 wraps do not close up")

    def shift(self, u: np.ndarray, axis: int, step: int) -> np.ndarray:
        """Values of ``u`` at the neighbour ``step`` sites along ``axis``."""
        lead = u.shape[: u.ndim - 4]
        flat = u.reshape(lead + (self.size,))
        return flat[..., self.neighbor_index(axis, step)].reshape(u.shape)

    def derivative(self, u: np.ndarray, axis: int, bias: int = 1) -> np.ndarray:
        # differences against the centre value: exactly zero on constants
        out = np.zeros(u.shape, dtype=np.result_type(u, float))
        for s, w in zip(*stencil(bias)):
            if s:
                out += float(w) * (self.shift(u, axis, s) - u)
        return out * self.shape[axis]

    def derivative_adjoint(self, u: np.ndarray, axis: int, bias: int = 1) -> np.ndarray:
        out = np.zeros(u.shape, dtype=np.result_type(u, float))
        for s, w in zip(*stencil(bias)):
            if s:
                out += float(w) * (self.shift(u, axis, -s) - u)
        return out * self.shape[axis]

    def frame_derivative(self, k: int, u: np.ndarray, bias: int = 1) -> np.ndarray:
        """Apply e_k (k = 1..4): e_1 = d1, e_2 = d2 + shear x1 d3, e_3 = d3, e_4 = d4."""
        if k == 2 and self.shear:
            return self.derivative(u, 1, bias) + self.shear * self.coordinates[0] * self.derivative(u, 2, bias)
        return self.derivative(u, k - 1, bias)

    def frame_derivative_adjoint(self, k: int, u: np.ndarray, bias: int = 1) -> np.ndarray:
        if k == 2 and self.shear:
            return self.derivative_adjoint(u, 1, bias) + self.shear * self.derivative_adjoint(
                self.coordinates[0] * u, 2, bias
            )
        return self.derivative_adjoint(u, k - 1, bias)

    def derivative_matrix(self, axis: int, bias: int = 1) -> sp.csr_matrix:
        rows = np.arange(self.size)
        eye = sp.identity(self.size, format="csr")
        out = sp.csr_matrix((self.size, self.size))
        for s, w in zip(*stencil(bias)):
            if s:
                shift = sp.csr_matrix((np.ones(self.size), (rows, self.neighbor_index(axis, s))), shape=(self.size,) * 2)
                out = out + float(w) * (shift - eye)
        return (out * self.shape[axis]).tocsr()

    def frame_derivative_matrices(self, bias: int = 1) -> tuple[sp.csr_matrix, ...]:
        hit = self._matrices.get(bias)
        if hit is None:
            d = [self.derivative_matrix(a, bias) for a in range(4)]
            x1 = sp.diags(self.shear * self.coordinates[0].ravel())
            hit = self._matrices[bias] = (d[0], (d[1] + x1 @ d[2]).tocsr(), d[2], d[3])
        return hit

    def sample(self, expr, params=None) -> np.ndarray:
        """Evaluate an expression at every lattice site (complex array)."""
        val = expr.evaluate({**(params or {}), **self.env()})
        return np.broadcast_to(np.asarray(val, dtype=complex), self.shape).copy()

    def mean(self, u: np.ndarray):
        return u.reshape(u.shape[: u.ndim - 4] + (self.size,)).mean(axis=-1)


def write_grid_functions(path, grid: TwistedGrid, comps: np.ndarray) -> None:
    """Binary export: magic, five little-endian uint32 (N1..N4, ncomp), then
    complex samples as little-endian float64 (re, im) pairs, row-major in
    (component, n1, n2, n3, n4)."""
    comps = np.asarray(comps, dtype=complex).reshape((-1,) + grid.shape)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<5I", *grid.shape, comps.shape[0]))
        fh.write(comps.astype("<c16").tobytes(order="C"))


def read_grid_functions(path) -> tuple[tuple[int, int, int, int], np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise GridError(f"{path}: not a grid-function file")
        n1, n2, n3, n4, nc = struct.unpack("<5I", fh.read(20))
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != n1 * n2 * n3 * n4 * nc:
        raise GridError(f"{path}: truncated payload")
    return (n1, n2, n3, n4), data.reshape((nc, n1, n2, n3, n4)).astype(complex)


def write_csv_slice(path, grid: TwistedGrid, u: np.ndarray, n3: int = 0, n4: int = 0) -> None:
    """An (x1, x2) slice at fixed (n3, n4) for inspection."""
    with open(path, "w") as fh:
        fh.write("n1,n2,x1,x2,re,im\n")
        for a in range(grid.N):
            for b in range(grid.N):
                z = complex(u[a, b, n3, n4])
                fh.write(f"{a},{b},{a / grid.N!r},{b / grid.N!r},{z.real!r},{z.imag!r}\n")
