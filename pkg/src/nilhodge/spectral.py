"""First-order lattice operators and their smallest singular values.

The (1,1) harmonicity operator is ``D(psi) = (dbar psi, partial(*psi))`` on
coefficients ``(A, B, L, M)`` of ``Phi^11b, Phi^12b, Phi^21b, Phi^22b``.  The
four continuous equations have outputs ``Phi^11b2b, Phi^21b2b`` (dbar part)
and ``Phi^121b, Phi^122b`` (partial part).

The discrete operator stacks the four equations twice, once with the forward
biased stencil and once with its mirror image, each scaled by 1/sqrt(2).  A
single one-sided stencil has a complex symbol, and complex covectors meet the
characteristic variety of this (non-Dirac) system on a two-dimensional set of
lattice frequencies, producing spurious near-kernel vectors at grid scale.
Requiring both discretisations to vanish leaves only isolated such
frequencies; constants stay exact kernel vectors and smooth fields keep
fourth-order accuracy.

Every operator here is a sum of terms ``T(P psi)`` where ``P`` is a site-wise
matrix (or the identity) and ``T`` a constant first-order table

    (T u)_o = sum_m sum_j c[o, m, j] e_j(u_m) + z[o, m] u_m.

Tables come from the exact algebra, so for invariant data the coefficients are
exact rationals.  When all site matrices are independent of x3 and x4 the
operator commutes with translations in those directions (the twist shifts the
x3 index uniformly), so it splits exactly into Fourier blocks of size
``ncomp * N^2``; that is the default solver path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import AcsFrame, NilLieAlgebra, sort_sign
from .exact import Qi
from .fields import FieldForm, metric_on_grid, volume_weight
from .grid import TwistedGrid, stencil
from .pointwise import basis, bidegree_positions, gram_matrices, star_matrices

__all__ = [
    "FirstOrderTable",
    "LatticeOperator",
    "HarmonicOperator",
    "SpectralReport",
    "KernelDimension",
    "first_order_table",
    "assemble_harmonic_operator",
    "assemble_asd_operator",
    "smallest_singular_values",
    "kernel_dimension",
    "extract_kernel_basis",
    "residual",
    "subspace_angles",
    "asd_harmonic_kernel",
    "SpectralError",
]

H11 = tuple(basis(2)[n] for n in bidegree_positions(1, 1))
H12 = tuple(basis(3)[n] for n in bidegree_positions(1, 2))
H21 = tuple(basis(3)[n] for n in bidegree_positions(2, 1))
INPUT_NAMES = ("A", "B", "L", "M")


class SpectralError(RuntimeError):
    pass


# tables ----------------------------------------------------------------------


@dataclass
class FirstOrderTable:
    """Exact coefficients: ``deriv[o][m][b]`` multiplies X_b (dual complex frame),
    ``zeroth[o][m]`` multiplies the value."""

    outputs: tuple
    inputs: tuple
    deriv: list
    zeroth: list

    def numeric(self, frame: AcsFrame) -> tuple[np.ndarray, np.ndarray]:
        """(c[o, m, j] on the real frame e_j, z[o, m]) as complex arrays."""
        W = np.array([[complex(x) for x in row] for row in frame.Q_inv])  # X_b = sum_j W[j,b] e_j
        dX = np.array([[[complex(x) for x in d] for d in row] for row in self.deriv]).reshape(
            len(self.outputs), len(self.inputs), 4
        )
        c = np.einsum("omb,jb->omj", dX, W)
        z = np.array([[complex(x) for x in row] for row in self.zeroth]).reshape(len(self.outputs), len(self.inputs))
        return c, z


def first_order_table(frame: AcsFrame, inputs, outputs) -> FirstOrderTable:
    """Components ``outputs`` of d applied to forms supported on ``inputs``."""
    cf = frame.coframe
    deriv = [[[Qi(0)] * 4 for _ in inputs] for _ in outputs]
    zeroth = [[Qi(0) for _ in inputs] for _ in outputs]
    pos = {o: r for r, o in enumerate(outputs)}
    for m, I in enumerate(inputs):
        for b in range(4):
            s, key = sort_sign((b,) + tuple(I))
            if s and key in pos:
                deriv[pos[key]][m][b] = Qi(s)
        for key, c in cf.d_monomial(tuple(I)).items():
            if key in pos:
                zeroth[pos[key]][m] = c
    return FirstOrderTable(tuple(outputs), tuple(inputs), deriv, zeroth)


# generic operator -----------------------------------------------------------------


@dataclass
class _Term:
    rows: slice
    c: np.ndarray  # (r, m, 4) on e_j
    z: np.ndarray  # (r, m)
    P: np.ndarray | None  # (*grid.shape, m, n_in) or None for identity
    bias: int = 1  # stencil direction for the derivative part


class LatticeOperator:
    """Sum of first-order terms acting on ``n_in`` grid functions."""

    def __init__(self, grid: TwistedGrid, n_in: int, n_out: int, terms: list[_Term]):
        self.grid = grid
        self.n_in = n_in
        self.n_out = n_out
        self.terms = terms
        self.shape = (n_out * grid.size, n_in * grid.size)
        self.matvecs = 0

    # matrix-free -------------------------------------------------------------

    def apply(self, x: np.ndarray) -> np.ndarray:
        g = self.grid
        x = np.asarray(x, dtype=complex).reshape((self.n_in,) + g.shape)
        out = np.zeros((self.n_out,) + g.shape, dtype=complex)
        for t in self.terms:
            u = x if t.P is None else np.einsum("...mi,i...->m...", t.P, x)
            res = out[t.rows]
            for m in range(u.shape[0]):
                for j in range(4):
                    col = t.c[:, m, j]
                    if np.any(col):
                        du = g.frame_derivative(j + 1, u[m], t.bias)
                        res += col[:, None, None, None, None] * du
                zc = t.z[:, m]
                if np.any(zc):
                    res += zc[:, None, None, None, None] * u[m]
        self.matvecs += 1
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        g = self.grid
        y = np.asarray(y, dtype=complex).reshape((self.n_out,) + g.shape)
        x = np.zeros((self.n_in,) + g.shape, dtype=complex)
        for t in self.terms:
            yt = y[t.rows]
            m_count = t.c.shape[1]
            v = np.zeros((m_count,) + g.shape, dtype=complex)
            for m in range(m_count):
                for j in range(4):
                    col = np.conj(t.c[:, m, j])
                    if np.any(col):
                        v[m] += g.frame_derivative_adjoint(j + 1, np.tensordot(col, yt, axes=1), t.bias)
                zc = np.conj(t.z[:, m])
                if np.any(zc):
                    v[m] += np.tensordot(zc, yt, axes=1)
            x += v if t.P is None else np.einsum("...mi,m...->i...", np.conj(t.P), v)
        return x

    def normal_operator(self) -> spla.LinearOperator:
        n = self.shape[1]

        def mv(v):
            return self.adjoint(self.apply(v)).ravel()

        return spla.LinearOperator((n, n), matvec=mv, dtype=complex)

    # assembled -----------------------------------------------------------------

    def _assemble(self, E: dict, P_sites: list, m_sites: int) -> sp.csr_matrix:
        """``E[bias]`` holds the four frame-derivative matrices for that stencil."""
        eye = sp.identity(m_sites, dtype=complex, format="csr")
        blocks = [[None] * self.n_in for _ in range(self.n_out)]
        for t, P in zip(self.terms, P_sites):
            r0 = t.rows.start
            Et = E[t.bias]
            for o in range(t.c.shape[0]):
                for m in range(t.c.shape[1]):
                    op = t.z[o, m] * eye
                    for j in range(4):
                        if t.c[o, m, j] != 0:
                            op = op + t.c[o, m, j] * Et[j]
                    if P is None:
                        targets = [(m, op)]
                    else:
                        targets = [(i, op @ sp.diags(P[:, m, i])) for i in range(self.n_in) if np.any(P[:, m, i])]
                    for i, blk in targets:
                        cur = blocks[r0 + o][i]
                        blocks[r0 + o][i] = blk if cur is None else cur + blk
        for o in range(self.n_out):
            for i in range(self.n_in):
                if blocks[o][i] is None:
                    blocks[o][i] = sp.csr_matrix((m_sites, m_sites), dtype=complex)
        return sp.bmat(blocks, format="csr")

    def sparse(self) -> sp.csr_matrix:
        g = self.grid
        E = {b: g.frame_derivative_matrices(b) for b in {t.bias for t in self.terms}}
        P_sites = [None if t.P is None else t.P.reshape((g.size,) + t.P.shape[-2:]) for t in self.terms]
        return self._assemble(E, P_sites, g.size)

    # Fourier blocks ------------------------------------------------------------------

    def x34_deviation(self) -> float:
        """Relative variation of the site matrices along x3 and x4."""
        worst = 0.0
        for t in self.terms:
            if t.P is None:
                continue
            ref = t.P[:, :, :1, :1]
            scale = max(float(np.max(np.abs(t.P))), 1e-300)
            worst = max(worst, float(np.max(np.abs(t.P - ref))) / scale)
        return worst

    def block(self, k3: int, k4: int) -> sp.csr_matrix:
        """Restriction to modes exp(2 pi i (k3 n3 / N + k4 n4 / N4)) (x3, x4 invariant case)."""
        g = self.grid
        N, N4 = g.N, g.N4
        m_sites = N * N
        n1, n2 = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        n1, n2 = n1.ravel(), n2.ravel()
        rows = np.arange(m_sites)
        eye = sp.identity(m_sites, dtype=complex, format="csr")
        E = {}
        for bias in {t.bias for t in self.terms}:
            D0 = sp.csr_matrix((m_sites, m_sites), dtype=complex)
            D1 = sp.csr_matrix((m_sites, m_sites), dtype=complex)
            mu3 = mu4 = 0j
            for s, w in zip(*stencil(bias)):
                if not s:
                    continue
                w = float(w)
                t1 = n1 + s
                phase = np.exp(-2j * np.pi * k3 * g.shear * n2 * np.floor_divide(t1, N) / N)
                cols = np.mod(t1, N) * N + n2
                D0 = D0 + w * (sp.csr_matrix((phase, (rows, cols)), shape=(m_sites,) * 2) - eye)
                cols = n1 * N + np.mod(n2 + s, N)
                D1 = D1 + w * (sp.csr_matrix((np.ones(m_sites), (rows, cols)), shape=(m_sites,) * 2) - eye)
                mu3 += N * w * (np.exp(2j * np.pi * k3 * s / N) - 1)
                mu4 += N4 * w * (np.exp(2j * np.pi * k4 * s / N4) - 1)
            E[bias] = (
                (D0 * N).tocsr(),
                (D1 * N + sp.diags(g.shear * (n1 / N) * mu3)).tocsr(),
                (mu3 * eye).tocsr(),
                (mu4 * eye).tocsr(),
            )
        P_sites = [None if t.P is None else t.P[:, :, 0, 0].reshape((m_sites,) + t.P.shape[-2:]) for t in self.terms]
        return self._assemble(E, P_sites, m_sites)

    def embed_block_vector(self, v: np.ndarray, k3: int, k4: int) -> np.ndarray:
        """Full-grid coefficient array of a block vector (unit l2 norm preserved)."""
        g = self.grid
        v = np.asarray(v).reshape(self.n_in, g.N, g.N)
        ph3 = np.exp(2j * np.pi * k3 * np.arange(g.N) / g.N)
        ph4 = np.exp(2j * np.pi * k4 * np.arange(g.N4) / g.N4)
        full = v[:, :, :, None, None] * ph3[None, None, None, :, None] * ph4[None, None, None, None, :]
        return full / np.sqrt(g.N * g.N4)


# harmonic operator ------------------------------------------------------------------


class HarmonicOperator(LatticeOperator):
    """psi (1,1) -> (dbar psi, partial *psi), forward then backward stencil."""

    def __init__(self, algebra, frame, metric, grid, h, star11, tables):
        self.algebra = algebra
        self.frame = frame
        self.metric = metric
        self.h = h
        self.star11 = star11
        self.tables = tables
        cd, zd = tables["dbar"].numeric(frame)
        cp, zp = tables["partial"].numeric(frame)
        r = 1 / np.sqrt(2)
        terms = []
        for n, bias in enumerate((1, -1)):
            terms.append(_Term(slice(4 * n, 4 * n + 2), r * cd, r * zd, None, bias))
            terms.append(_Term(slice(4 * n + 2, 4 * n + 4), r * cp, r * zp, star11, bias))
        super().__init__(grid, 4, 8, terms)

    def coefficient_table(self):
        """Exact equations for constant exact metrics.

        Returns a list of four dicts ``{input: {"zeroth": Qi, "X": {label: Qi}}}``
        where ``X`` labels the dual complex frame ("1", "2", "1b", "2b").
        """
        from .hermitian import star_matrix_exact

        if not (self.metric.is_constant() and self.metric.is_exact()):
            raise ValueError("exact coefficient table needs a constant exact metric")
        S2 = star_matrix_exact(self.metric.exact_h(), 2)
        B2 = basis(2)
        S = [[S2[B2.index(J)][B2.index(I)] for I in H11] for J in H11]
        labels = self.frame.coframe.symbols
        eqs = []
        for name in ("dbar", "partial"):
            t = self.tables[name]
            for o in range(len(t.outputs)):
                eq = {}
                for i, inp in enumerate(INPUT_NAMES):
                    if name == "dbar":
                        X = [t.deriv[o][i][b] for b in range(4)]
                        z = t.zeroth[o][i]
                    else:
                        X = [sum((t.deriv[o][J][b] * S[J][i] for J in range(4)), Qi(0)) for b in range(4)]
                        z = sum((t.zeroth[o][J] * S[J][i] for J in range(4)), Qi(0))
                    eq[inp] = {"zeroth": z, "X": {labels[b]: X[b] for b in range(4) if X[b]}}
                eqs.append(eq)
        return eqs


def _star11(h: np.ndarray) -> np.ndarray:
    S = star_matrices(h, 2)
    pos = np.array(bidegree_positions(1, 1))
    return np.ascontiguousarray(S[..., pos[:, None], pos[None, :]])


def assemble_harmonic_operator(
    algebra: NilLieAlgebra, frame: AcsFrame, metric, grid: TwistedGrid
) -> HarmonicOperator:
    if frame.algebra is not algebra:
        raise ValueError("frame belongs to a different algebra")
    h = metric_on_grid(metric, grid)
    star11 = _star11(h)
    tables = {
        "dbar": first_order_table(frame, H11, H12),
        "partial": first_order_table(frame, H11, H21),
    }
    return HarmonicOperator(algebra, frame, metric, grid, h, star11, tables)


class AsdOperator(LatticeOperator):
    """gamma (all 2-forms) -> (d gamma with both stencils, gamma + *gamma)."""

    def __init__(self, algebra, frame, metric, grid, h, sign):
        self.algebra, self.frame, self.metric, self.h = algebra, frame, metric, h
        B2, B3 = basis(2), basis(3)
        c, z = first_order_table(frame, B2, B3).numeric(frame)
        S = star_matrices(h, 2) * sign
        P = np.eye(6) + S
        r = 1 / np.sqrt(2)
        terms = [
            _Term(slice(0, 4), r * c, r * z, None, 1),
            _Term(slice(4, 8), r * c, r * z, None, -1),
            _Term(slice(8, 14), np.zeros((6, 6, 4), dtype=complex), np.eye(6, dtype=complex), np.ascontiguousarray(P)),
        ]
        super().__init__(grid, 6, 14, terms)


def assemble_asd_operator(algebra, frame, metric, grid, orientation: str = "J") -> AsdOperator:
    from .hermitian import _orientation_sign

    h = metric_on_grid(metric, grid)
    if orientation == "J":
        sign = 1
    elif orientation == "coordinate":
        sign = _orientation_sign(frame)
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    return AsdOperator(algebra, frame, metric, grid, h, sign)


# solvers ------------------------------------------------------------------------------


@dataclass
class _Spectrum:
    values: np.ndarray
    vectors: list  # full-grid coefficient arrays, shape (n_in, *grid.shape), unit l2
    scale: float
    method: str
    iterations: int
    converged: bool = True
    info: dict = field(default_factory=dict)


def _block_smallest(M: sp.csr_matrix, k: int, want_vectors: bool, seed: int, dense_limit: int, scale: float):
    n = M.shape[1]
    if n <= dense_limit:
        A = M.toarray()
        if want_vectors:
            _, s, Vh = np.linalg.svd(A)
            order = np.argsort(s)[:k]
            return s[order], Vh.conj().T[:, order]
        s = np.linalg.svd(A, compute_uv=False)
        return np.sort(s)[:k], None
    # shift-invert Lanczos on the normal matrix, then Rayleigh-Ritz on M itself
    H = (M.conj().T @ M).tocsc()
    delta = (1e-7 * max(scale, 1.0)) ** 2
    lu = spla.splu((H + delta * sp.identity(n, format="csc")).tocsc(), permc_spec="MMD_AT_PLUS_A")
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    _, V = spla.eigsh(op, k=min(k + 4, n - 2), which="LM", v0=_seeded(n, seed), tol=1e-12)
    V, _ = np.linalg.qr(V)
    _, s, Wh = np.linalg.svd(M @ V, full_matrices=False)
    order = np.argsort(s)[:k]
    return s[order], (V @ Wh.conj().T)[:, order]


def _seeded(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _fourier_spectrum(D: LatticeOperator, k: int, seed: int, want_vectors: bool, dense_limit: int) -> _Spectrum:
    g = D.grid
    scale = _estimate_norm(D, seed)
    cands = []
    for k3 in range(g.N):
        for k4 in range(g.N4):
            s, V = _block_smallest(D.block(k3, k4), k, want_vectors, seed, dense_limit, scale)
            for n, val in enumerate(s):
                cands.append((float(val), k3, k4, None if V is None else V[:, n]))
    cands.sort(key=lambda c: (c[0], c[1], c[2]))
    chosen = cands[:k]
    vals = np.array([c[0] for c in chosen])
    vecs = [D.embed_block_vector(c[3], c[1], c[2]) for c in chosen] if want_vectors else []
    return _Spectrum(vals, vecs, scale, "fourier-blocks", g.N * g.N4, info={"modes": [(c[1], c[2]) for c in chosen]})


def _estimate_norm(D: LatticeOperator, seed: int, steps: int = 30) -> float:
    """Power iteration on D*D (a lower estimate of ||D||, deterministic for a seed)."""
    v = _seeded(D.shape[1], seed)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(steps):
        w = D.adjoint(D.apply(v)).ravel()
        lam = float(np.linalg.norm(w))
        v = w / lam
    return float(np.sqrt(lam))


def _lanczos_spectrum(D: LatticeOperator, k: int, seed: int, maxiter: int | None, tol: float, shift_invert: bool):
    n = D.shape[1]
    scale = _estimate_norm(D, seed)
    D.matvecs = 0
    try:
        if shift_invert:
            M = D.sparse()
            H = (M.conj().T @ M).tocsc()
            delta = (1e-7 * max(scale, 1.0)) ** 2
            lu = spla.splu((H + delta * sp.identity(n, format="csc")).tocsc())
            op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
            _, V = spla.eigsh(op, k=min(k + 4, n - 2), which="LM", v0=_seeded(n, seed), tol=tol, maxiter=maxiter)
            method = "shift-invert-lanczos"
        else:
            _, V = spla.eigsh(
                D.normal_operator(), k=min(k + 4, n - 2), which="SA", v0=_seeded(n, seed), tol=tol, maxiter=maxiter
            )
            method = "lanczos"
        converged = True
    except spla.ArpackNoConvergence as exc:
        V = exc.eigenvectors
        method = "lanczos"
        converged = False
        if V is None or V.shape[1] == 0:
            raise SpectralError(f"eigensolver did not converge within maxiter={maxiter}") from None
    V, _ = np.linalg.qr(V)
    DV = np.stack([D.apply(V[:, c]).ravel() for c in range(V.shape[1])], axis=1)
    _, s, Wh = np.linalg.svd(DV, full_matrices=False)
    order = np.argsort(s)[:k]
    vecs = V @ Wh.conj().T
    full = [vecs[:, o].reshape((D.n_in,) + D.grid.shape) for o in order]
    return _Spectrum(s[order], full, scale, method, D.matvecs, converged)


def _spectrum(D, k, seed=0, method="auto", maxiter=None, tol=1e-12, want_vectors=True, dense_limit=600):
    if k < 1:
        raise ValueError("k must be at least 1")
    if method == "auto":
        if D.x34_deviation() <= 1e-13:
            method = "fourier"
        elif D.shape[1] <= 40000:
            method = "shift-invert"
        else:
            method = "lanczos"
    if method == "fourier":
        dev = D.x34_deviation()
        if dev > 1e-13:
            raise SpectralError(f"operator varies along x3/x4 (relative {dev:.2e}); Fourier blocks do not apply")
        spec = _fourier_spectrum(D, k, seed, want_vectors, dense_limit)
        spec.info["x34_deviation"] = dev
        return spec
    if method in ("lanczos", "shift-invert"):
        return _lanczos_spectrum(D, k, seed, maxiter, tol, method == "shift-invert")
    if method == "dense":
        A = D.sparse().toarray()
        _, s, Vh = np.linalg.svd(A)
        order = np.argsort(s)[:k]
        vecs = [Vh[o].conj().reshape((D.n_in,) + D.grid.shape) for o in order]
        return _Spectrum(s[order], vecs, _estimate_norm(D, seed), "dense", 1, info={"norm": float(s.max())})
    raise ValueError(f"unknown method {method!r}")


def smallest_singular_values(D: LatticeOperator, k: int = 6, seed: int = 0, maxiter=None, tol=1e-12, method="auto"):
    """The k smallest singular values, sorted ascending."""
    return _spectrum(D, k, seed, method, maxiter, tol, want_vectors=False).values


# kernel dimension ---------------------------------------------------------------------


@dataclass
class KernelDimension:
    dimension: int | None
    status: str
    gap_ratio: float | None
    cap: float
    diagnostic: str

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "status": self.status,
            "gap_ratio": self.gap_ratio,
            "cap": self.cap,
            "diagnostic": self.diagnostic,
        }


def kernel_dimension(values, gap_factor: float = 100.0, scale: float = 1.0, cap_rel: float = 1e-6) -> KernelDimension:
    """Count the values below ``cap_rel * scale`` and insist on a clean gap after them."""
    vals = np.asarray(values, dtype=float)
    if vals.size == 0 or np.any(np.diff(vals) < 0) or np.any(vals < 0):
        raise ValueError("values must be non-negative and sorted")
    cap = cap_rel * scale
    m = int(np.sum(vals <= cap))
    if m == vals.size:
        return KernelDimension(None, "indeterminate", None, cap, f"all {m} values are below the cap {cap:.3e}; raise k")
    nxt = vals[m]
    if m == 0:
        return KernelDimension(0, "ok", None, cap, f"no value below the cap {cap:.3e}")
    prev = vals[m - 1]
    ratio = float(nxt / prev) if prev > 0 else float("inf")
    if ratio >= gap_factor:
        return KernelDimension(m, "ok", ratio, cap, f"{m} values <= {cap:.3e}; next/last = {ratio:.3e}")
    # a candidate below the cap without a clean gap: report the competing counts
    alt = [j for j in range(1, m) if vals[j] >= gap_factor * vals[j - 1]]
    return KernelDimension(
        None,
        "indeterminate",
        ratio,
        cap,
        f"{m} values <= cap but gap {ratio:.3e} < {gap_factor}; other gap positions {alt}",
    )


# report --------------------------------------------------------------------------------


@dataclass
class SpectralReport:
    metric_id: str
    N: int
    k: int
    singular_values: list
    dimension: int | None
    status: str
    gap_ratio: float | None
    residuals: list
    seed: int
    method: str
    iterations: int
    scale: float
    cap: float
    diagnostic: str
    wall_ms: float
    basis: list = field(default_factory=list, repr=False)

    def to_dict(self, timing: bool = True):
        out = {
            "metric": self.metric_id,
            "N": self.N,
            "k": self.k,
            "singular_values": [float(x) for x in self.singular_values],
            "dimension": self.dimension,
            "status": self.status,
            "gap_ratio": self.gap_ratio,
            "residuals": [float(x) for x in self.residuals],
            "seed": self.seed,
            "method": self.method,
            "iterations": self.iterations,
            "scale": self.scale,
            "cap": self.cap,
            "diagnostic": self.diagnostic,
        }
        if timing:
            out["wall_ms"] = self.wall_ms
        return out


def analyse(
    D: LatticeOperator,
    k: int = 6,
    seed: int = 0,
    gap_factor: float = 100.0,
    cap_rel: float = 1e-6,
    method: str = "auto",
    maxiter=None,
    tol: float = 1e-12,
    metric_id: str = "",
) -> SpectralReport:
    """Spectrum, kernel dimension and an orthonormal kernel basis."""
    t0 = time.perf_counter()
    spec = _spectrum(D, k, seed, method, maxiter, tol, want_vectors=True)
    kd = kernel_dimension(spec.values, gap_factor, spec.scale, cap_rel)
    basis_ = []
    res = []
    if kd.dimension:
        basis_ = _orthonormalise(D, spec.vectors[: kd.dimension])
        res = [residual(D, v) for v in basis_]
    wall = (time.perf_counter() - t0) * 1e3
    return SpectralReport(
        metric_id,
        D.grid.N,
        k,
        list(spec.values),
        kd.dimension,
        kd.status if spec.converged else "indeterminate",
        kd.gap_ratio,
        res,
        seed,
        spec.method,
        spec.iterations,
        spec.scale,
        kd.cap,
        kd.diagnostic if spec.converged else "eigensolver did not converge; " + kd.diagnostic,
        wall,
        basis_,
    )


# kernel vectors ---------------------------------------------------------------------------


def _as_array(D: LatticeOperator, v) -> np.ndarray:
    if isinstance(v, FieldForm):
        if v.grid != D.grid:
            raise ValueError("candidate lives on a different grid")
        if isinstance(D, HarmonicOperator):
            return v.components((1, 1))
        return np.moveaxis(v.degree_vector(2), -1, 0)
    return np.asarray(v, dtype=complex).reshape((D.n_in,) + D.grid.shape)


def _whiten(D: LatticeOperator, arr: np.ndarray) -> np.ndarray:
    """Coefficient array -> vector whose Euclidean product is the metric L^2 product."""
    h = getattr(D, "h", None)
    if h is None:
        return arr.ravel() / np.sqrt(D.grid.size)
    G = gram_matrices(h, 2)
    if isinstance(D, HarmonicOperator):
        pos = np.array(bidegree_positions(1, 1))
        G = G[..., pos[:, None], pos[None, :]]
    w = volume_weight(h, D.frame, D.grid)
    # <a, b> = a^T G conj(b); with G = C C^H the whitened vector is C^T a
    C = np.linalg.cholesky(G)
    white = np.einsum("...ji,j...->i...", C, arr) * np.sqrt(w / D.grid.size)
    return white.ravel()


def _orthonormalise(D, vectors) -> list:
    if not vectors:
        return []
    X = np.stack([_whiten(D, _as_array(D, v)) for v in vectors], axis=1)
    R = np.linalg.qr(X, mode="r")
    Rinv = np.linalg.inv(R)
    raw = np.stack([_as_array(D, v).ravel() for v in vectors], axis=1) @ Rinv
    return [raw[:, c].reshape((D.n_in,) + D.grid.shape) for c in range(raw.shape[1])]


def extract_kernel_basis(D: LatticeOperator, dim: int, seed: int = 0, method: str = "auto") -> list:
    """L^2-orthonormal near-kernel vectors, as coefficient arrays (n_in, *grid.shape)."""
    spec = _spectrum(D, max(dim, 1), seed, method, None, 1e-12, want_vectors=True)
    return _orthonormalise(D, spec.vectors[:dim])


def to_field_form(D: LatticeOperator, arr: np.ndarray) -> FieldForm:
    if isinstance(D, HarmonicOperator):
        return FieldForm.from_components(D.frame, D.grid, (1, 1), list(arr))
    return FieldForm(D.frame, D.grid, {I: arr[n] for n, I in enumerate(basis(2))})


def residual(D: LatticeOperator, candidate) -> float:
    """||D v|| / ||v|| in the discrete coefficient l2 norms."""
    v = _as_array(D, candidate)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("zero candidate")
    return float(np.linalg.norm(D.apply(v)) / nv)


def subspace_angles(D: LatticeOperator, basis_a, basis_b) -> np.ndarray:
    """Principal angles (ascending) between two spans in the metric L^2 product."""
    A = np.stack([_whiten(D, _as_array(D, v)) for v in basis_a], axis=1)
    B = np.stack([_whiten(D, _as_array(D, v)) for v in basis_b], axis=1)
    for name, M in (("first", A), ("second", B)):
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= 1e-10 * s[0]:
            raise ValueError(f"{name} basis is rank deficient")
    return np.sort(sla.subspace_angles(A, B))


# ASD kernel ---------------------------------------------------------------------------------


def asd_harmonic_kernel(
    algebra, frame, metric, grid, k: int = 6, seed: int = 0, gap_factor: float = 100.0, orientation: str = "J",
    method: str = "auto",
):
    """Anti-self-dual closed 2-form fields: kernel of (d gamma, gamma + *gamma).

    Returns (report, basis) with basis vectors as 6-component arrays on the
    2-form monomials.
    """
    D = assemble_asd_operator(algebra, frame, metric, grid, orientation)
    rep = analyse(D, k=k, seed=seed, gap_factor=gap_factor, method=method, metric_id=f"asd:{getattr(metric, 'name', '')}")
    return rep, rep.basis
