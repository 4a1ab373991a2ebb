"""Cohomology of the invariant (Chevalley-Eilenberg) complex, harmonic
representatives and the self-dual / anti-self-dual split of H^2.

Invariant forms compute the de Rham cohomology of a nilmanifold, so every
rank here is an exact rational rank on the 16-dimensional complex.  A
Riemannian invariant metric is given by a rational orthonormal coframe matrix
``A`` (``f^a = sum_j A[a][j] e^j``, so ``g = A^T A``), which keeps the Hodge
star rational.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import DIM, AcsFrame, InvariantForm, NilLieAlgebra, basis, sort_sign
from .exact import Qi, det, inverse, nullspace, qi, rank, rref, solve

__all__ = [
    "RiemannianMetric",
    "BettiReport",
    "SplitResult",
    "d_matrix",
    "real_star_matrix",
    "ce_betti",
    "harmonic_invariant_forms",
    "sd_asd_split",
    "random_invariant_metric",
    "betti_report",
]


class RiemannianMetric:
    """Invariant metric g = A^T A on the real coframe; orientation +1 keeps e^1234."""

    def __init__(self, A=None, orientation: int = 1, name: str = "custom"):
        A = A if A is not None else [[int(i == j) for j in range(DIM)] for i in range(DIM)]
        self.A = [[qi(x) for x in row] for row in A]
        if any(x.im for row in self.A for x in row):
            raise ValueError("orthonormal coframe matrix must be real")
        d = det(self.A)
        if not d:
            raise ValueError("orthonormal coframe matrix is singular")
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        # star for the chosen orientation; f^0123 = det(A) e^1234
        self.sign = orientation * (1 if d.re > 0 else -1)
        self.orientation = orientation
        self.name = name

    @classmethod
    def from_frame(cls, frame: AcsFrame, orientation: int | None = None) -> "RiemannianMetric":
        """Metric whose orthonormal coframe is Re/Im of Phi^1, Phi^2 (h = identity).

        With ``orientation=None`` the almost-complex orientation is used.
        """
        rows = []
        for i in range(2):
            rows.append([x.re for x in frame.P[i]])
            rows.append([x.im for x in frame.P[i]])
        if orientation is None:
            # (Re Phi^1, Im Phi^1, Re Phi^2, Im Phi^2) is J-positive: omega^2/2 = f^0123
            orientation = 1 if det([[qi(x) for x in r] for r in rows]).re > 0 else -1
        return cls(rows, orientation, name=f"g({frame.name})")

    def __repr__(self):
        return f"RiemannianMetric({self.name!r}, orientation={self.orientation})"


def _exterior_power(M, k):
    B = basis(k)
    if k == 0:
        return [[Qi(1)]]
    return [[det([[M[i][j] for j in J] for i in I]) for J in B] for I in B]


def real_star_matrix(metric: RiemannianMetric, k: int):
    """Exact star on k-forms in the e-basis (column J = coefficients of *e^J)."""
    A = metric.A
    Ainv = inverse(A)
    # coefficients: c_f = L^k(Ainv)^T c_e ; star in f ; back with L^(4-k)(A)^T
    to_f = [list(r) for r in zip(*_exterior_power(Ainv, k))]
    back = [list(r) for r in zip(*_exterior_power(A, DIM - k))]
    B, Bc = basis(k), basis(DIM - k)
    R = [[Qi(0)] * len(B) for _ in Bc]
    for j, J in enumerate(B):
        comp = tuple(i for i in range(DIM) if i not in J)
        s, _ = sort_sign(J + comp)
        R[Bc.index(comp)][j] = Qi(s * metric.sign)
    return _mm(back, _mm(R, to_f))


def _mm(a, b):
    return [[sum((a[i][t] * b[t][j] for t in range(len(b))), Qi(0)) for j in range(len(b[0]))] for i in range(len(a))]


def d_matrix(algebra: NilLieAlgebra, k: int):
    """Matrix of d from k-forms to (k+1)-forms in the e-basis."""
    cf = algebra.real_coframe
    B, B1 = basis(k), basis(k + 1)
    M = [[Qi(0)] * len(B) for _ in B1]
    for j, J in enumerate(B):
        for key, c in cf.d_monomial(J).items():
            M[B1.index(key)][j] = c
    return M


def _forms(algebra, k, vectors):
    cf = algebra.real_coframe
    B = basis(k)
    return [InvariantForm(cf, {B[i]: v[i] for i in range(len(B))}) for v in vectors]


def ce_betti(algebra: NilLieAlgebra) -> list[int]:
    """b_0..b_4 of the invariant complex."""
    algebra.validate()
    ranks = [rank(d_matrix(algebra, k)) if k < DIM else 0 for k in range(DIM + 1)]
    dims = [len(basis(k)) for k in range(DIM + 1)]
    return [dims[k] - ranks[k] - (ranks[k - 1] if k else 0) for k in range(DIM + 1)]


def harmonic_invariant_forms(algebra: NilLieAlgebra, metric: RiemannianMetric | None, k: int) -> list[InvariantForm]:
    """Basis of ker d ∩ ker d* on invariant k-forms."""
    algebra.validate()
    metric = metric or RiemannianMetric()
    rows = []
    if k < DIM:
        rows += d_matrix(algebra, k)
    if k > 0:
        # d* = ±*d*, so ker d* = ker (d∘*) ; * maps k-forms to (4-k)-forms
        S = real_star_matrix(metric, k)
        if DIM - k < DIM:
            rows += _mm(d_matrix(algebra, DIM - k), S)
    n = len(basis(k))
    ns = nullspace(rows, n) if rows else nullspace([], n)
    return _forms(algebra, k, ns)


@dataclass
class SplitResult:
    b_plus: int
    b_minus: int
    plus: list = field(default_factory=list)
    minus: list = field(default_factory=list)


def sd_asd_split(forms: list[InvariantForm], metric: RiemannianMetric | None = None) -> SplitResult:
    """Diagonalise * on the span of ``forms`` (2-forms on the real coframe)."""
    metric = metric or RiemannianMetric()
    if not forms:
        return SplitResult(0, 0)
    cf = forms[0].coframe
    B = basis(2)
    V = [[f.coefficient(I) for f in forms] for I in B]  # 6 x m
    S = real_star_matrix(metric, 2)
    SV = _mm(S, V)
    m = len(forms)
    # R with V R = S V (exists iff * preserves the span)
    red_rows = [list(V[i]) + list(SV[i]) for i in range(len(B))]
    if rank(V) != m:
        raise ValueError("input forms are linearly dependent")
    if rank(red_rows) != m:
        raise ValueError("the Hodge star does not preserve the span of the given forms")
    # solve V R = S V on a set of independent rows of V
    _, piv = rref([list(r) for r in zip(*V)])
    Vs = [V[i] for i in piv]
    SVs = [SV[i] for i in piv]
    R = [list(r) for r in zip(*solve(Vs, [list(c) for c in zip(*SVs)]))]
    eye = [[Qi(int(i == j)) for j in range(m)] for i in range(m)]
    out = []
    for sgn in (1, -1):
        M = [[R[i][j] - eye[i][j] * sgn for j in range(m)] for i in range(m)]
        coeffs = nullspace(M, m)
        vecs = [[sum((V[r][j] * c[j] for j in range(m)), Qi(0)) for r in range(len(B))] for c in coeffs]
        out.append([InvariantForm(cf, {B[r]: v[r] for r in range(len(B))}) for v in vecs])
    return SplitResult(len(out[0]), len(out[1]), out[0], out[1])


def random_invariant_metric(seed: int, orientation: int = 1, size: int = 5) -> RiemannianMetric:
    """A random rational orthonormal-coframe matrix with positive determinant."""
    rng = random.Random(seed)
    while True:
        A = [[Fraction(rng.randint(-size, size), rng.randint(1, size)) for _ in range(DIM)] for _ in range(DIM)]
        d = det([[qi(x) for x in r] for r in A]).re
        if d > 0:
            return RiemannianMetric(A, orientation, name=f"random(seed={seed})")


@dataclass
class BettiReport:
    betti: list[int]
    b_plus: int
    b_minus: int
    harmonic: dict[int, list[InvariantForm]]
    self_dual: list[InvariantForm]
    anti_self_dual: list[InvariantForm]

    @property
    def euler(self) -> int:
        return sum((-1) ** k * b for k, b in enumerate(self.betti))

    def to_dict(self):
        return {
            "betti": self.betti,
            "b_plus": self.b_plus,
            "b_minus": self.b_minus,
            "euler_characteristic": self.euler,
            "harmonic": {str(k): [str(f) for f in v] for k, v in self.harmonic.items()},
            "self_dual": [str(f) for f in self.self_dual],
            "anti_self_dual": [str(f) for f in self.anti_self_dual],
        }


def betti_report(algebra: NilLieAlgebra, metric: RiemannianMetric | None = None) -> BettiReport:
    metric = metric or RiemannianMetric()
    betti = ce_betti(algebra)
    harmonic = {k: harmonic_invariant_forms(algebra, metric, k) for k in range(DIM + 1)}
    for k in range(DIM + 1):
        if len(harmonic[k]) != betti[k]:
            raise ArithmeticError(f"harmonic {k}-forms: {len(harmonic[k])} found, b_{k} = {betti[k]}")
    split = sd_asd_split(harmonic[2], metric)
    return BettiReport(betti, split.b_plus, split.b_minus, harmonic, split.plus, split.minus)
