"""Exact exterior algebra of left-invariant forms on a 4-dimensional Lie group.

Forms are stored as maps from strictly increasing index tuples to exact
Gaussian rationals.  Two kinds of coframes are used:

* the real coframe ``e^1..e^4`` dual to a Lie-algebra basis, on which ``d`` is
  given by the structure constants, and
* the complex coframe ``(Phi^1, Phi^2, Phi^1b, Phi^2b)`` of an almost-complex
  structure, ordered so that indices 0, 1 are of type (1,0) and 2, 3 of type
  (0,1).  Here ``d`` splits as ``mu + partial + dbar + mubar``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

from .exact import Qi, I, det, inverse, qi

__all__ = [
    "InvalidAlgebraError",
    "sort_sign",
    "Coframe",
    "InvariantForm",
    "NilLieAlgebra",
    "AcsFrame",
    "DSplit",
    "wedge",
    "d_invariant",
    "split_d",
    "d_part",
    "structure_equations",
    "verify_d2_identities",
    "is_integrable",
    "IDENTITY_NAMES",
]

DIM = 4


class InvalidAlgebraError(ValueError):
    """Structure constants whose induced d does not square to zero."""


def sort_sign(idx: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Sort an index sequence, returning the permutation sign (0 on repeats)."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    # insertion sort keeps the parity bookkeeping obvious
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(idx)


def basis(k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(DIM), k))


class Coframe:
    """A basis of invariant 1-forms together with d of each basis element."""

    def __init__(self, name: str, symbols: tuple[str, ...], d_one, *, complex_type: bool):
        self.name = name
        self.symbols = symbols
        self.complex_type = complex_type
        # d of the basis 1-forms, as coefficient dicts on 2-form monomials
        self._d_one = [dict(x) for x in d_one]
        self._d_cache: dict[tuple[int, ...], dict] = {}

    def __repr__(self):
        return f"Coframe({self.name!r})"

    def bidegree(self, idx: tuple[int, ...]) -> tuple[int, int]:
        if not self.complex_type:
            raise ValueError("bidegrees are only defined on a complex coframe")
        p = sum(1 for i in idx if i < 2)
        return p, len(idx) - p

    def label(self, idx: tuple[int, ...]) -> str:
        if not idx:
            return "1"
        return "".join(self.symbols[i] for i in idx)

    def conj_index(self, i: int) -> int:
        return (i + 2) % 4 if self.complex_type else i

    def d_monomial(self, idx: tuple[int, ...]) -> dict:
        """d of a basis monomial by the Leibniz rule (cached)."""
        hit = self._d_cache.get(idx)
        if hit is not None:
            return hit
        out: dict[tuple[int, ...], Qi] = {}
        for r, a in enumerate(idx):
            sgn0 = -1 if r % 2 else 1
            for two, c in self._d_one[a].items():
                s, key = sort_sign(idx[:r] + two + idx[r + 1:])
                if s:
                    out[key] = out.get(key, Qi(0)) + c * (s * sgn0)
        out = {k: v for k, v in out.items() if v}
        self._d_cache[idx] = out
        return out


class InvariantForm:
    """A (possibly inhomogeneous) invariant form with exact coefficients."""

    __slots__ = ("coframe", "coeffs")

    def __init__(self, coframe: Coframe, coeffs: Mapping | None = None):
        self.coframe = coframe
        clean: dict[tuple[int, ...], Qi] = {}
        for idx, c in (coeffs or {}).items():
            s, key = sort_sign(idx)
            if not s:
                continue
            c = qi(c) * s
            v = clean.get(key, Qi(0)) + c
            if v:
                clean[key] = v
            else:
                clean.pop(key, None)
        self.coeffs = clean

    @classmethod
    def monomial(cls, coframe: Coframe, idx, coeff=1) -> "InvariantForm":
        return cls(coframe, {tuple(idx): coeff})

    @classmethod
    def constant(cls, coframe: Coframe, value=1) -> "InvariantForm":
        return cls(coframe, {(): value})

    @classmethod
    def basis(cls, coframe: Coframe, k: int) -> list["InvariantForm"]:
        return [cls.monomial(coframe, idx) for idx in basis(k)]

    def coefficient(self, idx) -> Qi:
        s, key = sort_sign(idx)
        return self.coeffs.get(key, Qi(0)) * s if s else Qi(0)

    def degrees(self) -> set[int]:
        return {len(k) for k in self.coeffs}

    def degree(self) -> int:
        ds = self.degrees()
        if len(ds) > 1:
            raise ValueError("form is not of pure degree")
        return ds.pop() if ds else 0

    def bidegrees(self) -> set[tuple[int, int]]:
        return {self.coframe.bidegree(k) for k in self.coeffs}

    def bidegree(self) -> tuple[int, int] | None:
        bd = self.bidegrees()
        if len(bd) > 1:
            raise ValueError("form is not (p,q)-homogeneous")
        return bd.pop() if bd else None

    def part(self, k: int) -> "InvariantForm":
        return InvariantForm(self.coframe, {i: c for i, c in self.coeffs.items() if len(i) == k})

    def bidegree_part(self, p: int, q: int) -> "InvariantForm":
        return InvariantForm(
            self.coframe, {i: c for i, c in self.coeffs.items() if self.coframe.bidegree(i) == (p, q)}
        )

    def conj(self) -> "InvariantForm":
        cf = self.coframe
        return InvariantForm(cf, {tuple(cf.conj_index(i) for i in k): c.conjugate() for k, c in self.coeffs.items()})

    def is_zero(self) -> bool:
        return not self.coeffs

    def _check(self, other: "InvariantForm"):
        if not isinstance(other, InvariantForm):
            raise TypeError("expected an InvariantForm")
        if other.coframe is not self.coframe:
            raise ValueError("forms live on different coframes")

    def __add__(self, other):
        self._check(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, Qi(0)) + c
        return InvariantForm(self.coframe, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return InvariantForm(self.coframe, {k: -c for k, c in self.coeffs.items()})

    def __mul__(self, scalar):
        s = qi(scalar)
        return InvariantForm(self.coframe, {k: c * s for k, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (Qi(1) / qi(scalar))

    def __eq__(self, other):
        if not isinstance(other, InvariantForm):
            return NotImplemented
        return self.coframe is other.coframe and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def wedge(self, other: "InvariantForm") -> "InvariantForm":
        return wedge(self, other)

    def __str__(self):
        if not self.coeffs:
            return "0"
        terms = []
        for k in sorted(self.coeffs, key=lambda t: (len(t), t)):
            terms.append(f"({self.coeffs[k]})*{self.coframe.label(k) if k else '1'}")
        return " + ".join(terms)

    __repr__ = __str__


def wedge(a: InvariantForm, b: InvariantForm) -> InvariantForm:
    """Exterior product; graded-commutative and exact."""
    a._check(b)
    out: dict[tuple[int, ...], Qi] = {}
    for ka, ca in a.coeffs.items():
        for kb, cb in b.coeffs.items():
            s, key = sort_sign(ka + kb)
            if s:
                out[key] = out.get(key, Qi(0)) + ca * cb * s
    return InvariantForm(a.coframe, out)


def d_invariant(a: InvariantForm) -> InvariantForm:
    """Exterior derivative of an invariant form."""
    out: dict[tuple[int, ...], Qi] = {}
    for k, c in a.coeffs.items():
        for key, v in a.coframe.d_monomial(k).items():
            out[key] = out.get(key, Qi(0)) + c * v
    return InvariantForm(a.coframe, out)


# bidegree shifts of mu, partial, dbar, mubar
SHIFTS = {"mu": (2, -1), "partial": (1, 0), "dbar": (0, 1), "mubar": (-1, 2)}


def d_part(a: InvariantForm, name: str) -> InvariantForm:
    """Apply one of mu, partial, dbar, mubar to an arbitrary form."""
    dp, dq = SHIFTS[name]
    out = InvariantForm(a.coframe)
    for p, q in a.bidegrees():
        piece = d_invariant(a.bidegree_part(p, q))
        out = out + piece.bidegree_part(p + dp, q + dq)
    return out


@dataclass(frozen=True)
class DSplit:
    mu: InvariantForm
    partial: InvariantForm
    dbar: InvariantForm
    mubar: InvariantForm

    def total(self) -> InvariantForm:
        return self.mu + self.partial + self.dbar + self.mubar


def split_d(a: InvariantForm) -> DSplit:
    """Split d(a) of a (p,q)-homogeneous form into its four bidegree parts."""
    bd = a.bidegree()
    da = d_invariant(a)
    cf = a.coframe
    if bd is None:
        zero = InvariantForm(cf)
        return DSplit(zero, zero, zero, zero)
    p, q = bd
    parts = {name: da.bidegree_part(p + dp, q + dq) for name, (dp, dq) in SHIFTS.items()}
    return DSplit(**parts)


class NilLieAlgebra:
    """Structure constants ``c^k_ij`` (1-based, i<j) with de^k = -sum c^k_ij e^ij."""

    def __init__(self, constants: Mapping[tuple[int, int, int], object], name: str = "custom"):
        clean = {}
        for (k, i, j), c in constants.items():
            if not (1 <= k <= DIM and 1 <= i <= DIM and 1 <= j <= DIM) or i == j:
                raise ValueError(f"bad structure-constant index {(k, i, j)}")
            c = Fraction(c)
            if i > j:
                i, j, c = j, i, -c
            if c:
                clean[(k, i, j)] = clean.get((k, i, j), Fraction(0)) + c
        self.constants = {k: v for k, v in clean.items() if v}
        self.name = name

    def __repr__(self):
        return f"NilLieAlgebra({self.name!r}, {self.constants})"

    @classmethod
    def kodaira_thurston(cls) -> "NilLieAlgebra":
        # [e1, e2] = e3, i.e. de^3 = -e^1 ^ e^2
        return cls({(3, 1, 2): 1}, name="kodaira-thurston")

    @classmethod
    def abelian(cls) -> "NilLieAlgebra":
        return cls({}, name="torus")

    @cached_property
    def real_coframe(self) -> Coframe:
        d_one = []
        for k in range(1, DIM + 1):
            d_one.append({(i - 1, j - 1): Qi(-c) for (kk, i, j), c in self.constants.items() if kk == k})
        return Coframe(f"{self.name}:e", ("1", "2", "3", "4"), d_one, complex_type=False)

    def d_squared_defects(self) -> list[InvariantForm]:
        cf = self.real_coframe
        return [d_invariant(d_invariant(f)) for f in InvariantForm.basis(cf, 1)]

    def is_valid(self) -> bool:
        # d^2 is a derivation, so it vanishes iff it vanishes on generators
        return all(f.is_zero() for f in self.d_squared_defects())

    def validate(self) -> None:
        for k, f in enumerate(self.d_squared_defects(), start=1):
            if not f.is_zero():
                raise InvalidAlgebraError(f"d(d e^{k}) = {f} != 0 (Jacobi identity fails)")


class AcsFrame:
    """An almost-complex structure given by its invariant (1,0)-coframe.

    Row ``i`` of ``P`` gives ``Phi^i = sum_j P[i][j] e^j``.
    """

    def __init__(self, algebra: NilLieAlgebra, P, name: str = "custom"):
        self.algebra = algebra
        self.name = name
        self.P = [[qi(x) for x in row] for row in P]
        if len(self.P) != 2 or any(len(r) != DIM for r in self.P):
            raise ValueError("frame matrix must be 2x4")
        self.Q = self.P + [[x.conjugate() for x in row] for row in self.P]
        if not det(self.Q):
            raise ValueError("Phi^1, Phi^2 and their conjugates do not form a coframe")
        self.Q_inv = inverse(self.Q)

    def __repr__(self):
        return f"AcsFrame({self.name!r})"

    @classmethod
    def j_a(cls, algebra: NilLieAlgebra, a) -> "AcsFrame":
        a = qi(a)
        return cls(algebra, [[1, 0, I, a], [0, 1, 0, I]], name=f"J_a(a={a})")

    @classmethod
    def example42(cls, algebra: NilLieAlgebra) -> "AcsFrame":
        return cls(algebra, [[1, 0, I, 0], [0, 1, 0, I]], name="J_example42")

    @cached_property
    def coframe(self) -> Coframe:
        real = self.algebra.real_coframe
        d_one = []
        for a in range(DIM):
            de = InvariantForm(real)
            for j in range(DIM):
                if self.Q[a][j]:
                    de = de + d_invariant(InvariantForm.monomial(real, (j,))) * self.Q[a][j]
            d_one.append(self._convert(de, real, None).coeffs)
        return Coframe(f"{self.algebra.name}:{self.name}", ("1", "2", "1b", "2b"), d_one, complex_type=True)

    def _convert(self, form: InvariantForm, src: Coframe, dst: Coframe | None) -> InvariantForm:
        # e^i = sum_b Q_inv[i][b] eps^b  or  eps^a = sum_j Q[a][j] e^j
        M = self.Q_inv if src.complex_type is False else self.Q
        target = dst
        if target is None:
            # bootstrap: a coframe without d, used only for linear algebra
            target = Coframe("tmp", ("1", "2", "1b", "2b"), [{}] * DIM, complex_type=True)
        ones = [InvariantForm(target, {(b,): M[i][b] for b in range(DIM)}) for i in range(DIM)]
        out = InvariantForm(target)
        for idx, c in form.coeffs.items():
            term = InvariantForm.constant(target, c)
            for i in idx:
                term = wedge(term, ones[i])
            out = out + term
        return out

    def to_complex(self, form: InvariantForm) -> InvariantForm:
        """Rewrite a form on the real coframe in the complex coframe."""
        if form.coframe is not self.algebra.real_coframe:
            raise ValueError("expected a form on the real coframe of this algebra")
        return self._convert(form, form.coframe, self.coframe)

    def to_real(self, form: InvariantForm) -> InvariantForm:
        if form.coframe is not self.coframe:
            raise ValueError("expected a form on this frame's complex coframe")
        return self._convert(form, form.coframe, self.algebra.real_coframe)

    def phi(self, i: int) -> InvariantForm:
        """The basis 1-form Phi^i (i = 1, 2) or its conjugate (i = -1, -2)."""
        idx = i - 1 if i > 0 else 1 - i
        return InvariantForm.monomial(self.coframe, (idx,))

    def dual_frame(self):
        """Coefficients X_b = sum_j D[j][b] e_j of the frame dual to the complex coframe."""
        return self.Q_inv

    def real_form(self, coeffs: Mapping[tuple[int, ...], object]) -> InvariantForm:
        """Build a form from 1-based real-coframe index tuples and rewrite it in Phi."""
        real = self.algebra.real_coframe
        f = InvariantForm(real, {tuple(i - 1 for i in k): v for k, v in coeffs.items()})
        return self.to_complex(f)


def structure_equations(algebra: NilLieAlgebra, frame: AcsFrame) -> dict[str, dict[str, Qi]]:
    """Exact coefficients of d Phi^i on the complex 2-form basis."""
    cf = frame.coframe
    out = {}
    for i in (1, 2):
        dphi = d_invariant(frame.phi(i))
        out[f"dPhi^{i}"] = {cf.label(k): dphi.coeffs[k] for k in sorted(dphi.coeffs)}
    return out


IDENTITY_NAMES = (
    "mu^2",
    "mu partial + partial mu",
    "partial^2 + mu dbar + dbar mu",
    "partial dbar + dbar partial + mu mubar + mubar mu",
    "dbar^2 + mubar partial + partial mubar",
    "mubar dbar + dbar mubar",
    "mubar^2",
)

_IDENTITY_TERMS = (
    (("mu", "mu"),),
    (("mu", "partial"), ("partial", "mu")),
    (("partial", "partial"), ("mu", "dbar"), ("dbar", "mu")),
    (("partial", "dbar"), ("dbar", "partial"), ("mu", "mubar"), ("mubar", "mu")),
    (("dbar", "dbar"), ("mubar", "partial"), ("partial", "mubar")),
    (("mubar", "dbar"), ("dbar", "mubar")),
    (("mubar", "mubar"),),
)


def verify_d2_identities(algebra: NilLieAlgebra, frame: AcsFrame) -> dict[str, bool]:
    """Check the seven bidegree components of d^2 = 0 on every basis form."""
    cf = frame.coframe
    forms = [InvariantForm.monomial(cf, idx) for k in range(DIM + 1) for idx in basis(k)]
    result = {}
    for name, terms in zip(IDENTITY_NAMES, _IDENTITY_TERMS):
        ok = True
        for f in forms:
            total = InvariantForm(cf)
            for outer, inner in terms:
                total = total + d_part(d_part(f, inner), outer)
            if not total.is_zero():
                ok = False
                break
        result[name] = ok
    return result


def is_integrable(algebra: NilLieAlgebra, frame: AcsFrame) -> bool:
    """True iff mu and mubar vanish on invariant 1-forms."""
    for f in InvariantForm.basis(frame.coframe, 1):
        if not d_part(f, "mu").is_zero() or not d_part(f, "mubar").is_zero():
            return False
    return True
