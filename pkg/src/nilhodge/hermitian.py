"""Hermitian metrics on an almost-complex coframe and the operators they induce.

A metric is a Hermitian 2x2 matrix ``h`` (constants or coordinate expressions)
with fundamental form ``omega = (i/2) sum h_jk Phi^j ^ Phi^kb``.  Orientation
is the one of the almost-complex structure: ``omega^2 / 2`` is the positive
volume form.

For constant metrics everything is exact: the Hodge star is
``S = v W^-1 G sigma`` where ``W`` is the wedge pairing into ``eps^0123``,
``v`` the volume coefficient, ``G`` the Gram matrix of the induced Hermitian
product and ``sigma`` complex conjugation on monomials.  Field metrics go
through the Cholesky-based pointwise star.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np

from .algebra import AcsFrame, InvariantForm, NilLieAlgebra, basis, d_invariant, sort_sign, wedge
from .exact import Qi, det, inverse, qi, solve
from .expr import Expression, NotExactError, constant_expression, frame_derivative_expression, parse_expression
from .fields import FieldForm, d_field, pointwise_inner, volume_weight
from .grid import TwistedGrid
from .pointwise import MetricError, _cholesky

__all__ = [
    "MetricError",
    "MetricSpec",
    "LeeFormResult",
    "Classification",
    "fundamental_form",
    "hodge_star",
    "star_matrix_exact",
    "gram_matrix_exact",
    "lee_form",
    "j_action",
    "dc",
    "gauduchon_defect",
    "lambda_contract",
    "integrate",
    "classify_metric",
    "CLASS_LABELS",
]

CLASS_LABELS = ("AlmostKahler", "GloballyConformallyKahler", "StrictlyLCK", "General")


def _entry(x):
    if isinstance(x, (Qi, Expression)):
        return x
    if isinstance(x, str):
        try:
            return Qi(Fraction(x))
        except ValueError:
            return parse_expression(x)
    return qi(x)


class MetricSpec:
    """Hermitian coefficient matrix of a metric in the Phi-coframe."""

    def __init__(self, h, params: Mapping | None = None, name: str = "custom"):
        self.h = [[_entry(x) for x in row] for row in h]
        if len(self.h) != 2 or any(len(r) != 2 for r in self.h):
            raise MetricError("metric matrix must be 2x2")
        self.params = dict(params or {})
        self.name = name
        if self.is_exact():
            self.exact_h()

    def __repr__(self):
        return f"MetricSpec({self.name!r})"

    @classmethod
    def identity(cls, name: str = "standard") -> "MetricSpec":
        return cls([[1, 0], [0, 1]], name=name)

    def is_constant(self) -> bool:
        return not any(isinstance(x, Expression) and x.depends_on_coordinates(self.params) for r in self.h for x in r)

    def is_exact(self) -> bool:
        try:
            self._exact_entries()
            return True
        except NotExactError:
            return False

    def _exact_entries(self):
        return [[x if isinstance(x, Qi) else x.exact(self.params) for x in row] for row in self.h]

    def exact_h(self):
        """Exact entries; checks Hermitian symmetry and positivity."""
        h = self._exact_entries()
        if h[0][1] != h[1][0].conjugate() or h[0][0].im or h[1][1].im:
            raise MetricError(f"metric {self.name!r} is not Hermitian")
        if h[0][0].re <= 0 or det(h).re <= 0:
            raise MetricError(f"metric {self.name!r} is not positive definite")
        return h

    def sample(self, grid: TwistedGrid) -> np.ndarray:
        env = {**self.params, **grid.env()}
        out = np.empty(grid.shape + (2, 2), dtype=complex)
        for j in range(2):
            for k in range(2):
                x = self.h[j][k]
                val = complex(x) if isinstance(x, Qi) else x.evaluate(env)
                out[..., j, k] = np.broadcast_to(np.asarray(val, dtype=complex), grid.shape)
        if not np.all(np.isfinite(out)):
            raise MetricError(f"metric {self.name!r} has non-finite samples")
        _cholesky(out)
        return out

    def scaled(self, factor, name: str | None = None) -> "MetricSpec":
        """Conformal rescaling ``factor * omega`` (factor an expression or number)."""
        if isinstance(factor, str):
            factor = parse_expression(factor)
        h = []
        for row in self.h:
            new = []
            for x in row:
                if isinstance(factor, Expression):
                    new.append(factor.times(x if isinstance(x, Expression) else constant_expression(x)))
                elif isinstance(x, Qi):
                    new.append(x * qi(factor))
                else:
                    new.append(constant_expression(qi(factor)).times(x))
            h.append(new)
        return MetricSpec(h, self.params, name or f"({factor})*{self.name}")

    def describe(self) -> list[list[str]]:
        return [[str(x) for x in row] for row in self.h]


def fundamental_form(frame: AcsFrame, metric: MetricSpec) -> InvariantForm:
    h = metric.exact_h()
    cf = frame.coframe
    out = {}
    for j in range(2):
        for k in range(2):
            if h[j][k]:
                out[(j, k + 2)] = Qi(0, Fraction(1, 2)) * h[j][k]
    return InvariantForm(cf, out)


# exact star --------------------------------------------------------------------


def gram_matrix_exact(h, k: int):
    """<eps^I, eps^J> on k-monomials (Hermitian, linear in the first slot)."""
    hinv = inverse(h)
    g1 = [[Qi(0)] * 4 for _ in range(4)]
    for j in range(2):
        for m in range(2):
            g1[j][m] = hinv[m][j] * 2
            g1[j + 2][m + 2] = hinv[j][m] * 2
    B = basis(k)
    if k == 0:
        return [[Qi(1)]]
    return [[det([[g1[a][b] for b in J] for a in I]) for J in B] for I in B]


@lru_cache(maxsize=None)
def _wedge_pairing(k: int):
    B, Bc = basis(k), basis(4 - k)
    W = [[Qi(0)] * len(Bc) for _ in B]
    for n, I in enumerate(B):
        for m, K in enumerate(Bc):
            s, _ = sort_sign(I + K)
            if s:
                W[n][m] = Qi(s)
    return W


@lru_cache(maxsize=None)
def _conjugation(k: int):
    B = basis(k)
    sigma = [[Qi(0)] * len(B) for _ in B]
    for n, J in enumerate(B):
        s, key = sort_sign([(i + 2) % 4 for i in J])
        sigma[B.index(key)][n] = Qi(s)
    return sigma


def _volume_coefficient(h) -> Qi:
    # omega^2/2 = v eps^0123 ; omega = (i/2) h_jk eps^j eps^(k+2)
    total = Qi(0)
    terms = [((j, k + 2), Qi(0, Fraction(1, 2)) * h[j][k]) for j in range(2) for k in range(2)]
    for i1, c1 in terms:
        for i2, c2 in terms:
            s, key = sort_sign(i1 + i2)
            if s:
                total = total + c1 * c2 * s
    return total / 2


def _matmul(a, b):
    return [[sum((a[i][t] * b[t][j] for t in range(len(b))), Qi(0)) for j in range(len(b[0]))] for i in range(len(a))]


def star_matrix_exact(h, k: int):
    """Exact star on k-forms: column J holds the coefficients of *eps^J.

    From eps^I ^ *eps^J = <eps^I, conj(eps^J)> omega^2/2 one gets
    W S = v G sigma.
    """
    h = [[qi(x) for x in row] for row in h]
    v = _volume_coefficient(h)
    rhs = _matmul(gram_matrix_exact(h, k), _conjugation(k))
    S = _matmul(inverse(_wedge_pairing(k)), rhs)
    return [[x * v for x in row] for row in S]


def hodge_star(metric: MetricSpec, a: InvariantForm, frame: AcsFrame | None = None) -> InvariantForm:
    """Exact Hodge star of an invariant form (constant metric)."""
    if not metric.is_constant():
        raise MetricError("hodge_star needs a constant metric; use star_field for field metrics")
    if a.coframe.complex_type is False:
        if frame is None:
            raise ValueError("a frame is needed to star a form on the real coframe")
        a = frame.to_complex(a)
    h = metric.exact_h()
    out = {}
    for k in sorted(a.degrees()):
        S = star_matrix_exact(h, k)
        Bk, Bc = basis(k), basis(4 - k)
        for j, J in enumerate(Bk):
            c = a.coeffs.get(J)
            if not c:
                continue
            for i, K in enumerate(Bc):
                if S[i][j]:
                    out[K] = out.get(K, Qi(0)) + S[i][j] * c
    return InvariantForm(a.coframe, out)


# Lee form ----------------------------------------------------------------------


@dataclass
class LeeFormResult:
    theta: object
    residual: float
    exact: bool

    def real_coefficients(self, frame: AcsFrame):
        """theta on e^1..e^4 (exact dict for invariant, arrays for fields)."""
        if self.exact:
            real = frame.to_real(self.theta)
            return [real.coefficient((j,)) for j in range(4)]
        c = [self.theta.coeffs.get((b,), 0) for b in range(4)]
        return [sum(c[b] * complex(frame.Q[b][j]) for b in range(4)) for j in range(4)]


def _wedge_omega_matrix_exact(omega: InvariantForm):
    B3 = basis(3)
    M = [[Qi(0)] * 4 for _ in B3]
    for b in range(4):
        prod = wedge(InvariantForm.monomial(omega.coframe, (b,)), omega)
        for r, K in enumerate(B3):
            M[r][b] = prod.coefficient(K)
    return M


def _d_omega_analytic(frame: AcsFrame, metric: MetricSpec, grid: TwistedGrid) -> FieldForm:
    """d omega from symbolic derivatives of the metric entries, sampled on the grid."""
    cf = frame.coframe
    W = [[complex(x) for x in row] for row in frame.Q_inv]
    half_i = 0.5j
    out = FieldForm(frame, grid)
    for j in range(2):
        for k in range(2):
            x = metric.h[j][k]
            if isinstance(x, Qi):
                if not x:
                    continue
                val = complex(x)
                derivs = None
            else:
                val = grid.sample(x, metric.params)
                derivs = [
                    grid.sample(frame_derivative_expression(x, m + 1, metric.params, grid.shear), metric.params)
                    for m in range(4)
                ]
            mono = (j, k + 2)
            part = {key: half_i * complex(c) * val for key, c in cf.d_monomial(mono).items()}
            if derivs is not None:
                for b in range(4):
                    Xh = sum(W[m][b] * derivs[m] for m in range(4))
                    s, key = sort_sign((b,) + mono)
                    if s:
                        part[key] = part.get(key, 0) + half_i * s * Xh
            out = out + FieldForm(frame, grid, part)
    return out


def _omega_field(frame: AcsFrame, metric: MetricSpec, grid: TwistedGrid) -> FieldForm:
    h = metric.sample(grid)
    return FieldForm(frame, grid, {(j, k + 2): 0.5j * h[..., j, k] for j in range(2) for k in range(2)})


def lee_form(
    algebra: NilLieAlgebra,
    frame: AcsFrame,
    metric: MetricSpec,
    grid: TwistedGrid | None = None,
    method: str = "analytic",
) -> LeeFormResult:
    """Solve d omega = theta ^ omega.

    Constant exact metrics give an exact invariant theta.  Otherwise theta is
    sampled on ``grid``; ``method`` chooses between symbolic derivatives of the
    metric entries ("analytic") and lattice differences ("discrete").
    """
    if frame.algebra is not algebra:
        raise ValueError("frame belongs to a different algebra")
    if metric.is_constant() and metric.is_exact():
        omega = fundamental_form(frame, metric)
        domega = d_invariant(omega)
        M = _wedge_omega_matrix_exact(omega)
        rhs = [domega.coefficient(K) for K in basis(3)]
        try:
            theta_c = solve(M, rhs)
        except ZeroDivisionError:
            raise MetricError("omega is degenerate: no Lee form") from None
        theta = InvariantForm(frame.coframe, {(b,): theta_c[b] for b in range(4)})
        defect = d_invariant(omega) - wedge(theta, omega)
        return LeeFormResult(theta, float(max((abs(complex(c)) for c in defect.coeffs.values()), default=0.0)), True)
    if grid is None:
        raise ValueError("a grid is required for non-constant metrics")
    omega = _omega_field(frame, metric, grid)
    if method == "analytic":
        domega = _d_omega_analytic(frame, metric, grid)
    elif method == "discrete":
        domega = d_field(omega)
    else:
        raise ValueError(f"unknown method {method!r}")
    B3 = basis(3)
    M = np.zeros(grid.shape + (4, 4), dtype=complex)
    for b in range(4):
        prod = FieldForm(frame, grid, {(b,): 1.0}).wedge(omega)
        for r, K in enumerate(B3):
            if K in prod.coeffs:
                M[..., r, b] = prod.coeffs[K]
    rhs = domega.degree_vector(3)
    theta_c = np.linalg.solve(M, rhs[..., None])[..., 0]
    theta = FieldForm(frame, grid, {(b,): theta_c[..., b] for b in range(4)})
    residual = (domega - theta.wedge(omega)).max_norm()
    return LeeFormResult(theta, residual, False)


# J, d^c, Gauduchon ---------------------------------------------------------------


def j_action(a, inverse_: bool = False):
    """J acts on (p,q)-components by i^(q-p) (or its inverse)."""
    if isinstance(a, FieldForm):
        return a.j_inverse() if inverse_ else a.j_action()
    if not a.coframe.complex_type:
        raise ValueError("J acts on forms written in a complex coframe")
    out = {}
    for idx, c in a.coeffs.items():
        p, q = a.coframe.bidegree(idx)
        e = (p - q) if inverse_ else (q - p)
        out[idx] = c * Qi(0, 1) ** (e % 4)
    return InvariantForm(a.coframe, out)


def dc(a):
    """d^c = -J^-1 d J."""
    if isinstance(a, FieldForm):
        return -(d_field(a.j_action()).j_inverse())
    return -j_action(d_invariant(j_action(a)), inverse_=True)


def gauduchon_defect(algebra: NilLieAlgebra, frame: AcsFrame, metric: MetricSpec, grid: TwistedGrid | None = None):
    """dd^c omega: an exact invariant 4-form, or a sampled field 4-form."""
    if metric.is_constant() and metric.is_exact():
        return d_invariant(dc(fundamental_form(frame, metric)))
    if grid is None:
        raise ValueError("a grid is required for non-constant metrics")
    # J omega = omega, so d^c omega = -J^-1 d omega; d omega is taken analytically
    dco = -(_d_omega_analytic(frame, metric, grid).j_inverse())
    return d_field(dco)


# Lambda and integration ---------------------------------------------------------


def lambda_contract(a, metric: MetricSpec, frame: AcsFrame | None = None):
    """Pointwise <a, omega>; with the normalisation <omega, omega> = 2."""
    if isinstance(a, FieldForm):
        if a.degrees() - {2}:
            raise ValueError("Lambda is defined here on 2-forms only")
        omega = _omega_field(a.frame, metric, a.grid)
        return pointwise_inner(metric, a, omega)
    if a.coframe.complex_type is False:
        if frame is None:
            raise ValueError("a frame is needed for forms on the real coframe")
        a = frame.to_complex(a)
    if a.degrees() - {2}:
        raise ValueError("Lambda is defined here on 2-forms only")
    h = metric.exact_h()
    G = gram_matrix_exact(h, 2)
    B = basis(2)
    w = {(j, k + 2): Qi(0, Fraction(1, 2)) * h[j][k] for j in range(2) for k in range(2)}
    total = Qi(0)
    for I, c in a.coeffs.items():
        for J, o in w.items():
            total = total + c * o.conjugate() * G[B.index(I)][B.index(J)]
    return total


def _orientation_sign(frame: AcsFrame) -> int:
    # sign of omega_std^2/2 against e^1234: eps^0123 = det(Q) e^1234 and
    # omega_std^2/2 = eps^0123 / 4
    d = det(frame.Q)
    return 1 if d.re > 0 else -1


def integrate(a, frame: AcsFrame | None = None, orientation: str | None = None):
    """Integral of a top-degree form over the unit-volume fundamental domain.

    ``orientation`` is "coordinate" (e^1234 positive) or "J" (omega^2/2
    positive).  The default follows the coframe the form is written in.
    """
    if isinstance(a, FieldForm):
        frame = a.frame
        if a.degrees() - {4}:
            raise ValueError("integrate needs a 4-form")
        c = complex(np.mean(a.coeffs.get((0, 1, 2, 3), np.zeros(a.grid.shape))))
        value = c * complex(det(frame.Q))
        orientation = orientation or "J"
    else:
        if a.degrees() - {4}:
            raise ValueError("integrate needs a 4-form")
        c = a.coefficient((0, 1, 2, 3))
        if a.coframe.complex_type:
            if frame is None:
                raise ValueError("a frame is needed to integrate a form in a complex coframe")
            value = c * det(frame.Q)
            orientation = orientation or "J"
        else:
            value = c
            orientation = orientation or "coordinate"
    if orientation == "coordinate":
        return value
    if orientation == "J":
        if frame is None:
            raise ValueError("the J orientation needs a frame")
        return value * _orientation_sign(frame)
    raise ValueError(f"unknown orientation {orientation!r}")


# classification ------------------------------------------------------------------


@dataclass
class Classification:
    label: str
    theta: LeeFormResult
    dtheta_norm: float
    pairings: list[float] = field(default_factory=list)
    theta_real: list = field(default_factory=list)
    tolerance: float = 1e-9

    def to_dict(self):
        return {
            "label": self.label,
            "lee_form_residual": self.theta.residual,
            "lee_form_exact": self.theta.exact,
            "dtheta_norm": self.dtheta_norm,
            "pairings": self.pairings,
            "tolerance": self.tolerance,
        }


def classify_metric(
    algebra: NilLieAlgebra,
    frame: AcsFrame,
    metric: MetricSpec,
    reference=None,
    grid: TwistedGrid | None = None,
    tol: float = 1e-9,
    closed_tol: float = 1e-6,
) -> Classification:
    """AlmostKahler / GloballyConformallyKahler / StrictlyLCK / General.

    ``reference`` is a list of real-coframe harmonic 1-forms (by default those
    of the invariant metric sum e^i (x) e^i).  Exactness of theta is decided by
    its unit-normalised L^2 pairings with them.  ``closed_tol`` bounds
    ``|d theta|`` relative to the size of theta's first derivatives in the
    sampled case.
    """
    if reference is None:
        from .cohomology import harmonic_invariant_forms

        reference = harmonic_invariant_forms(algebra, None, 1)
    ref = [[f.coefficient((j,)) for j in range(4)] for f in reference]
    lee = lee_form(algebra, frame, metric, grid)
    if lee.exact:
        theta = lee.theta
        th = lee.real_coefficients(frame)
        if theta.is_zero():
            return Classification("AlmostKahler", lee, 0.0, [0.0] * len(ref), [str(x) for x in th], tol)
        dth = d_invariant(theta)
        dnorm = float(max((abs(complex(c)) for c in dth.coeffs.values()), default=0.0))
        if not dth.is_zero():
            return Classification("General", lee, dnorm, [], [str(x) for x in th], tol)
        norm_t = sum((x * x.conjugate()).re for x in th)
        pair = []
        for r in ref:
            dot = sum((th[j] * r[j] for j in range(4)), Qi(0))
            nr = sum((x * x.conjugate()).re for x in r)
            pair.append(float(np.sqrt(float(dot.abs2()) / float(norm_t * nr))))
        label = "GloballyConformallyKahler" if all(p <= tol for p in pair) else "StrictlyLCK"
        return Classification(label, lee, dnorm, pair, [str(x) for x in th], tol)

    theta = lee.theta
    th = lee.real_coefficients(frame)
    tnorm = np.sqrt(np.mean(sum(np.abs(t) ** 2 for t in th)))
    if tnorm <= tol:
        return Classification("AlmostKahler", lee, 0.0, [0.0] * len(ref), [], tol)
    dth = d_field(theta)
    dnorm = dth.max_norm()
    scale = max(
        max(float(np.max(np.abs(grid.frame_derivative(m + 1, c)))) for m in range(4) for c in theta.coeffs.values()),
        float(tnorm),
    )
    if dnorm > closed_tol * scale:
        return Classification("General", lee, dnorm, [], [], tol)
    pair = []
    for r in ref:
        dot = np.mean(sum(th[j] * complex(r[j]) for j in range(4)))
        nr = np.sqrt(sum(abs(complex(x)) ** 2 for x in r))
        pair.append(float(abs(dot) / (tnorm * nr)))
    label = "GloballyConformallyKahler" if all(p <= tol for p in pair) else "StrictlyLCK"
    return Classification(label, lee, dnorm, pair, [], tol)
