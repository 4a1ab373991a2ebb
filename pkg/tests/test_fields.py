from fractions import Fraction

import numpy as np
import pytest

from nilhodge.algebra import InvariantForm, d_invariant
from nilhodge.exact import Qi
from nilhodge.expr import parse_expression
from nilhodge.fields import (
    FieldForm,
    d_field,
    dbar_field,
    inner_product_L2,
    partial_field,
    pointwise_inner,
    star_field,
)
from nilhodge.grid import TwistedGrid
from nilhodge.hermitian import MetricSpec, hodge_star, lee_form

TWO_PI = 2 * np.pi
A, B, L, M = 0.7 - 0.2j, -1.3 + 0.4j, 0.25 + 1.1j, -0.6 - 0.9j


@pytest.fixture(scope="module")
def grid():
    return TwistedGrid(8)


@pytest.fixture(scope="module")
def omega_tf():
    f = parse_expression("sin(2*pi*x2)/(2*pi)")
    return MetricSpec([["exp(2*t*f)", 0], [0, 1]], {"t": 1, "f": f}, name="omega_tf")


def _psi(frame, grid, comps=(A, B, L, M)):
    return FieldForm.from_components(frame, grid, (1, 1), comps)


def test_dbar_constant_psi_ja(ja, grid):
    db = dbar_field(_psi(ja, grid))
    a = 0.5
    expect = -(a / 2) * A + 0.25j * B - 0.25j * L
    assert np.allclose(db.coeffs[(1, 2, 3)], expect, atol=1e-15, rtol=0)


def test_dbar_constant_psi_example42(j42, grid):
    db = dbar_field(_psi(j42, grid))
    assert np.allclose(db.coeffs[(1, 2, 3)], 0.25j * B - 0.25j * L, atol=1e-15, rtol=0)


@pytest.mark.parametrize("frame", ["ja", "j42"])
def test_constant_forms_match_invariant_d(frame, grid, request):
    fr = request.getfixturevalue(frame)
    coeffs = {(0, 2): Qi(1, 2), (0, 3): Qi(Fraction(-1, 3)), (1, 2): Qi(0, 5), (1, 3): Qi(2, -1), (0,): Qi(3)}
    inv = InvariantForm(fr.coframe, coeffs)
    field = FieldForm.from_invariant(inv, fr, grid)
    got = d_field(field)
    want = d_invariant(inv)
    keys = set(got.coeffs) | set(want.coeffs)
    for k in keys:
        g = got.coeffs.get(k, np.zeros(grid.shape))
        assert np.all(g == complex(want.coefficient(k)))
    assert d_field(d_field(field)).max_norm() == 0


def test_d_of_torus_function(ja):
    errs = []
    for N in (8, 16):
        g = TwistedGrid(N)
        x2 = g.coordinates[1]
        df = d_field(FieldForm(ja, g, {(): np.sin(TWO_PI * x2)}))
        e2 = ja.real_form({(2,): 1})
        gp = TWO_PI * np.cos(TWO_PI * x2)
        errs.append(max(np.abs(df.coeffs.get(k, 0) - complex(e2.coefficient(k)) * gp).max() for k in [(0,), (1,), (2,), (3,)]))
    assert errs[1] < errs[0]
    assert abs(np.log2(errs[0] / errs[1]) - 4) <= 0.8


def test_partial_and_dbar_split(ja, grid):
    rng = np.random.default_rng(0)
    psi = _psi(ja, grid, rng.standard_normal((4,) + grid.shape))
    full = d_field(psi)
    rest = full - dbar_field(psi) - partial_field(psi)
    # the remaining parts are mu and mubar, which are zeroth order
    assert set(k for k, c in rest.coeffs.items() if np.any(c)) <= {(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)}
    assert dbar_field(psi).bidegree() == (1, 2)


def test_star_tf(j42, grid, omega_tf):
    star = star_field(omega_tf, _psi(j42, grid))
    x2 = grid.coordinates[1]
    w = np.exp(2 * np.sin(TWO_PI * x2) / TWO_PI)
    c = star.components((1, 1))
    # psi = A p11b + B p12b + L p21b + M p22b  ->  M w p11b - B p12b - L p21b + A/w p22b
    assert np.allclose(c[0], M * w, atol=1e-14)
    assert np.allclose(c[1], -B, atol=1e-14)
    assert np.allclose(c[2], -L, atol=1e-14)
    assert np.allclose(c[3], A / w, atol=1e-14)


def test_star_identity_metric(ja, grid):
    c = star_field(np.eye(2), _psi(ja, grid)).components((1, 1))
    assert np.allclose(c[:, 0, 0, 0, 0], [M, -B, -L, A], atol=1e-15)


def _random_metric_field(grid, rng):
    X = rng.standard_normal(grid.shape + (2, 2)) + 1j * rng.standard_normal(grid.shape + (2, 2))
    return np.einsum("...ji,...jk->...ik", X.conj(), X) + 0.5 * np.eye(2)


def test_star_fixes_fundamental_form(ja):
    g = TwistedGrid(5)
    rng = np.random.default_rng(4)
    h = _random_metric_field(g, rng)
    omega = FieldForm(ja, g, {(j, k + 2): 0.5j * h[..., j, k] for j in range(2) for k in range(2)})
    assert (star_field(h, omega) - omega).max_norm() <= 1e-12


def test_star_squared(ja):
    g = TwistedGrid(5)
    rng = np.random.default_rng(5)
    h = _random_metric_field(g, rng)
    for k in range(5):
        from nilhodge.pointwise import basis

        vec = rng.standard_normal(g.shape + (len(basis(k)),)) + 0j
        a = FieldForm.from_degree_vector(ja, g, k, vec)
        back = star_field(h, star_field(h, a))
        assert (back - a * (-1) ** k).max_norm() <= 1e-11 * max(1.0, a.max_norm())


def test_constant_metric_matches_exact_star(ja, grid):
    h = [[2, Qi(1, 1)], [Qi(1, -1), 3]]
    metric = MetricSpec(h)
    inv = InvariantForm(ja.coframe, {(0, 2): 1, (0, 3): Qi(0, 2), (1, 2): -1, (1, 3): Qi(1, 1), (0, 1): 4})
    exact = hodge_star(metric, inv)
    num = star_field(metric, FieldForm.from_invariant(inv, ja, grid))
    for k in set(exact.coeffs) | set(num.coeffs):
        assert np.allclose(num.coeffs.get(k, 0), complex(exact.coefficient(k)), atol=1e-14)


def test_l2_products(ja, j42, grid, omega_tf):
    one = np.ones(grid.shape)
    omega = FieldForm.from_components(ja, grid, (1, 1), [0.5j * one, 0, 0, 0.5j * one])
    assert inner_product_L2(omega, omega, np.eye(2)) == pytest.approx(2.0, abs=1e-14)
    p12 = FieldForm(ja, grid, {(0, 3): one})
    p21 = FieldForm(ja, grid, {(1, 2): one})
    assert abs(inner_product_L2(p12, p21, np.eye(2))) == 0
    assert np.allclose(pointwise_inner(np.eye(2), omega, omega), 2)


def test_lee_form_pairing_vanishes(kt, j42, grid, omega_tf):
    theta = lee_form(kt, j42, omega_tf, grid).theta
    e2 = FieldForm.from_invariant(j42.real_form({(2,): 1}), j42, grid)
    # integrand is d/dx2 exp(2tf): the periodic trapezoid rule integrates it to rounding
    assert abs(inner_product_L2(theta, e2, omega_tf)) <= 1e-12
    # the pairing itself is not trivially zero pointwise
    assert np.abs(pointwise_inner(omega_tf, theta, e2)).max() > 1


def test_j_action_on_fields(ja, grid):
    psi = _psi(ja, grid)
    assert (psi.j_action() - psi).max_norm() == 0
    one = FieldForm(ja, grid, {(0,): np.ones(grid.shape)})
    assert np.allclose(one.j_action().coeffs[(0,)], -1j)
    assert (one.j_action().j_inverse() - one).max_norm() == 0
