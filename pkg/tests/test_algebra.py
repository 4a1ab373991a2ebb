import random
from fractions import Fraction

import pytest

from nilhodge.algebra import (
    IDENTITY_NAMES,
    AcsFrame,
    InvalidAlgebraError,
    InvariantForm,
    NilLieAlgebra,
    d_invariant,
    d_part,
    is_integrable,
    split_d,
    structure_equations,
    verify_d2_identities,
    wedge,
)
from nilhodge.exact import I, Qi

from .helpers import random_form

Q = Fraction


def e(alg, *idx):
    return InvariantForm.monomial(alg.real_coframe, tuple(i - 1 for i in idx))


def test_kt_structure_constants(kt):
    assert d_invariant(e(kt, 3)) == -e(kt, 1, 2)
    for k in (1, 2, 4):
        assert d_invariant(e(kt, k)).is_zero()


def test_wedge_basics(ja):
    p1, p1b = ja.phi(1), ja.phi(-1)
    assert wedge(p1, p1b) == InvariantForm.monomial(ja.coframe, (0, 2))
    assert wedge(p1, p1).is_zero()
    # omega^2 = 2 (i/2)^2 Phi^{1 1b 2 2b} = (1/2) Phi^{1 2 1b 2b}
    omega = (wedge(p1, p1b) + wedge(ja.phi(2), ja.phi(-2))) * Qi(0, Q(1, 2))
    sq = wedge(omega, omega)
    assert sq.coeffs == {(0, 1, 2, 3): Qi(Q(1, 2))}


def test_wedge_rejects_mixed_frames(kt, ja, j42):
    with pytest.raises(ValueError):
        wedge(ja.phi(1), j42.phi(1))


def test_dphi2_closed(ja, j42):
    assert d_invariant(ja.phi(2)).is_zero()
    assert d_invariant(j42.phi(2)).is_zero()


def test_structure_equations_ja(kt, ja):
    table = structure_equations(kt, ja)
    assert table["dPhi^1"] == {
        "12": Qi(0, Q(-1, 4)),
        "12b": Qi(0, Q(-1, 4)),
        "21b": Qi(0, Q(1, 4)),
        "22b": Qi(Q(1, 4)),
        "1b2b": Qi(0, Q(-1, 4)),
    }
    assert table["dPhi^2"] == {}


@pytest.mark.parametrize("a", [Q(0), Q(1, 3), Q(-2)])
def test_structure_equations_ja_general_a(kt, a):
    fr = AcsFrame.j_a(kt, a)
    table = structure_equations(kt, fr)["dPhi^1"]
    assert table.get("22b", Qi(0)) == Qi(a / 2)
    assert table["12b"] == Qi(0, Q(-1, 4))


def test_structure_equations_example42(kt, j42):
    table = structure_equations(kt, j42)
    assert table["dPhi^1"] == {
        "12": Qi(0, Q(-1, 4)),
        "12b": Qi(0, Q(-1, 4)),
        "21b": Qi(0, Q(1, 4)),
        "1b2b": Qi(0, Q(-1, 4)),
    }


def test_structure_equations_abelian(torus):
    fr = AcsFrame(torus, [[1, I, 0, 0], [0, 0, 1, I]], name="standard")
    table = structure_equations(torus, fr)
    assert table == {"dPhi^1": {}, "dPhi^2": {}}
    assert is_integrable(torus, fr)


def test_split_d_of_phi1(ja):
    s = split_d(ja.phi(1))
    cf = ja.coframe
    assert s.mubar == InvariantForm(cf, {(2, 3): Qi(0, Q(-1, 4))})
    assert s.partial == InvariantForm(cf, {(0, 1): Qi(0, Q(-1, 4))})
    assert s.dbar == InvariantForm(cf, {(0, 3): Qi(0, Q(-1, 4)), (1, 2): Qi(0, Q(1, 4)), (1, 3): Q(1, 4)})
    assert s.mu.is_zero()
    assert s.total() == d_invariant(ja.phi(1))


def test_split_d_constant_and_inhomogeneous(ja):
    s = split_d(InvariantForm.constant(ja.coframe, 1))
    assert all(x.is_zero() for x in (s.mu, s.partial, s.dbar, s.mubar))
    with pytest.raises(ValueError):
        split_d(ja.phi(1) + ja.phi(-1))


@pytest.mark.parametrize("frame", ["ja", "j42"])
def test_seven_identities(kt, frame, request):
    fr = request.getfixturevalue(frame)
    report = verify_d2_identities(kt, fr)
    assert list(report) == list(IDENTITY_NAMES)
    assert all(report.values())


def test_identities_abelian(torus):
    fr = AcsFrame(torus, [[1, I, 0, 0], [0, 0, 1, I]])
    assert all(verify_d2_identities(torus, fr).values())


def test_broken_constants_rejected():
    bad = NilLieAlgebra({(3, 1, 2): 1, (1, 3, 4): 1})
    assert not bad.is_valid()
    with pytest.raises(InvalidAlgebraError):
        bad.validate()
    fr = AcsFrame(bad, [[1, 0, I, 0], [0, 1, 0, I]])
    report = verify_d2_identities(bad, fr)
    assert not all(report.values())


def test_integrability(kt, ja, j42):
    assert not is_integrable(kt, ja)
    assert not is_integrable(kt, AcsFrame.j_a(kt, 0))
    assert not is_integrable(kt, j42)
    assert not d_part(j42.phi(1), "mubar").is_zero()


def test_d_squared_random_forms(kt, ja):
    rng = random.Random(1234)
    for i in range(100):
        cf = ja.coframe if i % 2 else kt.real_coframe
        f = random_form(cf, rng)
        assert d_invariant(d_invariant(f)).is_zero()


def test_leibniz_and_conjugation(ja):
    rng = random.Random(7)
    cf = ja.coframe
    for _ in range(20):
        k = rng.randint(0, 2)
        a = random_form(cf, rng, degrees=[k])
        b = random_form(cf, rng, degrees=[rng.randint(0, 2)])
        lhs = d_invariant(wedge(a, b))
        rhs = wedge(d_invariant(a), b) + wedge(a, d_invariant(b)) * (-1) ** k
        assert lhs == rhs
    for p in range(3):
        for q in range(3 - p):
            a = random_form(cf, rng, degrees=[p + q]).bidegree_part(p, q)
            assert d_part(a.conj(), "dbar") == d_part(a, "partial").conj()
            assert d_part(a.conj(), "mubar") == d_part(a, "mu").conj()


def test_split_parts_have_right_bidegrees(ja):
    rng = random.Random(3)
    for p in range(3):
        for q in range(3):
            a = random_form(ja.coframe, rng, degrees=[p + q]).bidegree_part(p, q)
            if a.is_zero():
                continue
            s = split_d(a)
            for part, (dp, dq) in ((s.mu, (2, -1)), (s.partial, (1, 0)), (s.dbar, (0, 1)), (s.mubar, (-1, 2))):
                assert part.is_zero() or part.bidegree() == (p + dp, q + dq)
            assert s.total() == d_invariant(a)


def test_real_complex_round_trip(kt, ja):
    rng = random.Random(11)
    f = random_form(kt.real_coframe, rng)
    assert ja.to_real(ja.to_complex(f)) == f
    assert ja.to_complex(e(kt, 1)) + ja.to_complex(e(kt, 4)) * Q(1, 2) + ja.to_complex(e(kt, 3)) * I == ja.phi(1)
