"""Mod-p Dieudonne modules: validity, filtrations, Hasse invariants, isogenies."""

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from jlstrata import StrataError
from jlstrata import dieudonne_sim as ds
from jlstrata import linalg as la
from jlstrata.embeddings import CONJUGATE, PLAIN, Embedding, FieldShape, InfinityType
from jlstrata.gf import field

F2, F3, F4 = field(2), field(3), field(2, 2)


def one_slot(F, A, B, e=1):
    R = ds.TruncRing(F, e)
    return ds.DModule(F, (ds.Block(R, (A,), (B,)),))


def test_supersingular_model_valid():
    D, filt = ds.supersingular(F2)
    assert ds.validate(D) == [] and ds.check_filtration(D, filt) == []


def test_literal_lower_triangular_V_is_rejected():
    # Phi = E12 with V = E21 has im Phi = <e1> but ker V = <e2>.
    D = one_slot(F2, ((0, 1), (0, 0)), ((0, 0), (1, 0)))
    assert any("im Phi != ker V" in why for _, why in ds.validate(D))


def test_invalid_modules():
    Z = one_slot(F3, ((0, 0), (0, 0)), ((0, 0), (0, 0)))
    assert ds.validate(Z)


def test_etale_module_has_no_hodge_filtration():
    # Phi invertible with V = 0 satisfies im Phi = D = ker V, but omega = 0
    # cannot carry a filtration of any signature type.
    D = one_slot(F3, ((1, 0), (0, 1)), ((0, 0), (0, 0)))
    assert ds.validate(D) == []
    assert D.omega((0, 0)) == ()
    with pytest.raises(StrataError, match="no filtration"):
        ds.forced_filtration(D.ring(0), D.omega((0, 0)), (1,))


@pytest.mark.parametrize("ef", [(1, 2), (2, 2), (3, 1)])
def test_rank_nullity_of_Phi(ef):
    D, _ = ds.ordinary(F3, FieldShape.of(ef))
    for slot in D.slots():
        n = D.ring(0).dim
        A = D.Phi(slot)
        assert la.rank(F3, A) + len(la.nullspace(F3, A, n)) == n


def test_h1_dimensions():
    for sh, sig in [(FieldShape.of((1, 1)), None), (FieldShape.of((2, 1)), None),
                    (FieldShape.of((3, 1)), InfinityType({Embedding(0, 0, 1)}, {Embedding(0, 0, 1): CONJUGATE}))]:
        D, filt = ds.ordinary(F2, sh, sig)
        for slot in D.slots():
            for i in range(1, D.ring(0).e + 1):
                assert len(ds.h1_at(D, filt, slot, i).basis) == 2


def test_full_hodge_slot_jumps_by_two():
    sh = FieldShape.of((2, 1))
    sig = InfinityType(frozenset(sh.embeddings()), {b: CONJUGATE for b in sh.embeddings()})
    D, filt = ds.ordinary(F2, sh, sig)
    assert filt.type((0, 0)) == (2, 2)
    ch = filt.chain((0, 0))
    assert [len(W) for W in ch] == [0, 2, 4]


def test_forced_filtration_trivial_cases():
    R = ds.TruncRing(F2, 1)
    om = ((1, 0),)
    assert ds.forced_filtration(R, om, (1,)) == ((), la.span(F2, om, 2))
    R3 = ds.TruncRing(F4, 3)
    top = ds.rapoport_form(R3, 2, 1)
    ch = ds.forced_filtration(R3, top, (2, 0, 0))
    for i in (1, 2, 3):
        assert la.equal(F4, ch[i], R3.ker_u(1), R3.dim)


def test_forced_filtration_error():
    R = ds.TruncRing(F2, 2)
    with pytest.raises(StrataError, match="no filtration of this type exists"):
        ds.forced_filtration(R, ds.rapoport_form(R, 1, 1), (1, 2))
    assert ds.brute_force_filtrations(R, ds.rapoport_form(R, 1, 1), (1, 2)) == []
    # <e1> has the right dimension for (2, 0) but no such chain
    with pytest.raises(StrataError, match="does not match"):
        ds.forced_filtration(R, ds.rapoport_form(R, 0, 0), (2, 0))
    assert ds.brute_force_filtrations(R, ds.rapoport_form(R, 0, 0), (2, 0)) == []


def test_forced_filtration_refuses_unforced_types():
    # on ker u every line gives a chain of type (1, 1): not forced
    R = ds.TruncRing(F2, 2)
    W = ds.rapoport_form(R, 1, 1)
    assert len(ds.brute_force_filtrations(R, W, (1, 1))) == 3
    with pytest.raises(StrataError, match="does not match"):
        ds.forced_filtration(R, W, (1, 1))


def test_case_table_branches():
    D, filt = ds.supersingular(F2)
    slot = (0, 0)
    v = ds.v_es(D, filt, slot, 1)
    f = ds.f_es(D, filt, slot, 1)
    assert v.label == "V'"
    assert la.equal(F2, v.kernel(), la.span(F2, la.columns(f.M), 2), 2)
    with pytest.raises(StrataError, match="forbids"):
        ds.es_inverse(D, filt, slot, 1)
    sh = FieldShape.of((2, 1))
    b = Embedding(0, 0, 1)
    D2, f2 = ds.ordinary(F2, sh, InfinityType({b}, {b: CONJUGATE}))
    assert f2.type((0, 0)) == (2, 1)
    assert ds.f_es(D2, f2, (0, 0), 2).invertible
    assert ds.es_inverse(D2, f2, (0, 0), 2).invertible
    D0, f0 = ds.ordinary(F2, sh, InfinityType({b}, {b: PLAIN}))
    assert f0.type((0, 0)) == (0, 1)
    assert ds.v_es(D0, f0, (0, 0), 2).invertible


def test_v_prime_independent_of_lift():
    cases = [ds.ordinary(F2, FieldShape.of((2, 2))), ds.ordinary(F3, FieldShape.of((3, 1))),
             ds.supersingular(F3)]
    for D, filt in cases:
        for slot in D.slots():
            if filt.type(D.prev(slot))[-1] == 0 and filt.type(slot)[0] == 0:
                continue
            base = ds.v_prime(D, filt, slot).M
            n = D.ring(slot[0]).dim
            for shift in itertools.product(D.field.elements, repeat=n):
                assert ds.v_prime(D, filt, slot, lift_shift=shift).M == base


def test_hasse_requires_signature_one():
    sh = FieldShape.of((2, 1))
    b = Embedding(0, 0, 1)
    D, filt = ds.ordinary(F2, sh, InfinityType({b}, {b: PLAIN}))
    with pytest.raises(StrataError):
        ds.partial_hasse(D, filt, b)


def test_full_cycle_composite_invertible_on_ordinary():
    D, filt = ds.ordinary(F3, FieldShape.of((1, 3)))
    for b in D.shape.embeddings():
        res = ds.partial_hasse(D, filt, b)
        assert not res.vanishes and any(res.image)


def test_go_type_of_block_product_is_union():
    a = ds.supersingular(F2)
    b = ds.from_lines(F2, [(1, 0), (0, 1)], [(1, 0), (1, 0)])
    D, filt = ds.block_product(a, b)
    ga, gb = ds.go_type(*a), ds.go_type(*b)
    expect = set(ga) | {Embedding(1, x.frob, x.ram) for x in gb}
    assert ds.go_type(D, filt) == expect


def test_from_lines_hasse_pattern():
    L = [(1, 0), (0, 1), (1, 1)]
    M = [(1, 0), (1, 1), (1, 1)]
    D, filt = ds.from_lines(F2, L, M)
    assert ds.validate(D) == []
    assert {b.frob for b in ds.go_type(D, filt)} == {0, 2}


def test_dual_filtration_graded_dims():
    sh = FieldShape.of((2, 1))
    b = Embedding(0, 0, 1)
    D, filt = ds.ordinary(F2, sh, InfinityType({b}, {b: CONJUGATE}))
    dual = ds.dual_filtration(D, filt)
    assert dual.type((0, 0)) == tuple(2 - s for s in filt.type((0, 0)))
    D1, f1 = ds.ordinary(F3, FieldShape.of((3, 1)))
    assert ds.dual_filtration(D1, f1).type((0, 0)) == (1, 1, 1)


def test_dual_needs_perfect_pairing():
    D, filt = ds.supersingular(F2)
    bad = ds.PairingData(D.ring(0), (((0,), (0,)), ((0,), (0,))))
    assert not bad.is_perfect()
    with pytest.raises(StrataError, match="perfect"):
        ds.dual_filtration(D, filt, bad)


def test_dump_load_roundtrip():
    for D, filt in [ds.ordinary(F4, FieldShape.of((2, 2), (1, 1))), ds.supersingular(F3),
                    ds.from_lines(F4, [(1, 0), (1, 3)], [(0, 1), (1, 2)])]:
        text = ds.dump(D, filt)
        D2, f2 = ds.load(text)
        assert D2 == D
        assert all(la.equal(D.field, a, b, D.ring(s[0]).dim)
                   for s in D.slots() for a, b in zip(filt.chain(s), f2.chain(s)))
        assert ds.dump(D2, f2) == text


def test_load_rejects_garbage():
    with pytest.raises(StrataError, match="parse error"):
        ds.load("hello\n")


def test_frobenius_isogeny_strata():
    D, filt = ds.supersingular(F2)
    D2, f2, fmap, gmap = ds.frobenius_pair(D, filt)
    assert ds.validate(D2) == [] and ds.check_filtration(D2, f2) == []
    # f*: D2 -> D is Phi, g*: D -> D2 is V
    I, J = ds.stratum_of_isogeny(D, filt, D2, f2, fmap)
    everything = frozenset(D.shape.embeddings())
    assert I == everything
    Ig, Jg = ds.stratum_of_isogeny(D2, f2, D, filt, gmap)
    assert Ig == J and Jg == I


def test_frobenius_pair_complementary_on_lines():
    D, filt = ds.from_lines(F4, [(1, 0), (0, 1), (1, 1)], [(1, 0), (1, 2), (1, 1)])
    D2, f2, fmap, gmap = ds.frobenius_pair(D, filt)
    I, J = ds.stratum_of_isogeny(D, filt, D2, f2, fmap)
    Ig, Jg = ds.stratum_of_isogeny(D2, f2, D, filt, gmap)
    assert I == frozenset(D.shape.embeddings())
    assert (Ig, Jg) == (J, I)


def test_isomorphism_slots_are_skipped():
    D, filt = ds.supersingular(F2)
    I, J = ds.stratum_of_isogeny(D, filt, D, filt, {(0, 0): la.identity(2)})
    assert I == frozenset() and J == frozenset()


def test_frobenius_pair_needs_unramified():
    with pytest.raises(StrataError, match="e = 1"):
        ds.frobenius_pair(*ds.ordinary(F2, FieldShape.of((2, 1))))


def _unit_matrices(R):
    """A few u-linear automorphisms of k[u]/u^e squared."""
    F = R.field
    e = R.e
    mats = []
    for a, b, c, d in itertools.product(range(F.q), repeat=4):
        G = [[[a], [b]], [[c], [d]]]
        if F.sub(F.mul(a, d), F.mul(b, c)) == 0:
            continue
        mats.append(R.matrix(G))
    # one with a u-term
    if e > 1:
        mats.append(R.matrix([[[1], [0, 1]], [[0], [1]]]))
    return mats


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_change_basis_preserves_everything(data):
    kind = data.draw(st.sampled_from(["ord", "ss", "lines"]))
    if kind == "ord":
        D, filt = ds.ordinary(F2, FieldShape.of((2, 2)))
    elif kind == "ss":
        D, filt = ds.supersingular(F3)
    else:
        D, filt = ds.from_lines(F2, [(1, 0), (0, 1)], [(1, 0), (1, 1)])
    g = {s: data.draw(st.sampled_from(_unit_matrices(D.ring(s[0])))) for s in D.slots()}
    D2, f2 = ds.change_basis(D, filt, g)
    assert ds.validate(D2) == [] and ds.check_filtration(D2, f2) == []
    assert ds.go_type(D2, f2) == ds.go_type(D, filt)
