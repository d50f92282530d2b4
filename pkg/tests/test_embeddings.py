"""Embedding indexing, the phi action, and chains."""

import pytest
from hypothesis import given, strategies as st

from jlstrata import StrataError
from jlstrata.embeddings import (CONJUGATE, PLAIN, Embedding, FieldShape, InfinityType,
                                 chains, iter_orbit, phi, phi_cycle, phi_inv, signature,
                                 signature_sum)

shapes = st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=3).map(
    lambda ps: FieldShape.of(*ps))


def test_phi_fixed_point_for_degree_one():
    sh = FieldShape.of((1, 1))
    b = Embedding(0, 0, 1)
    assert phi(sh, b) == b


def test_phi_wraps_from_last_ramified_index():
    sh = FieldShape.of((4, 3))
    assert phi(sh, Embedding(0, 2, 4)) == Embedding(0, 0, 1)
    assert phi(sh, Embedding(0, 1, 4)) == Embedding(0, 2, 1)
    assert phi(sh, Embedding(0, 1, 2)) == Embedding(0, 1, 3)


def test_orbit_size():
    sh = FieldShape.of((2, 2))
    b = start = Embedding(0, 0, 1)
    for _ in range(4):
        b = phi(sh, b)
    assert b == start
    assert len(set(iter_orbit(sh, start))) == 4


@given(shapes, st.data())
def test_phi_inv_undoes_phi(sh, data):
    b = data.draw(st.sampled_from(sh.embeddings()))
    assert phi_inv(sh, phi(sh, b)) == b
    assert phi(sh, b).prime == b.prime


def test_phi_cycle_skips_avoided():
    sh = FieldShape.of((1, 4))
    assert phi_cycle(sh, sh.theta(1)) == phi(sh, sh.theta(1))
    assert phi_cycle(sh, sh.theta(1), {sh.theta(2)}) == sh.theta(3)
    sh12 = FieldShape.of((1, 12))
    assert phi_cycle(sh12, sh12.theta(5), inverse=True) == sh12.theta(4)


def test_phi_cycle_degenerate():
    sh = FieldShape.of((1, 3))
    with pytest.raises(StrataError, match="degenerate cycle"):
        phi_cycle(sh, sh.theta(1), sh.embeddings())


def test_phi_cycle_allows_start_in_avoid():
    sh = FieldShape.of((1, 3))
    assert phi_cycle(sh, sh.theta(1), {sh.theta(1), sh.theta(2)}) == sh.theta(3)


def test_chains_worked_example():
    sh = FieldShape.of((1, 12))
    S = sh.thetas([5, 6, 9, 10, 12, 1, 2])
    out = chains(sh, S)
    assert [sh.numbers([c.tail])[0] for c in out] == [2, 6, 10]
    by_tail = {sh.numbers([c.tail])[0]: c for c in out}
    assert by_tail[6].length == 2 and by_tail[10].length == 2 and by_tail[2].length == 3
    assert [sh.numbers([m])[0] for m in by_tail[2].members] == [12, 1, 2]


def test_chains_edge_cases():
    sh = FieldShape.of((2, 2))
    assert chains(sh, ()) == []
    (whole,) = chains(sh, sh.embeddings())
    assert whole.whole_cycle and whole.length == 4
    with pytest.raises(StrataError):
        chains(sh, {sh.theta(1)}, {sh.theta(1)})


@given(shapes, st.data())
def test_chains_partition(sh, data):
    S = data.draw(st.frozensets(st.sampled_from(sh.embeddings())))
    out = chains(sh, S)
    members = [m for c in out for m in c.members]
    assert sorted(members) == sorted(S)
    for c in out:
        for a, b in zip(c.members, c.members[1:]):
            assert phi(sh, a) == b


def test_signature_cases():
    sh = FieldShape.of((2, 1))
    b = Embedding(0, 0, 1)
    sig = InfinityType(frozenset({b}), {b: PLAIN})
    assert signature(Embedding(0, 0, 2), sig) == 1
    assert signature(b, sig, PLAIN) == 0
    assert signature(b, sig, CONJUGATE) == 2
    assert signature_sum(sh, sig, (0, 0), PLAIN) + signature_sum(sh, sig, (0, 0), CONJUGATE) == 4


@given(shapes, st.data())
def test_signature_sum_rule(sh, data):
    members = data.draw(st.frozensets(st.sampled_from(sh.embeddings())))
    lifts = {b: data.draw(st.sampled_from([PLAIN, CONJUGATE])) for b in members}
    sig = InfinityType(members, lifts)
    for b in sh.embeddings():
        assert signature(b, sig, PLAIN) + signature(b, sig, CONJUGATE) == 2


def test_label_roundtrip():
    sh = FieldShape.of((3, 2), (1, 2))
    for b in sh.embeddings():
        assert Embedding.parse(b.label) == b
    with pytest.raises(StrataError, match="bad label"):
        Embedding.parse("theta1")


def test_invalid_shapes_and_indices():
    with pytest.raises(StrataError):
        FieldShape.of((0, 1))
    with pytest.raises(StrataError):
        FieldShape(())
    with pytest.raises(StrataError):
        FieldShape.of((1, 2)).check(Embedding(0, 2, 1))
    with pytest.raises(StrataError):
        InfinityType(frozenset({Embedding(0, 0, 1)}), {})


def test_parity():
    b = Embedding(0, 0, 1)
    assert not InfinityType.plain({b}).parity_ok
    assert InfinityType.plain({b}, finite_count=1).parity_ok
    with pytest.raises(StrataError, match="parity"):
        InfinityType.plain({b}).require_even()
