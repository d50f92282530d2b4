"""Splice diagrams: initial fills, propagation, bundle fills, completion."""

import pytest
from hypothesis import given, settings, strategies as st

from jlstrata import StrataError
from jlstrata.diagram_splice import (BundleLine, FrobOf, SpliceBase, apply_bundles, complete,
                                     complete_canonical, init_diagram, propagate, reachable,
                                     render_recipe, search_admissible, splice_hodge_dims)
from jlstrata.embeddings import FieldShape, InfinityType
from jlstrata.jl_combinatorics import iter_pairs, jl_target

EMPTY = InfinityType()
D4 = FieldShape.of((1, 4))
D12 = FieldShape.of((1, 12))
T12 = D12.thetas([2, 4, 5, 7, 9, 11, 12])
I12 = D12.thetas([1, 2, 3, 5, 6, 8, 9, 10, 12])
J12 = D12.thetas([1, 2, 4, 5, 6, 7, 9, 10, 11, 12])


def test_init_extremes():
    st0 = init_diagram(D4, EMPTY, ())
    assert st0.filled(1) == frozenset(D4.embeddings()) and st0.filled(2) == frozenset()
    st1 = init_diagram(D4, EMPTY, D4.embeddings())
    assert st1.filled(2) == frozenset(D4.embeddings()) and st1.filled(1) == frozenset()


def test_init_rejects_sigma_in_T():
    sig = InfinityType.plain({D4.theta(1)}, finite_count=1)
    with pytest.raises(StrataError):
        init_diagram(D4, sig, {D4.theta(1)})


def test_initial_fills_worked_example():
    st0 = init_diagram(D12, EMPTY, T12)
    assert st0.filled(2) == T12
    assert st0.filled(1) == frozenset(D12.embeddings()) - T12
    assert all(isinstance(x, SpliceBase) for x in st0.entries.values())


def test_bundle_positions_worked_example():
    st0 = init_diagram(D12, EMPTY, T12)
    st0 = st0.with_entries({})
    st1 = apply_bundles(st0, D12.thetas([3, 7, 8]), T12)
    assert set(st1.entries) == {(1, D12.theta(4)), (2, D12.theta(8)), (1, D12.theta(9))}
    assert all(isinstance(x, BundleLine) for x in st1.entries.values())
    base = init_diagram(D12, EMPTY, T12)
    assert apply_bundles(base, (), T12).entries == base.entries


def test_no_propagation_without_I():
    st0 = init_diagram(D4, EMPTY, ())
    st1 = propagate(st0, (), D4.embeddings())
    assert st1.filled(2) == frozenset()


def test_non_example_is_incomplete():
    rep = complete(D4, EMPTY, D4.thetas([2, 3, 4]), D4.thetas([1, 2, 3]), D4.thetas([1, 2]), ())
    assert not rep.complete
    assert rep.unfilled == ((1, D4.theta(1)),)
    assert render_recipe(rep)[-1] == "D(1, θ₁) = ?"


def test_essential_frobenius_completes():
    rep = complete(D4, EMPTY, D4.embeddings(), (), (), ())
    assert rep.complete
    for b in D4.embeddings():
        assert isinstance(rep.recipe[(2, b)], FrobOf)
    assert "D(2, θ₂) = Φ · D(1, θ₁)" in render_recipe(rep)


def test_search_non_example():
    cands = {tuple(D4.numbers(c.T)): c for c in search_admissible(
        D4, EMPTY, D4.thetas([2, 3, 4]), D4.thetas([1, 2, 3]))}
    assert set(cands) == {(1,), (1, 2), (1, 3), (1, 2, 3)}
    assert cands[(1, 3)].admissible and cands[(1, 3)].completes
    for T in ((1,), (1, 2), (1, 2, 3)):
        assert not cands[T].admissible


def test_search_worked_example_contains_canonical():
    cands = search_admissible(D12, EMPTY, I12, J12)
    assert len(cands) == 2 ** 7
    assert any(c.T == T12 and c.completes for c in cands)


def test_search_size_guard():
    with pytest.raises(StrataError, match="size guard"):
        search_admissible(D12, EMPTY, I12, J12, limit=5)


@pytest.mark.parametrize("sh", [D4, FieldShape.of((2, 2)), FieldShape.of((1, 3), (1, 2))])
def test_canonical_completion_and_confluence(sh):
    for I, J in iter_pairs(sh, EMPTY):
        tgt = jl_target(sh, EMPTY, I, J)
        if any(fl != "normal" for fl in tgt.per_prime_flags):
            continue
        a = complete_canonical(sh, EMPTY, I, J, order="label")
        b = complete_canonical(sh, EMPTY, I, J, order="reverse")
        assert a.complete and b.complete
        assert set(a.recipe) == set(b.recipe)
        bound = 2 * len(sh.embeddings())
        assert all(x.depth <= bound for x in a.recipe.values())


def test_bad_order():
    with pytest.raises(StrataError):
        propagate(init_diagram(D4, EMPTY, ()), (), (), order="random")


subsets = st.frozensets(st.sampled_from(D12.embeddings()))


@settings(max_examples=80, deadline=None)
@given(subsets, subsets, subsets, subsets)
def test_unfilled_matches_reachability(I, J, T, R):
    rep = complete(D12, EMPTY, I, J, T, R)
    seeds = set(apply_bundles(init_diagram(D12, EMPTY, T), R, T).entries)
    reached = reachable(D12, EMPTY, I, J, seeds)
    assert set(rep.unfilled) == set(rep.state.positions) - reached


def test_splice_hodge_dims_cases():
    # slot 0 in T^1, slot 1 not
    assert splice_hodge_dims(D4, EMPTY, {(0, 0)}, (0, 0)) == (4, 0)
    assert splice_hodge_dims(D4, EMPTY, {(0, 0)}, (0, 3)) == (0, 4)
    assert splice_hodge_dims(D4, EMPTY, {(0, 0), (0, 1)}, (0, 0)) == (2, 2)
    assert splice_hodge_dims(D4, EMPTY, (), (0, 2)) == (2, 2)


def test_splice_hodge_dims_out_of_range():
    sh = FieldShape.of((1, 2))
    sig = InfinityType.plain({sh.theta(1)}, finite_count=1)
    # s = 0 at slot 0, and slot 1 in T^1 but slot 0 not: 2*0 - 2 < 0
    with pytest.raises(StrataError, match="inconsistent"):
        splice_hodge_dims(sh, sig, {(0, 1)}, (0, 0))
