import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import double_factorial, splits, walds
from waldspace.errors import (
    DomainError,
    IncompatibleSplits,
    NotInWaldSpace,
    OverlappingBlocks,
    SeparationViolated,
    UnknownSplit,
    WaldError,
)
from waldspace.forest import (
    Split,
    Wald,
    _block_splits,
    _set_partitions,
    edges_on_path,
    enumerate_topologies,
    extend_topology,
    lift_to_boundary,
    partial_order_compare,
    random_wald,
    resolved_topologies,
    restrict_split,
    split_compatible,
    sub_wald_from_boundary,
    topology_leq,
    validate_topology,
    walds_close,
)


# ------------------------------------------------------------------ splits


def test_split_orientation_puts_smallest_label_first():
    s = Split.of([3, 4], [1, 2])
    assert s.block_a == {1, 2} and s.block_b == {3, 4}
    assert s == Split.parse("12|34") == Split.parse("1,2|3,4")
    assert str(s) == "12|34"


def test_split_string_uses_commas_for_two_digit_labels():
    assert str(Split.of([1, 10], [2])) == "1,10|2"
    assert Split.parse(str(Split.of([1, 10], [2]))) == Split.of([1, 10], [2])


@pytest.mark.parametrize("bad", ["12", "1|", "|2", "a|b", "1|1"])
def test_split_parse_rejects_malformed(bad):
    with pytest.raises(WaldError):
        Split.parse(bad)


def test_split_pendant_and_separation():
    s = Split.parse("1|234")
    assert s.is_pendant
    assert not Split.parse("12|34").is_pendant
    assert s.separates(1, 3) and s.separates(4, 1)
    assert not s.separates(2, 3)
    assert not s.separates(1, 5)


@pytest.mark.parametrize(
    "s, t, expected",
    [
        ("12|34", "1|234", True),
        ("12|34", "13|24", False),
        ("12|345", "123|45", True),
        ("1|2", "3|4", True),  # disjoint supports never conflict
    ],
)
def test_split_compatibility_table(s, t, expected):
    assert split_compatible(Split.parse(s), Split.parse(t)) is expected
    assert split_compatible(Split.parse(t), Split.parse(s)) is expected


def test_restrict_split():
    e = Split.parse("12|345")
    assert restrict_split(e, [2, 3]) == Split.parse("2|3")
    assert restrict_split(e, [3, 4]) is None
    assert restrict_split(e, [1, 2]) is None
    assert restrict_split(e, [1, 5]) == Split.parse("1|5")


# ------------------------------------------------------------------ topologies


def test_six_leaf_forest_topology(six_leaf_forest):
    t = six_leaf_forest.topology
    assert t.partition == (frozenset({1, 2, 3, 4}), frozenset({5, 6}))
    assert edges_on_path(t, 1, 4) == frozenset(splits("1|234", "4|123", "12|34"))
    assert edges_on_path(t, 1, 5) == frozenset()


def test_validate_rejects_incompatible():
    with pytest.raises(IncompatibleSplits):
        validate_topology(splits("12|34", "13|24", "1|234", "2|134", "3|124", "4|123"), 4)


def test_validate_rejects_unseparated_pair():
    # without 1|234 the labels 1 and 2 would share a vertex
    with pytest.raises(SeparationViolated) as info:
        validate_topology(splits("3|124", "4|123", "12|34"), 4)
    assert {info.value.u, info.value.v} == {1, 2}


def test_validate_rejects_overlapping_blocks():
    with pytest.raises(OverlappingBlocks):
        validate_topology(splits("1|2", "2|3"), 3)


def test_validate_rejects_bad_leaf_counts():
    with pytest.raises(WaldError):
        validate_topology([], 1)
    with pytest.raises(WaldError):
        validate_topology(splits("1|5"), 4)


def test_empty_topology_is_all_isolated():
    t = validate_topology([], 4)
    assert t.partition == tuple(frozenset([u]) for u in range(1, 5))


def test_topology_counts_for_three_leaves():
    # one block of three: 3 two-split trees and the resolved tree;
    # a pair plus a singleton: 3; all isolated: 1
    assert len(enumerate_topologies(3)) == 8


@pytest.mark.parametrize("n", [3, 4])
def test_enumeration_matches_brute_force(n):
    brute = set()
    for part in _set_partitions(list(range(1, n + 1))):
        per_block = []
        for block in part:
            cands = _block_splits(sum(1 << (u - 1) for u in block)) if len(block) > 1 else []
            subsets = []
            for r in range(len(cands) + 1):
                subsets.extend(itertools.combinations(cands, r))
            per_block.append(subsets)
        for combo in itertools.product(*per_block):
            chosen = [s for group in combo for s in group]
            try:
                t = validate_topology(chosen, n)
            except WaldError:
                continue
            if len(t.partition) == len(part):
                brute.add(t.splits)
    found = [t.splits for t in enumerate_topologies(n)]
    assert len(found) == len(set(found))
    assert set(found) == brute


@pytest.mark.parametrize("n", range(3, 8))
def test_resolved_tree_counts(n):
    trees = resolved_topologies(n)
    assert len(trees) == double_factorial(2 * n - 5)
    assert len({t.splits for t in trees}) == len(trees)
    assert all(len(t.splits) == 2 * n - 3 and t.is_resolved for t in trees)


def test_extend_topology_climbs_to_resolved():
    t = validate_topology([], 5)
    steps = 0
    while (nxt := extend_topology(t)) is not None:
        assert partial_order_compare(t, nxt) is not None
        assert len(nxt.splits) == len(t.splits) + 1
        t = nxt
        steps += 1
    assert t.is_resolved and steps == 7


# ------------------------------------------------------------------ wälder


def test_wald_weights_follow_canonical_order():
    w = Wald.from_weights({Split.parse("2|13"): 0.2, Split.parse("1|23"): 0.1, Split.parse("3|12"): 0.3}, 3)
    assert list(w.weights) == sorted(w.weights)
    np.testing.assert_array_equal(w.lambdas, [0.1, 0.3, 0.2])
    assert w.weight(Split.parse("1|2")) == 0.0


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_wald_rejects_weights_outside_open_interval(bad):
    with pytest.raises(WaldError):
        Wald.from_weights({Split.parse("1|2"): bad}, 2)


def test_wald_equality_and_hash():
    a = Wald.from_weights({Split.parse("1|2"): 0.5}, 3)
    b = Wald.from_weights({Split.parse("1|2"): 0.5}, 3)
    assert a == b and hash(a) == hash(b)
    assert a != Wald.from_weights({Split.parse("1|2"): 0.5}, 2)


def test_infinity_has_no_splits():
    w = Wald.infinity(4)
    assert not w.weights and len(w.topology.partition) == 4


@given(walds(2, 9))
def test_random_wald_is_valid(w):
    t = validate_topology(w.topology.splits, w.n_leaves)
    assert t == w.topology
    assert np.all((w.lambdas > 0) & (w.lambdas < 1))


def test_random_wald_is_seed_deterministic():
    a = [random_wald(np.random.default_rng(7), 6) for _ in range(3)]
    b = [random_wald(np.random.default_rng(7), 6) for _ in range(3)]
    assert a == b


def test_random_wald_large_uses_insertion_generator():
    w = random_wald(np.random.default_rng(3), 12)
    assert w.n_leaves == 12


# ------------------------------------------------------------------ partial order

FIVE_LEAF_TREE = splits("1|2345", "12|345", "3|1245", "123|45", "1234|5", "1235|4")


def test_order_two_cherries_below_labelled_interior_tree():
    e = validate_topology(FIVE_LEAF_TREE, 5)
    lower = validate_topology(splits("2|3", "4|5"), 5)
    w = partial_order_compare(lower, e)
    assert w is not None
    assert w.corresponding[Split.parse("2|3")] == frozenset(splits("12|345", "3|1245"))
    assert w.corresponding[Split.parse("4|5")] == frozenset(splits("1234|5", "1235|4"))
    assert w.cut == frozenset(splits("1|2345", "123|45"))
    assert w.disappearing == frozenset()


def test_order_fails_cut_property():
    e = validate_topology(FIVE_LEAF_TREE, 5)
    assert partial_order_compare(validate_topology(splits("2|5", "3|4"), 5), e) is None


def test_order_star_below_resolved_quartet():
    e = validate_topology(splits("1|234", "2|134", "3|124", "123|4", "12|34"), 4)
    star = validate_topology(splits("1|234", "2|134", "3|124", "123|4"), 4)
    w = partial_order_compare(star, e)
    assert w.disappearing == frozenset(splits("12|34"))
    assert w.cut == frozenset()
    assert all(r == frozenset([s]) for s, r in w.corresponding.items())
    assert partial_order_compare(e, star) is None


def test_order_with_isolated_label():
    e = validate_topology(splits("1|2345", "2|1345", "3|1245", "4|1235", "5|1234", "12|345", "123|45"), 5)
    lower = validate_topology(splits("1|245", "2|145", "4|125", "5|124", "12|45"), 5)
    w = partial_order_compare(lower, e)
    assert w.corresponding[Split.parse("12|45")] == frozenset(splits("12|345", "123|45"))
    assert w.cut == frozenset(splits("3|1245"))
    assert w.disappearing == frozenset()


def test_order_is_reflexive_with_identity_witness(six_leaf_forest):
    t = six_leaf_forest.topology
    assert partial_order_compare(t, t).is_identity


def test_order_is_a_partial_order_on_four_leaves():
    tops = enumerate_topologies(4)
    leq = {(i, j): topology_leq(a, b) for (i, a), (j, b) in itertools.product(enumerate(tops), repeat=2)}
    for i in range(len(tops)):
        assert leq[i, i]
    for i, j in itertools.combinations(range(len(tops)), 2):
        assert not (leq[i, j] and leq[j, i])
    # transitivity on a sample of triples
    rng = np.random.default_rng(0)
    for _ in range(2000):
        i, j, k = rng.integers(len(tops), size=3)
        if leq[i, j] and leq[j, k]:
            assert leq[i, k]


def test_everything_lies_above_infinity():
    inf = validate_topology([], 4)
    assert all(topology_leq(inf, t) for t in enumerate_topologies(4))


# ------------------------------------------------------------------ boundary correspondence

TRIPOD = validate_topology(splits("1|23", "2|13", "3|12"), 3)


def test_boundary_with_one_zero_weight_drops_one_split():
    w = sub_wald_from_boundary(TRIPOD, [0.0, 0.4, 0.5])
    assert len(w.weights) == 2
    assert w.weights[Split.parse("2|13")] == 0.5  # ordered: 1|23, 12|3, 13|2


def test_boundary_with_one_cut_leaves_one_pair():
    w = sub_wald_from_boundary(TRIPOD, [1.0, 0.3, 0.4])
    assert set(w.weights) == {Split.parse("2|3")}
    assert w.weights[Split.parse("2|3")] == pytest.approx(1 - 0.7 * 0.6, abs=1e-15)


def test_boundary_all_cut_is_infinity():
    assert sub_wald_from_boundary(TRIPOD, [1.0, 1.0, 1.0]) == Wald.infinity(3)


def test_boundary_collapsing_labels_is_not_a_wald():
    with pytest.raises(NotInWaldSpace):
        sub_wald_from_boundary(TRIPOD, [0.0, 0.0, 0.5])


def test_boundary_rejects_out_of_range():
    with pytest.raises(DomainError):
        sub_wald_from_boundary(TRIPOD, [1.2, 0.3, 0.4])


def test_boundary_accepts_mapping_and_requires_all_splits():
    w = sub_wald_from_boundary(TRIPOD, dict(zip(TRIPOD.ordered, [0.2, 0.3, 0.4])))
    assert walds_close(w, Wald.from_array(TRIPOD, [0.2, 0.3, 0.4]), 1e-15)
    with pytest.raises(WaldError):
        sub_wald_from_boundary(TRIPOD, {TRIPOD.ordered[0]: 0.2})


def test_position_of_unknown_split():
    with pytest.raises(UnknownSplit):
        TRIPOD.position(Split.parse("1|2"))


@given(walds(3, 7), st.integers(0, 2**32 - 1))
def test_lift_then_identify_is_identity(w, seed):
    rng = np.random.default_rng(seed)
    above = [t for t in resolved_topologies(w.n_leaves) if topology_leq(w.topology, t)]
    assert above, "every wald lies below some resolved tree"
    e = above[rng.integers(len(above))]
    lam = lift_to_boundary(w, e)
    assert walds_close(sub_wald_from_boundary(e, lam), w, 1e-12)


def test_lift_returns_none_when_not_below():
    pendant = splits("1|234", "2|134", "3|124", "4|123")
    w = Wald.from_weights({Split.parse("12|34"): 0.5, **{s: 0.5 for s in pendant}}, 4)
    other = [t for t in resolved_topologies(4) if Split.parse("12|34") not in t.splits][0]
    assert lift_to_boundary(w, other) is None
