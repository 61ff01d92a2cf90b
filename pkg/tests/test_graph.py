from itertools import combinations

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from safekernel.graph import (
    F_LOCAL,
    F_TOTAL,
    FaultSet,
    GraphError,
    Network,
    UnsupportedSizeError,
    check_degree_assumption,
    is_r_robust,
    is_rs_robust,
    load_network,
    neighbors,
    validate_fault_set,
    witness_violates,
)


def atlas_graphs(max_nodes=6):
    for g in nx.graph_atlas_g()[1:]:
        if g.number_of_nodes() <= max_nodes and g.number_of_nodes() >= 2 and nx.is_connected(g):
            yield Network.from_edges(g.number_of_nodes(), g.edges())


def naive_pairs(n):
    """Every disjoint nonempty pair of node sets, by direct enumeration."""
    nodes = range(n)
    subsets = [frozenset(c) for k in range(1, n) for c in combinations(nodes, k)]
    for a in subsets:
        for b in subsets:
            if not a & b:
                yield a, b


def naive_rs(G, r, s):
    for a, b in naive_pairs(G.node_count):
        ha = sum(len(neighbors(G, i) - a) >= r for i in a)
        hb = sum(len(neighbors(G, i) - b) >= r for i in b)
        if ha < len(a) and hb < len(b) and ha + hb < s:
            return False
    return True


def naive_r(G, r, strict=False):
    need = 2 if strict else 1
    for a, b in naive_pairs(G.node_count):
        ha = sum(len(neighbors(G, i) - a) >= r for i in a)
        hb = sum(len(neighbors(G, i) - b) >= r for i in b)
        if ha < need and hb < need:
            return False
    return True


random_graphs = st.builds(
    lambda n, bits: Network.from_edges(
        n, [e for e, keep in zip(combinations(range(n), 2), bits) if keep]
    ),
    st.integers(2, 6),
    st.lists(st.booleans(), min_size=15, max_size=15),
)


# Network / neighbors


def test_neighbors_of_path():
    G = Network.path(3)
    assert neighbors(G, 1) == {0, 2}
    assert neighbors(G, 0) == {1}


def test_neighbors_of_complete_graph():
    assert neighbors(Network.complete(5), 2) == {0, 1, 3, 4}


def test_self_loop_rejected():
    with pytest.raises(GraphError):
        Network.from_edges(3, [(1, 1)])


def test_out_of_range_edge_rejected():
    with pytest.raises(GraphError):
        Network.from_edges(3, [(0, 3)])


def test_load_network(tmp_path):
    p = tmp_path / "g.json"
    p.write_text('{"nodes": 3, "edges": [[0, 1], [1, 2]]}')
    assert load_network(p) == Network.path(3)


# robustness verdicts


def test_complete_five_is_three_two_robust():
    assert is_rs_robust(Network.complete(5), 3, 2).verdict


def test_complete_five_is_three_robust_not_four():
    G = Network.complete(5)
    assert is_r_robust(G, 3).verdict
    rep = is_r_robust(G, 4)
    assert not rep.verdict and witness_violates(G, rep)


def test_complete_five_r3_s1_is_r3():
    G = Network.complete(5)
    assert is_rs_robust(G, 3, 1).verdict == is_r_robust(G, 3).verdict


def test_path_is_not_two_robust():
    G = Network.path(3)
    rep = is_r_robust(G, 2)
    assert not rep.verdict
    assert rep.witness == (frozenset({0}), frozenset({2}))
    assert witness_violates(G, rep)


def test_path_is_one_robust():
    assert is_r_robust(Network.path(3), 1).verdict


def test_star_is_one_robust_only():
    G = Network.star(5)
    assert is_r_robust(G, 1).verdict
    assert not is_r_robust(G, 2).verdict


def test_strict_reading_is_stronger():
    G = Network.path(4)
    assert is_r_robust(G, 1).verdict
    rep = is_r_robust(G, 1, strict=True)
    assert not rep.verdict and witness_violates(G, rep)


def test_size_cap():
    with pytest.raises(UnsupportedSizeError):
        is_r_robust(Network.complete(13), 1)
    assert is_r_robust(Network.complete(13), 1, cap=13).verdict


def test_bad_s_rejected():
    with pytest.raises(GraphError):
        is_rs_robust(Network.complete(3), 1, 0)


def test_dp_matches_naive_enumeration_on_atlas():
    for G in atlas_graphs(5):
        for r in range(1, 4):
            assert is_r_robust(G, r).verdict == naive_r(G, r)
            assert is_r_robust(G, r, strict=True).verdict == naive_r(G, r, strict=True)
            for s in range(1, G.node_count + 1):
                assert is_rs_robust(G, r, s).verdict == naive_rs(G, r, s)


@settings(max_examples=60, deadline=None)
@given(random_graphs, st.integers(1, 4), st.integers(1, 6))
def test_negative_verdicts_have_sound_witnesses(G, r, s):
    for rep in (is_r_robust(G, r), is_rs_robust(G, r, s)):
        assert rep.verdict == (rep.witness is None)
        if not rep.verdict:
            assert witness_violates(G, rep)


@settings(max_examples=60, deadline=None)
@given(random_graphs, st.integers(1, 4), st.integers(1, 5))
def test_nesting_in_r_and_s(G, r, s):
    if is_rs_robust(G, r + 1, s).verdict:
        assert is_rs_robust(G, r, s).verdict
    if is_rs_robust(G, r, s + 1).verdict:
        assert is_rs_robust(G, r, s).verdict
    if is_r_robust(G, r + 1).verdict:
        assert is_r_robust(G, r).verdict


@pytest.mark.parametrize("d,F", [(1, 1), (2, 1), (1, 2), (3, 1)])
def test_robust_implies_rs_robust_on_atlas(d, F):
    for G in atlas_graphs(6):
        if is_r_robust(G, (d + 1) * F + 1).verdict:
            assert is_rs_robust(G, d * F + 1, F + 1).verdict


# fault sets and degree assumption


def test_degree_assumption_on_complete_five():
    assert all(check_degree_assumption(Network.complete(5), 2, 1).values())
    assert not any(check_degree_assumption(Network.complete(4), 2, 1).values())


def test_degree_assumption_on_path():
    # d=1, F=1 needs degree 3; F=0 needs degree 1
    assert not any(check_degree_assumption(Network.path(3), 1, 1).values())
    assert all(check_degree_assumption(Network.path(3), 1, 0).values())
    star = check_degree_assumption(Network.star(5), 1, 1)
    assert star == {0: True, 1: False, 2: False, 3: False, 4: False}


def test_total_fault_set_counts_globally():
    G = Network.complete(5)
    assert validate_fault_set(G, FaultSet({0}, 1, F_TOTAL))
    assert not validate_fault_set(G, FaultSet({0, 1}, 1, F_TOTAL))


def test_local_fault_set_counts_per_neighbourhood():
    G = Network.path(5)
    # nodes 0 and 4 share no benign neighbour
    assert validate_fault_set(G, FaultSet({0, 4}, 1, F_LOCAL))
    assert not validate_fault_set(G, FaultSet({0, 2}, 1, F_LOCAL))


def test_star_centre_is_a_valid_local_fault():
    G = Network.star(5)
    assert validate_fault_set(G, FaultSet({0}, 1, F_LOCAL))


def test_fault_member_out_of_range():
    assert not validate_fault_set(Network.path(3), FaultSet({7}, 1))


def test_unknown_model_rejected():
    with pytest.raises(GraphError):
        FaultSet({0}, 1, "global")


@settings(max_examples=60, deadline=None)
@given(random_graphs, st.sets(st.integers(0, 5), max_size=3), st.integers(0, 2))
def test_total_fault_sets_are_local_fault_sets(G, members, F):
    members = {m for m in members if m < G.node_count}
    if validate_fault_set(G, FaultSet(members, F, F_TOTAL)):
        assert validate_fault_set(G, FaultSet(members, F, F_LOCAL))
