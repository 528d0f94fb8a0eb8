import math
import random
from itertools import combinations

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ata import ged
from ata.flow import EMPTY_FLOW, TaskFlowGraph, TaskNode
from ata.ged import KERNELS, GedCostModel, encode, graph_edit_distance, greedy_ged, mapping_cost, mean_pairwise_ged

from oracles import brute_force_ged, random_flow


def _single(label):
    return TaskFlowGraph.build([TaskNode("x", label)])


def _path():
    return TaskFlowGraph.build([TaskNode("a", "A"), TaskNode("b", "B", parent="a"), TaskNode("c", "C", parent="b")])


def _star():
    return TaskFlowGraph.build([TaskNode("a", "A"), TaskNode("b", "B", parent="a"), TaskNode("c", "C", parent="a")])


def test_identity():
    g = _path()
    r = graph_edit_distance(g, g)
    assert (r.distance, r.exact) == (0, True)
    assert r.node_mapping == {"a": "a", "b": "b", "c": "c"}


def test_single_substitution():
    r = graph_edit_distance(_single("p"), _single("q"))
    assert (r.distance, r.exact) == (1, True)


def test_path_versus_star():
    assert graph_edit_distance(_path(), _star()).distance == brute_force_ged(_path(), _star()) == 2


def test_empty_graphs():
    assert graph_edit_distance(EMPTY_FLOW, EMPTY_FLOW).distance == 0
    assert graph_edit_distance(EMPTY_FLOW, _path()).distance == 3 + 2
    assert graph_edit_distance(_path(), EMPTY_FLOW).distance == 3 + 2


def test_edge_type_change_costs_two():
    dec = TaskFlowGraph.build([TaskNode("a", "A"), TaskNode("b", "B", parent="a")])
    dep = TaskFlowGraph.build([TaskNode("a", "A"), TaskNode("b", "B", depends_on=("a",))])
    assert graph_edit_distance(dec, dep).distance == 2


def test_edges_are_directed():
    ab = TaskFlowGraph.build([TaskNode("a", "X"), TaskNode("b", "Y", parent="a")])
    ba = TaskFlowGraph.build([TaskNode("b", "Y"), TaskNode("a", "X", parent="b")])
    assert graph_edit_distance(ab, ba).distance == 2


def test_budget_switches_to_greedy():
    rng = random.Random(3)
    a, b = random_flow(rng, 8, min_nodes=8), random_flow(rng, 8, min_nodes=8)
    exact = graph_edit_distance(a, b)
    approx = graph_edit_distance(a, b, budget=4)
    assert exact.exact and not approx.exact
    assert approx.node_mapping is None
    assert approx.distance >= exact.distance


def test_custom_costs_match_oracle():
    costs = GedCostModel(node_insert=2, node_delete=3, node_substitute=0.5, edge_insert=1.5, edge_delete=0.25)
    rng = random.Random(17)
    for _ in range(60):
        a, b = random_flow(rng, 4), random_flow(rng, 4)
        want = brute_force_ged(a, b, *costs.as_tuple())
        assert graph_edit_distance(a, b, costs).distance == pytest.approx(want, abs=1e-12)


def test_cost_model_validation():
    with pytest.raises(ValueError):
        GedCostModel(node_insert=-1)
    with pytest.raises(ValueError):
        GedCostModel(edge_delete=math.inf)


def test_networkx_agrees():
    def as_nx(flow):
        g = nx.DiGraph()
        for k, n in flow.nodes.items():
            g.add_node(k, label=n.label)
        g.add_edges_from(flow.decomposition_edges(), kind=1)
        g.add_edges_from(flow.dependency_edges(), kind=2)
        return g

    rng = random.Random(8)
    for _ in range(25):
        a, b = random_flow(rng, 4), random_flow(rng, 4)
        want = nx.graph_edit_distance(
            as_nx(a),
            as_nx(b),
            node_match=lambda x, y: x["label"] == y["label"],
            # retyping an edge is a delete plus an insert here, not one substitution
            edge_subst_cost=lambda x, y: 0 if x["kind"] == y["kind"] else 2,
        )
        assert graph_edit_distance(a, b).distance == want


@pytest.mark.skipif("cython" not in KERNELS, reason="compiled kernel not built")
def test_kernels_agree():
    rng = random.Random(21)
    for _ in range(300):
        a, b = random_flow(rng, 7), random_flow(rng, 7)
        py = graph_edit_distance(a, b, kernel="python").distance
        cy = graph_edit_distance(a, b, kernel="cython").distance
        assert py == cy


def test_pure_python_selection_by_env(monkeypatch):
    import importlib

    monkeypatch.setenv("ATA_PURE_PYTHON", "1")
    reloaded = importlib.reload(ged)
    try:
        assert reloaded.KERNEL == "python"
    finally:
        monkeypatch.delenv("ATA_PURE_PYTHON")
        importlib.reload(ged)


def test_mapping_matches_distance():
    rng = random.Random(2)
    for _ in range(100):
        a, b = random_flow(rng, 5), random_flow(rng, 5)
        r = graph_edit_distance(a, b)
        ea, eb = encode(a), encode(b)
        index_b = {k: i for i, k in enumerate(eb.ids)}
        phi = [index_b[r.node_mapping[k]] if k in r.node_mapping else -1 for k in ea.ids]
        assert mapping_cost(ea, eb, phi) == r.distance


graphs = st.builds(lambda seed, size: random_flow(random.Random(seed), size), st.integers(0, 2**32), st.integers(1, 5))


@given(graphs, graphs)
def test_symmetric_under_unit_costs(a, b):
    assert graph_edit_distance(a, b).distance == graph_edit_distance(b, a).distance


@given(graphs, graphs, graphs)
def test_triangle_inequality(a, b, c):
    d = lambda x, y: graph_edit_distance(x, y).distance  # noqa: E731
    assert d(a, c) <= d(a, b) + d(b, c)


@given(graphs, graphs)
def test_greedy_is_an_upper_bound(a, b):
    upper, phi = greedy_ged(encode(a), encode(b))
    assert upper >= graph_edit_distance(a, b).distance
    assert upper == mapping_cost(encode(a), encode(b), phi)


@given(graphs, graphs)
def test_zero_iff_isomorphic_with_labels(a, b):
    same = graph_edit_distance(a, b).distance == 0
    assert same == (brute_force_ged(a, b) == 0)


# mean pairwise ----------------------------------------------------------------


def test_mean_pairwise_identical():
    assert mean_pairwise_ged([_path()] * 5) == 0


def test_mean_pairwise_two_graphs():
    assert mean_pairwise_ged([_path(), _star()]) == graph_edit_distance(_path(), _star()).distance


def test_mean_pairwise_one_outlier():
    d = graph_edit_distance(_path(), _star()).distance
    assert d == brute_force_ged(_path(), _star())
    assert mean_pairwise_ged([_path()] * 4 + [_star()]) == pytest.approx(4 * d / 10, rel=1e-12)


def test_mean_pairwise_is_average_over_pairs():
    rng = random.Random(4)
    gs = [random_flow(rng, 5) for _ in range(6)]
    values = [brute_force_ged(a, b) for a, b in combinations(gs, 2)]
    assert len(values) == 15
    assert mean_pairwise_ged(gs) == pytest.approx(sum(values) / 15, rel=1e-12)


def test_mean_pairwise_needs_two():
    with pytest.raises(ValueError):
        mean_pairwise_ged([_path()])
