import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_graph, random_graph
from oracles import bridged_edges_bruteforce
from uvsd.graph import (
    BehaviorGraph, DatasetError, Edge, Stance, UserNode, dump_dataset, graph_to_record, load_dataset,
    normalize_sequence, normalize_subgraph, recompute_edge_weight, time_slice,
)


def _node(i, t=0, stance="pos"):
    return {"id": i, "stance": stance, "fans": 10, "officLev": 0, "firstActiveAt": t}


def _edge(a, b, w=1.0, t=0):
    return {"src": a, "dst": b, "weight": w, "createdAt": t}


# --- ingestion ---------------------------------------------------------------

def test_load_single_record(write_jsonl):
    rec = {"root": "a", "label": 1, "nodes": [_node("a"), _node("b"), _node("c")],
           "edges": [_edge("a", "b"), _edge("b", "c")]}
    graphs = load_dataset(write_jsonl([rec]))
    assert len(graphs) == 1
    g = graphs[0]
    assert len(g.nodes) == 3 and len(g.edges) == 2
    assert g.root == "a" and g.label == 1


def test_dangling_edge_names_the_id(write_jsonl):
    rec = {"root": "a", "nodes": [_node("a"), _node("b")], "edges": [_edge("a", "ghost")]}
    with pytest.raises(DatasetError, match="ghost"):
        load_dataset(write_jsonl([rec]))


def test_duplicate_edges_merge_by_sum(write_jsonl, tmp_path):
    rec = {"root": "a", "nodes": [_node("a"), _node("b")],
           "edges": [_edge("a", "b", 0.4), _edge("b", "a", 0.6)]}
    g = load_dataset(write_jsonl([rec]))[0]
    assert len(g.edges) == 1
    assert g.edges[0].weight == pytest.approx(1.0, abs=1e-15)
    # survives a serialize / reload round trip
    out = tmp_path / "again.jsonl"
    dump_dataset([g], out)
    again = load_dataset(out)[0]
    assert again.edges[0].weight == g.edges[0].weight
    assert graph_to_record(again) == graph_to_record(g)


@pytest.mark.parametrize("mutate, needle", [
    (lambda r: r["nodes"][0].pop("fans"), "fans"),
    (lambda r: r["nodes"][0].update(stance="angry"), "stance"),
    (lambda r: r["nodes"][0].update(fans=-1), "fans"),
    (lambda r: r["edges"].append(_edge("a", "a")), "self-loop"),
    (lambda r: r["edges"][0].update(weight=0.0), "weight"),
    (lambda r: r.update(root="zz"), "root"),
    (lambda r: r["nodes"][1].update(firstActiveAt="late"), "firstActiveAt"),
])
def test_schema_violations_carry_line_number(write_jsonl, mutate, needle):
    good = {"root": "a", "nodes": [_node("a"), _node("b")], "edges": [_edge("a", "b")]}
    bad = json.loads(json.dumps(good))
    mutate(bad)
    path = write_jsonl([good, bad])
    with pytest.raises(DatasetError, match=needle) as info:
        load_dataset(path)
    assert info.value.line == 2
    assert "line 2" in str(info.value)


def test_invalid_json_reports_line(tmp_path):
    p = tmp_path / "bad.jsonl"
    good = {"root": 1, "nodes": [_node(1)], "edges": []}
    p.write_text(json.dumps(good) + "\n{nope\n")
    with pytest.raises(DatasetError) as info:
        load_dataset(p)
    assert info.value.line == 2


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_dataset("/nonexistent/file.jsonl")


def test_graph_invariants():
    a = UserNode("a", Stance.POSITIVE)
    with pytest.raises(DatasetError):
        BehaviorGraph("a", (a, a), ())
    with pytest.raises(DatasetError):
        BehaviorGraph("a", (a, UserNode("b", Stance.NEUTRAL)), (Edge("a", "b", 1.0), Edge("b", "a", 2.0)))
    with pytest.raises(DatasetError):
        BehaviorGraph("a", (a,), (), label=2)


# --- slicing -----------------------------------------------------------------

@pytest.mark.parametrize("n, delta, counts", [(12, 4, [4, 8, 12]), (10, 4, [4, 8, 10]), (5, 5, [5])])
def test_slice_counts(n, delta, counts):
    g = make_graph(n, [(i, i + 1, 1.0) for i in range(n - 1)])
    seq = time_slice(g, delta)
    assert [len(s) for s in seq] == counts
    assert seq.delta_n == delta


def test_single_slice_is_whole_graph():
    g = make_graph(5, [(0, 1, 1.0), (2, 3, 0.5)])
    (only,) = time_slice(g, 5).slices
    assert {n.id for n in only.nodes} == {n.id for n in g.nodes}
    assert set(only.edges) == set(g.edges)


def test_slice_order_uses_time_then_id():
    g = make_graph(4, [], times=[5, 1, 5, 0])
    seq = time_slice(g, 1)
    assert [n.id for n in seq[-1].nodes] == [3, 1, 0, 2]
    assert seq[0].root is None  # root (id 0, t=5) arrives in slice 3
    assert seq[2].root == 0


def test_slices_are_induced_and_nested():
    rng = random.Random(3)
    g = random_graph(rng, 15, 0.4)
    seq = time_slice(g, 4)
    for a, b in zip(seq.slices, seq.slices[1:]):
        ids_a = {n.id for n in a.nodes}
        assert ids_a <= {n.id for n in b.nodes}
        assert set(a.edges) == {e for e in b.edges if e.src in ids_a and e.dst in ids_a}


def test_slice_rejects_bad_delta():
    with pytest.raises(ValueError):
        time_slice(make_graph(3, []), 0)


def test_truncate_fractions():
    g = make_graph(100, [(i, i + 1, 1.0) for i in range(99)])
    assert len(g.truncate(0.05)) == 5
    assert len(g.truncate(1.0)) == 100
    assert len(g.truncate(0.001)) == 1
    assert [n.id for n in g.truncate(0.05).nodes] == [0, 1, 2, 3, 4]


# --- normalization -----------------------------------------------------------

def _labelled(ids, edges, previous):
    order = {k: i for i, k in enumerate(ids)}
    nodes = tuple(UserNode(k, Stance.NEUTRAL, 0, 0, order[k]) for k in ids)
    cur = BehaviorGraph(None, nodes, tuple(Edge(a, b, w) for a, b, w in edges))
    prev = cur.induced(previous) if previous is not None else None
    return cur, prev


def test_set_difference():
    cur, prev = _labelled("abcd", [("a", "b", 1.0), ("c", "d", 1.0)], "ab")
    sub = normalize_subgraph(cur, prev)
    assert sub.node_ids == ["c", "d"]


def test_first_slice_is_untouched():
    cur, _ = _labelled("abc", [("a", "b", 1.0)], None)
    sub = normalize_subgraph(cur)
    assert sub.node_ids == ["a", "b", "c"]
    assert sub.edges == cur.edges


def test_bridge_through_one_deleted_node():
    cur, prev = _labelled("acd", [("c", "a", 0.4), ("a", "d", 0.6)], "a")
    sub = normalize_subgraph(cur, prev)
    assert sub.node_ids == ["c", "d"]
    assert len(sub.edges) == 1
    e = sub.edges[0]
    assert {e.src, e.dst} == {"c", "d"}
    assert e.weight == pytest.approx(0.5, abs=1e-15)
    assert sub.bridged == {frozenset("cd")}


def test_direct_edge_keeps_weight():
    cur, prev = _labelled("acd", [("c", "a", 0.4), ("a", "d", 0.6), ("c", "d", 3.0)], "a")
    sub = normalize_subgraph(cur, prev)
    assert [(e.weight) for e in sub.edges] == [3.0]
    assert not sub.bridged


def test_minimum_hop_chain_wins_over_lighter_longer_chain():
    # c-x-d costs 10 with one deletion; c-y-z-d costs 0.3 with two
    edges = [("c", "x", 5.0), ("x", "d", 5.0), ("c", "y", 0.1), ("y", "z", 0.1), ("z", "d", 0.1)]
    cur, prev = _labelled("xyzcd", edges, "xyz")
    (e,) = normalize_subgraph(cur, prev).edges
    assert e.weight == pytest.approx(5.0)


def test_weight_tie_break_among_equal_hops():
    edges = [("c", "x", 2.0), ("x", "d", 2.0), ("c", "y", 1.0), ("y", "d", 1.0)]
    cur, prev = _labelled("xycd", edges, "xy")
    (e,) = normalize_subgraph(cur, prev).edges
    assert e.weight == pytest.approx(1.0)


def test_chains_beyond_three_deletions_are_not_bridged():
    chain4 = [("c", "x1", 1.0), ("x1", "x2", 1.0), ("x2", "x3", 1.0), ("x3", "x4", 1.0), ("x4", "d", 1.0)]
    cur, prev = _labelled(["x1", "x2", "x3", "x4", "c", "d"], chain4, ["x1", "x2", "x3", "x4"])
    assert normalize_subgraph(cur, prev).edges == ()
    chain3 = [("c", "x1", 1.0), ("x1", "x2", 1.0), ("x2", "x3", 1.0), ("x3", "d", 1.0)]
    cur, prev = _labelled(["x1", "x2", "x3", "c", "d"], chain3, ["x1", "x2", "x3"])
    (e,) = normalize_subgraph(cur, prev).edges
    assert e.weight == pytest.approx(1.0)


def test_previous_must_be_subset():
    cur, _ = _labelled("ab", [], None)
    other = BehaviorGraph(None, (UserNode("q", Stance.NEUTRAL),), ())
    with pytest.raises(ValueError, match="q"):
        normalize_subgraph(cur, other)


@pytest.mark.parametrize("weights, d, expected", [([0.4, 0.6], 1, 0.5), ([1.0, 1.0, 1.0], 2, 1.0)])
def test_recompute_edge_weight(weights, d, expected):
    assert recompute_edge_weight(weights, d) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("weights, d", [([], 1), ([1.0], 0), ([1.0, 2.0], 2)])
def test_recompute_edge_weight_rejects(weights, d):
    with pytest.raises(ValueError):
        recompute_edge_weight(weights, d)


def test_normalization_matches_bruteforce_chains():
    rng = random.Random(11)
    for _ in range(40):
        n = rng.randrange(4, 10)
        g = random_graph(rng, n, 0.35)
        seq = time_slice(g, rng.randrange(1, n))
        for prev, cur in zip(seq.slices, seq.slices[1:]):
            sub = normalize_subgraph(cur, prev)
            deleted = {x.id for x in prev.nodes}
            expected = bridged_edges_bruteforce([x.id for x in cur.nodes],
                                                [(e.src, e.dst, e.weight) for e in cur.edges], deleted)
            got = {tuple(sorted((e.src, e.dst), key=sub.node_ids.index)): e.weight
                   for e in sub.edges if e.pair in sub.bridged}
            assert got == expected


# --- properties --------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 14), st.integers(1, 20))
def test_partition_and_progression(seed, delta, n):
    g = random_graph(random.Random(seed), n, 0.3)
    seq = time_slice(g, delta)
    counts = [len(s) for s in seq]
    assert all(c == (k + 1) * delta for k, c in enumerate(counts[:-1]))
    assert counts[-1] == n and 0 < counts[-1] - (counts[-2] if len(counts) > 1 else 0) <= delta
    subs = normalize_sequence(seq)
    seen = set()
    for sub in subs:
        ids = set(sub.node_ids)
        assert not ids & seen
        seen |= ids
        assert all(e.weight > 0 for e in sub.edges)
    assert seen == {x.id for x in g.nodes}


def test_serialization_determinism(tmp_path):
    g = random_graph(random.Random(5), 12, 0.4)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    dump_dataset(time_slice(g, 3).slices, a)
    dump_dataset(time_slice(load_dataset_roundtrip(g, tmp_path), 3).slices, b)
    assert a.read_bytes() == b.read_bytes()


def load_dataset_roundtrip(g, tmp_path):
    p = tmp_path / "g.jsonl"
    dump_dataset([g], p)
    return load_dataset(p)[0]
