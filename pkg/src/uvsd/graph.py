"""Behavior-graph data model, JSONL ingestion, temporal slicing and
slice normalization (new-node extraction with bridged edge weights)."""
from __future__ import annotations

import enum
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Optional, Sequence

NodeId = Hashable

# chains through more deleted nodes than this are not bridged
MAX_BRIDGE_DELETED = 3


class DatasetError(ValueError):
    """Raised for malformed or invariant-violating dataset records."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Stance(enum.Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"
    NEUTRAL = "neu"


def _check_id(value, what: str) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise DatasetError(f"{what} must be an int or str, got {value!r}")


def _id_key(node_id) -> tuple:
    # ints sort before strings so mixed-id datasets still order deterministically
    return (1, node_id) if isinstance(node_id, str) else (0, node_id)


@dataclass(frozen=True)
class UserNode:
    id: NodeId
    stance: Stance
    fans: int = 0
    offic_lev: int = 0
    first_active_at: int = 0

    def __post_init__(self):
        _check_id(self.id, "node id")
        if not isinstance(self.stance, Stance):
            raise DatasetError(f"node {self.id!r}: invalid stance {self.stance!r}")
        if self.fans < 0:
            raise DatasetError(f"node {self.id!r}: fans must be >= 0")
        if self.offic_lev < 0:
            raise DatasetError(f"node {self.id!r}: officLev must be >= 0")

    @property
    def sort_key(self) -> tuple:
        return (self.first_active_at, _id_key(self.id))


@dataclass(frozen=True)
class Edge:
    src: NodeId
    dst: NodeId
    weight: float
    created_at: int = 0

    def __post_init__(self):
        if self.src == self.dst:
            raise DatasetError(f"self-loop on node {self.src!r}")
        if not (self.weight > 0) or not math.isfinite(self.weight):
            raise DatasetError(f"edge ({self.src!r}, {self.dst!r}): weight must be positive and finite")

    @property
    def pair(self) -> frozenset:
        return frozenset((self.src, self.dst))


def merge_edges(edges: Iterable[Edge]) -> list[Edge]:
    """Collapse duplicate unordered pairs by summing weights.

    The first occurrence fixes orientation and position; ``created_at`` is the
    earliest timestamp among the duplicates.
    """
    merged: "OrderedDict[frozenset, Edge]" = OrderedDict()
    for e in edges:
        key = e.pair
        prev = merged.get(key)
        if prev is None:
            merged[key] = e
        else:
            merged[key] = Edge(prev.src, prev.dst, prev.weight + e.weight,
                               min(prev.created_at, e.created_at))
    return list(merged.values())


@dataclass(frozen=True)
class BehaviorGraph:
    """One root user's interaction graph (undirected, simple).

    ``root`` is ``None`` only for temporal slices that do not yet include the
    root user.
    """

    root: Optional[NodeId]
    nodes: tuple[UserNode, ...]
    edges: tuple[Edge, ...]
    label: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        ids = set()
        for n in self.nodes:
            if n.id in ids:
                raise DatasetError(f"duplicate node id {n.id!r}")
            ids.add(n.id)
        if self.root is not None and self.root not in ids:
            raise DatasetError(f"root {self.root!r} is not among the nodes")
        pairs = set()
        for e in self.edges:
            for end in (e.src, e.dst):
                if end not in ids:
                    raise DatasetError(f"edge references unknown node id {end!r}")
            if e.pair in pairs:
                raise DatasetError(f"duplicate edge ({e.src!r}, {e.dst!r})")
            pairs.add(e.pair)
        if self.label not in (None, 0, 1):
            raise DatasetError(f"label must be 0, 1 or null, got {self.label!r}")

    @cached_property
    def node_map(self) -> dict:
        return {n.id: n for n in self.nodes}

    @cached_property
    def adjacency(self) -> dict:
        """id -> {neighbor id: Edge}, in edge-list order."""
        adj = {n.id: {} for n in self.nodes}
        for e in self.edges:
            adj[e.src][e.dst] = e
            adj[e.dst][e.src] = e
        return adj

    def __len__(self) -> int:
        return len(self.nodes)

    def temporal_order(self) -> list[UserNode]:
        return sorted(self.nodes, key=lambda n: n.sort_key)

    def induced(self, node_ids: Iterable[NodeId]) -> "BehaviorGraph":
        """Node-induced subgraph; node order follows ``node_ids``."""
        keep = list(node_ids)
        keep_set = set(keep)
        nodes = [self.node_map[i] for i in keep]
        edges = [e for e in self.edges if e.src in keep_set and e.dst in keep_set]
        root = self.root if self.root in keep_set else None
        return BehaviorGraph(root, tuple(nodes), tuple(edges), self.label)

    def truncate(self, fraction: float) -> "BehaviorGraph":
        """Keep the earliest ``fraction`` of nodes by first activity (at least one)."""
        if not 0 < fraction <= 1:
            raise ValueError("fraction must be in (0, 1]")
        order = self.temporal_order()
        k = max(1, int(round(fraction * len(order))))
        return self.induced(n.id for n in order[:k])


@dataclass(frozen=True)
class SubgraphSequence:
    slices: tuple[BehaviorGraph, ...]
    delta_n: int

    def __len__(self):
        return len(self.slices)

    def __iter__(self):
        return iter(self.slices)

    def __getitem__(self, k):
        return self.slices[k]


@dataclass(frozen=True)
class NormalizedSubgraph:
    """Nodes that are new in one slice plus their (possibly bridged) edges."""

    nodes: tuple[UserNode, ...]
    edges: tuple[Edge, ...]
    bridged: frozenset = field(default_factory=frozenset)

    @cached_property
    def adjacency(self) -> dict:
        adj = {n.id: {} for n in self.nodes}
        for e in self.edges:
            adj[e.src][e.dst] = e.weight
            adj[e.dst][e.src] = e.weight
        return adj

    @property
    def node_ids(self) -> list:
        return [n.id for n in self.nodes]

    def __len__(self):
        return len(self.nodes)


# ---------------------------------------------------------------------------
# ingestion


def _require(obj: dict, key: str, types, line: int, where: str):
    if key not in obj:
        raise DatasetError(f"{where}: missing field {key!r}", line)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, types):
        raise DatasetError(f"{where}: field {key!r} has wrong type {type(value).__name__}", line)
    return value


def parse_record(record: dict, line: int = 0) -> BehaviorGraph:
    if not isinstance(record, dict):
        raise DatasetError("record must be a JSON object", line)
    for key in ("root", "nodes", "edges"):
        if key not in record:
            raise DatasetError(f"missing field {key!r}", line)
    label = record.get("label")
    if label is not None and (isinstance(label, bool) or label not in (0, 1)):
        raise DatasetError(f"label must be 0|1, got {label!r}", line)
    if not isinstance(record["nodes"], list) or not isinstance(record["edges"], list):
        raise DatasetError("nodes and edges must be lists", line)
    try:
        nodes = []
        for j, raw in enumerate(record["nodes"]):
            where = f"nodes[{j}]"
            if not isinstance(raw, dict):
                raise DatasetError(f"{where}: must be an object", line)
            nid = _require(raw, "id", (int, str), line, where)
            stance = _require(raw, "stance", str, line, where)
            try:
                stance = Stance(stance)
            except ValueError:
                raise DatasetError(f"{where}: stance must be pos|neg|neu, got {stance!r}", line) from None
            nodes.append(UserNode(
                nid, stance,
                _require(raw, "fans", int, line, where),
                _require(raw, "officLev", int, line, where),
                _require(raw, "firstActiveAt", int, line, where),
            ))
        edges = []
        for j, raw in enumerate(record["edges"]):
            where = f"edges[{j}]"
            if not isinstance(raw, dict):
                raise DatasetError(f"{where}: must be an object", line)
            edges.append(Edge(
                _require(raw, "src", (int, str), line, where),
                _require(raw, "dst", (int, str), line, where),
                float(_require(raw, "weight", (int, float), line, where)),
                _require(raw, "createdAt", int, line, where),
            ))
        _check_id(record["root"], "root")
        return BehaviorGraph(record["root"], tuple(nodes), tuple(merge_edges(edges)), label)
    except DatasetError as exc:
        if exc.line is None:
            raise DatasetError(str(exc), line) from None
        raise


def load_dataset(path) -> list[BehaviorGraph]:
    """Read a JSONL file with one behavior graph per line (blank lines skipped)."""
    graphs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON: {exc.msg}", lineno) from None
            graphs.append(parse_record(record, lineno))
    return graphs


def graph_to_record(graph: BehaviorGraph) -> dict:
    return {
        "root": graph.root,
        "label": graph.label,
        "nodes": [
            {"id": n.id, "stance": n.stance.value, "fans": n.fans,
             "officLev": n.offic_lev, "firstActiveAt": n.first_active_at}
            for n in graph.nodes
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "weight": e.weight, "createdAt": e.created_at}
            for e in graph.edges
        ],
    }


def dump_dataset(graphs: Iterable[BehaviorGraph], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(json.dumps(graph_to_record(g), separators=(",", ":")))
            fh.write("\n")


# ---------------------------------------------------------------------------
# slicing and normalization


def time_slice(graph: BehaviorGraph, delta_n: int) -> SubgraphSequence:
    """Cumulative temporal prefixes holding delta_n, 2*delta_n, ... nodes.

    The last slice always holds every node, even when its increment is short.
    """
    if delta_n < 1:
        raise ValueError("delta_n must be >= 1")
    if len(graph) == 0:
        raise ValueError("graph has no nodes")
    order = [n.id for n in graph.temporal_order()]
    counts = list(range(delta_n, len(order), delta_n)) + [len(order)]
    return SubgraphSequence(tuple(graph.induced(order[:c]) for c in counts), delta_n)


def recompute_edge_weight(path_weights: Sequence[float], deleted_count: int) -> float:
    """Weight of a bridged edge: chain weight sum over (deleted nodes + 1)."""
    if len(path_weights) == 0:
        raise ValueError("path_weights must be non-empty")
    if deleted_count < 1:
        raise ValueError("deleted_count must be >= 1; direct edges keep their weight")
    if len(path_weights) != deleted_count + 1:
        raise ValueError("a chain through d deleted nodes has d + 1 edges")
    return math.fsum(path_weights) / (deleted_count + 1)


def _bridges_from(start, adj, position, deleted, max_deleted):
    """Min-hop, then min-weight chains from ``start`` through deleted nodes to
    later survivors. Returns {survivor: (deleted_count, chain_edges)}."""
    # layered search: each deleted node keeps its best chain at its min hop count
    frontier = {start: (Fraction(0), [])}
    seen = {start}
    found = {}
    direct = adj[start]
    for depth in range(max_deleted + 1):
        nxt = {}
        for node, (total, chain) in frontier.items():
            for nbr, e in adj[node].items():
                if nbr in deleted:
                    if depth == max_deleted or nbr in seen:
                        continue
                    cand = total + Fraction(e.weight)
                    best = nxt.get(nbr)
                    if best is None or cand < best[0]:
                        nxt[nbr] = (cand, chain + [e])
                elif depth > 0 and nbr != start and nbr not in direct and position[nbr] > position[start]:
                    cand = total + Fraction(e.weight)
                    best = found.get(nbr)
                    if best is None or (best[0] == depth and cand < best[1]):
                        found[nbr] = (depth, cand, chain + [e])
        seen.update(nxt)
        frontier = nxt
        if not frontier:
            break
    return {v: (d, chain) for v, (d, _, chain) in found.items()}


def normalize_subgraph(current: BehaviorGraph, previous: Optional[BehaviorGraph] = None,
                       max_deleted: int = MAX_BRIDGE_DELETED) -> NormalizedSubgraph:
    """Drop the nodes already seen in ``previous``; reconnect surviving pairs
    that were linked only through dropped nodes."""
    if previous is None:
        return NormalizedSubgraph(current.nodes, current.edges)
    cur_ids = current.node_map
    deleted = set()
    for n in previous.nodes:
        if n.id not in cur_ids:
            raise ValueError(f"previous slice node {n.id!r} is missing from the current slice")
        deleted.add(n.id)
    survivors = [n for n in current.nodes if n.id not in deleted]
    position = {n.id: i for i, n in enumerate(survivors)}
    adj = current.adjacency

    found = {}
    for e in current.edges:
        if e.src in position and e.dst in position:
            found[e.pair] = e
    bridged = set()
    for n in survivors:
        for v, (d, chain) in _bridges_from(n.id, adj, position, deleted, max_deleted).items():
            w = recompute_edge_weight([c.weight for c in chain], d)
            found[frozenset((n.id, v))] = Edge(n.id, v, w, max(c.created_at for c in chain))
            bridged.add(frozenset((n.id, v)))

    def canon(e: Edge):
        a, b = sorted((position[e.src], position[e.dst]))
        return (a, b)

    edges = sorted(found.values(), key=canon)
    return NormalizedSubgraph(tuple(survivors), tuple(edges), frozenset(bridged))


def normalize_sequence(seq: SubgraphSequence, max_deleted: int = MAX_BRIDGE_DELETED) -> list[NormalizedSubgraph]:
    out = []
    prev = None
    for cur in seq.slices:
        out.append(normalize_subgraph(cur, prev, max_deleted))
        prev = cur
    return out
