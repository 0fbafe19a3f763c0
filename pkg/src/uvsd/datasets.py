"""Synthetic labelled behavior graphs, stratified splitting and metrics."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .graph import BehaviorGraph, Edge, Stance, UserNode
from .seeding import derive_rng

_STANCES = (Stance.POSITIVE, Stance.NEGATIVE, Stance.NEUTRAL)


@dataclass(frozen=True)
class SynthConfig:
    num_users: int = 200
    spammer_fraction: float = 0.5
    nodes_per_graph: int = 80
    spammer_pos_stance_rate: float = 0.45
    normal_pos_stance_rate: float = 0.40
    spammer_burstiness: float = 8.0
    # members of a coordinated group copy the group stance with this probability
    group_cohesion: float = 0.85
    group_size: tuple = (5, 10)
    group_density: float = 0.7
    mean_gap: float = 600.0
    seed: int = 0

    def __post_init__(self):
        if self.num_users < 2:
            raise ValueError("num_users must be >= 2")
        if not 0 < self.spammer_fraction < 1:
            raise ValueError("spammer_fraction must lie in (0, 1)")
        if self.nodes_per_graph < 1:
            raise ValueError("nodes_per_graph must be >= 1")
        for rate in (self.spammer_pos_stance_rate, self.normal_pos_stance_rate, self.group_cohesion, self.group_density):
            if not 0 <= rate <= 1:
                raise ValueError("rates must lie in [0, 1]")
        if self.spammer_burstiness < 1:
            raise ValueError("spammer_burstiness must be >= 1")


def _draw_stance(rng, pos_rate):
    if rng.random() < pos_rate:
        return Stance.POSITIVE
    return Stance.NEGATIVE if rng.random() < 0.5 else Stance.NEUTRAL


def _influence(rng):
    fans = int(rng.lognormal(5.5, 1.5))
    offic = int(rng.choice(3, p=(0.85, 0.12, 0.03)))
    return fans, offic


def _weight(rng):
    return float(round(rng.uniform(0.5, 1.5), 6))


def _normal_graph(rng, root, cfg: SynthConfig):
    """Sparse, tree-like relations; steady activity; independent stances."""
    n = cfg.nodes_per_graph
    t = np.concatenate([[0], np.cumsum(rng.exponential(cfg.mean_gap, n - 1))]).astype(np.int64)
    stances = [_draw_stance(rng, cfg.normal_pos_stance_rate) for _ in range(n)]
    edges = {}
    for i in range(1, n):
        parent = int(rng.integers(i))
        edges[(parent, i)] = _weight(rng)
    for _ in range(n // 10):
        a, b = sorted(int(v) for v in rng.choice(n, 2, replace=False))
        edges.setdefault((a, b), _weight(rng))
    return t, stances, edges


def _spammer_graph(rng, root, cfg: SynthConfig):
    """Coordinated groups: dense, same-stance, activated in short bursts."""
    n = cfg.nodes_per_graph
    lo, hi = cfg.group_size
    groups, start = [], 0
    while start < n:
        size = int(rng.integers(lo, hi + 1))
        groups.append(range(start, min(n, start + size)))
        start += size
    t = np.zeros(n, dtype=np.int64)
    stances = [None] * n
    edges = {}
    clock = 0.0
    for gi, grp in enumerate(groups):
        if gi:
            clock += rng.exponential(cfg.mean_gap * len(grp))
        group_stance = _draw_stance(rng, cfg.spammer_pos_stance_rate)
        for i in grp:
            if i != grp.start:
                clock += rng.exponential(cfg.mean_gap / cfg.spammer_burstiness)
            t[i] = int(clock)
            stances[i] = group_stance if rng.random() < cfg.group_cohesion else _STANCES[int(rng.integers(3))]
        members = list(grp)
        for a_i, a in enumerate(members):
            for b in members[a_i + 1:]:
                if rng.random() < cfg.group_density:
                    edges[(a, b)] = _weight(rng)
        # chain consecutive members so every group is connected
        for a, b in zip(members, members[1:]):
            edges.setdefault((a, b), _weight(rng))
        if gi:
            anchor = int(rng.integers(grp.start))
            edges.setdefault((anchor, grp.start), _weight(rng))
    return t, stances, edges


def synth_graph(index: int, label: int, cfg: SynthConfig) -> BehaviorGraph:
    rng = derive_rng(cfg.seed, "synth", index)
    root = f"u{index:05d}"
    build = _spammer_graph if label else _normal_graph
    t, stances, edges = build(rng, root, cfg)
    ids = [root] + [f"{root}.{i}" for i in range(1, cfg.nodes_per_graph)]
    nodes = []
    for i, nid in enumerate(ids):
        fans, offic = _influence(rng)
        nodes.append(UserNode(nid, stances[i], fans, offic, int(t[i])))
    edge_list = [Edge(ids[a], ids[b], w, int(max(t[a], t[b]))) for (a, b), w in sorted(edges.items())]
    return BehaviorGraph(root, tuple(nodes), tuple(edge_list), label)


def generate_synthetic(config: SynthConfig = SynthConfig()) -> list[BehaviorGraph]:
    """Labelled graphs; exactly round(num_users * spammer_fraction) spammers, shuffled."""
    n_spam = int(math.floor(config.num_users * config.spammer_fraction + 0.5))
    labels = np.array([1] * n_spam + [0] * (config.num_users - n_spam))
    labels = derive_rng(config.seed, "labels").permutation(labels)
    return [synth_graph(i, int(y), config) for i, y in enumerate(labels)]


def aggregate_features(graph: BehaviorGraph) -> np.ndarray:
    """(positive-stance rate, mean degree) of a graph."""
    pos = sum(n.stance is Stance.POSITIVE for n in graph.nodes) / len(graph.nodes)
    return np.array([pos, 2.0 * len(graph.edges) / len(graph.nodes)])


# ---------------------------------------------------------------------------
# splitting


def _label_of(item):
    label = getattr(item, "label", None)
    if label is None and isinstance(item, tuple):
        label = item[1]
    if label not in (0, 1):
        raise ValueError(f"item without a binary label: {item!r}")
    return int(label)


def split(dataset: Sequence, ratio: float = 0.8, seed: int = 0):
    """Stratified (train, test); per-class train counts round to nearest.

    Both classes stay on both sides whenever a class has at least two items.
    Output preserves dataset order within each side.
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    if len(dataset) < 2:
        raise ValueError("need at least two items to split")
    rng = derive_rng(seed, "split")
    train_idx = []
    for cls in (0, 1):
        members = [i for i, item in enumerate(dataset) if _label_of(item) == cls]
        if not members:
            continue
        k = int(math.floor(ratio * len(members) + 0.5))
        if len(members) >= 2:
            k = min(max(k, 1), len(members) - 1)
        perm = rng.permutation(len(members))
        train_idx.extend(members[j] for j in perm[:k])
    chosen = set(train_idx)
    train = [item for i, item in enumerate(dataset) if i in chosen]
    test = [item for i, item in enumerate(dataset) if i not in chosen]
    if not train or not test:
        raise ValueError("dataset too small to stratify into non-empty splits")
    return train, test


# ---------------------------------------------------------------------------
# metrics


def accuracy(predictions, labels) -> float:
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in length")
    if p.size == 0:
        raise ValueError("empty input")
    return float(np.mean(p == y))


def auc(scores, labels) -> float:
    """Mann-Whitney AUC from average ranks; ties count one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(s, method="average")
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion_matrix(predictions, labels) -> list:
    """[[TN, FP], [FN, TP]] (rows: true label, columns: predicted)."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    return [[int(np.sum((y == t) & (p == q))) for q in (0, 1)] for t in (0, 1)]


@dataclass
class EvalReport:
    accuracy: float
    auc: float
    confusion: list = field(default_factory=list)
    sbp: float = 1.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def evaluate_scores(scores, labels, sbp: float = 1.0, threshold: float = 0.5) -> EvalReport:
    scores = np.asarray(scores, dtype=np.float64)
    preds = (scores >= threshold).astype(int)
    return EvalReport(accuracy(preds, labels), auc(scores, labels), confusion_matrix(preds, labels), float(sbp))
