import json
import random

import pytest

from uvsd.graph import BehaviorGraph, Edge, Stance, UserNode


def make_graph(n_nodes, edges, root=0, times=None, label=None):
    """Graph with int ids 0..n-1; ``edges`` are (a, b, w) triples."""
    times = times or list(range(n_nodes))
    nodes = tuple(UserNode(i, Stance.NEUTRAL, 0, 0, times[i]) for i in range(n_nodes))
    return BehaviorGraph(root, nodes, tuple(Edge(a, b, w) for a, b, w in edges), label)


def random_graph(rng: random.Random, n_nodes, p_edge=0.3):
    edges = []
    for a in range(n_nodes):
        for b in range(a + 1, n_nodes):
            if rng.random() < p_edge:
                edges.append((a, b, round(rng.uniform(0.1, 2.0), 3)))
    times = [rng.randrange(0, 5 * n_nodes) for _ in range(n_nodes)]
    return make_graph(n_nodes, edges, times=times)


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(records, name="data.jsonl"):
        path = tmp_path / name
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        return path
    return _write


TINY = {
    "seed": 3, "delta_n": 6, "video_length": 3,
    "walk": {"walk_length": 8, "walks_per_node": 3},
    "sg": {"dim": 8, "epochs": 2},
    "tsne": {"iterations": 250},
    "raster": {"canvas": 16, "min_visible": 0.5},
    "model": {"conv_channels": [2, 3], "hidden": 4},
    "train": {"epochs": 3, "batch_size": 4, "patience": 2},
    "synth": {"num_users": 12, "nodes_per_graph": 18},
}


def tiny_config(**overrides):
    """Seconds-scale pipeline settings for unit tests."""
    from uvsd.config import config_from_dict

    data = json.loads(json.dumps(TINY))
    for k, v in overrides.items():
        if isinstance(v, dict):
            data.setdefault(k, {}).update(v)
        else:
            data[k] = v
    return config_from_dict(data)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
