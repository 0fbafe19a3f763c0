import random

import numpy as np
import pytest

from conftest import random_graph, tiny_config
from uvsd.datasets import generate_synthetic
from uvsd.graph import BehaviorGraph, Edge, Stance, UserNode
from uvsd.pipeline import (
    PipelineError, evaluate_model, frame_mean_features, imageize_graph, load_model, load_videos, run_pipeline,
    save_model, save_videos, sweep_sbp, train_and_evaluate, train_model,
)
from uvsd.raster import pixel_value


@pytest.fixture(scope="module")
def small_run():
    cfg = tiny_config()
    graphs = generate_synthetic(cfg.synth)
    return cfg, graphs, run_pipeline(cfg, graphs)


def test_one_video_per_graph(small_run):
    cfg, graphs, result = small_run
    assert not result.failures
    assert [v.root for v in result.videos] == [g.root for g in graphs]
    assert [v.label for v in result.videos] == [g.label for g in graphs]
    for v in result.videos:
        assert v.frames.shape == (cfg.video_length, cfg.raster.canvas, cfg.raster.canvas, 3)
        # normalized slices are disjoint, so across frames every node is drawn exactly once
        lit = [int(np.count_nonzero(f.max(axis=2))) for f in v.frames]
        assert lit == [6, 6, 6] and sum(lit) == cfg.synth.nodes_per_graph


def test_sbp_truncates_node_timeline():
    # node i has fans 100*i, so every frame identifies its node by brightness
    nodes = tuple(UserNode(i, Stance.POSITIVE, 100 * i, 0, i) for i in range(100))
    g = BehaviorGraph(0, nodes, tuple(Edge(i, i + 1, 1.0) for i in range(99)))
    assert len(g.truncate(0.05)) == 5
    cfg = tiny_config(sbp=0.05, delta_n=1, video_length=8)
    frames = imageize_graph(g, cfg).frames
    lit = [int(np.count_nonzero(f.max(axis=2))) for f in frames]
    assert lit == [1] * 8
    expected = [pixel_value((255, 0, 0), 0.062 * i, cfg.raster)[0] for i in range(5)]
    assert [float(f[..., 0].max()) for f in frames] == pytest.approx(expected + [expected[-1]] * 3, abs=1e-6)


def test_full_sbp_uses_every_node():
    g = random_graph(random.Random(4), 30)
    video = imageize_graph(g, tiny_config(delta_n=30, video_length=1))
    assert int(np.count_nonzero(video.frames[0].max(axis=2))) == 30


def test_failures_are_contained():
    good = [random_graph(random.Random(i), 6) for i in range(3)]
    # 60 nodes never fit a 6x6 canvas
    big = BehaviorGraph(100, tuple(UserNode(i, Stance.POSITIVE, 0, 0, i) for i in range(100, 160)),
                        tuple(Edge(i, i + 1, 1.0) for i in range(100, 159)))
    cfg = tiny_config(raster={"canvas": 6}, delta_n=60)
    result = run_pipeline(cfg, good[:2] + [big] + good[2:])
    assert len(result.videos) == 3
    assert len(result.failures) == 1 and result.failures[0][0] == 100
    assert "CanvasOverflow" in result.failures[0][1]
    with pytest.raises(PipelineError):
        run_pipeline(cfg, [big])
    with pytest.raises(PipelineError):
        run_pipeline(cfg, [])


def test_threads_do_not_change_output(small_run):
    cfg, graphs, result = small_run
    again = run_pipeline(cfg, graphs[:4], threads=2)
    for a, b in zip(again.videos, result.videos[:4]):
        assert np.array_equal(a.frames, b.frames)


def test_stage_outputs_reload_identically(small_run, tmp_path):
    cfg, _, result = small_run
    model, report = train_and_evaluate(result.videos, cfg)
    reloaded = load_videos(save_videos(result.videos, tmp_path / "videos"))
    assert [(v.root, v.label) for v in reloaded] == [(v.root, v.label) for v in result.videos]
    model2, report2 = train_and_evaluate(reloaded, cfg)
    for k in model.params:
        assert np.array_equal(model.params[k], model2.params[k])
    save_model(model2, tmp_path / "m.uvsm")
    params, meta = load_model(tmp_path / "m.uvsm")
    assert meta["test"] == model.test_roots
    test = [v for v in reloaded if v.root in set(meta["test"])]
    assert evaluate_model(params, test, cfg.sbp).to_json() == report.to_json()


def test_splits_are_disjoint(small_run):
    cfg, _, result = small_run
    model = train_model(result.videos, cfg)
    parts = [set(model.train_roots), set(model.val_roots), set(model.test_roots)]
    assert sum(map(len, parts)) == len(result.videos)
    assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])


def test_sweep_reports_per_fraction(small_run):
    cfg, graphs, _ = small_run
    reports = sweep_sbp(cfg, graphs, [0.5, 1.0, 1.0])
    assert [r.sbp for r in reports] == [0.5, 1.0, 1.0]
    # duplicates are independent reruns with the same seeds
    assert reports[1].to_json() == reports[2].to_json()
    with pytest.raises(ValueError):
        sweep_sbp(cfg, graphs, [0.0])


def test_frame_mean_features(small_run):
    cfg, _, result = small_run
    X = frame_mean_features(result.videos)
    assert X.shape == (len(result.videos), cfg.video_length * 3)
