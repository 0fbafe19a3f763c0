"""End-to-end composition: graph -> pixels -> slices -> frames -> video -> CNN."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .cnn import fit, predict_scores, read_checkpoint, write_checkpoint
from .config import PipelineConfig
from .datasets import EvalReport, evaluate_scores, split
from .embed import embed_subgraph
from .graph import BehaviorGraph, normalize_sequence, time_slice
from .pixelizer import pixelize_all
from .raster import diffuse, grid_for, render_frame
from .seeding import derive_seed
from .video import UserVideo, assemble_video, read_video, write_video

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


def imageize_graph(graph: BehaviorGraph, config: PipelineConfig) -> UserVideo:
    """Algorithm steps for one root user, ending in a fixed-length video."""
    g = graph.truncate(config.sbp) if config.sbp < 1 else graph
    pixels = pixelize_all(g.nodes, config.pixelizer)
    frames = []
    for k, sub in enumerate(normalize_sequence(time_slice(g, config.delta_n))):
        seed = derive_seed(config.seed, graph.root, k)
        coords = embed_subgraph(sub, replace(config.walk, seed=seed), replace(config.sg, seed=seed),
                                replace(config.tsne, seed=seed))
        layout = diffuse(grid_for(coords, len(sub), config.raster.gamma), seed)
        frames.append(render_frame(layout, pixels, config.raster))
    return assemble_video(frames, config.video_length, graph.root, graph.label)


def _imageize_safe(args):
    graph, config = args
    try:
        return imageize_graph(graph, config), None
    except Exception as exc:  # per-graph containment
        return None, f"{type(exc).__name__}: {exc}"


@dataclass
class PipelineResult:
    videos: list
    failures: list = field(default_factory=list)  # (root, message)


def run_pipeline(config: PipelineConfig, graphs: Sequence[BehaviorGraph], threads: int = 1) -> PipelineResult:
    if not graphs:
        raise PipelineError("no graphs to process")
    jobs = [(g, config) for g in graphs]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_imageize_safe, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        outcomes = [_imageize_safe(j) for j in jobs]
    result = PipelineResult([])
    for g, (video, err) in zip(graphs, outcomes):
        if video is None:
            log.warning("graph %r skipped: %s", g.root, err)
            result.failures.append((g.root, err))
        else:
            result.videos.append(video)
    if not result.videos:
        raise PipelineError(f"all {len(graphs)} graphs failed; first error: {result.failures[0][1]}")
    return result


@dataclass
class TrainedModel:
    params: object
    train_roots: list
    val_roots: list
    test_roots: list
    best_epoch: int = 0
    epochs_run: int = 0


def split_videos(videos: Sequence[UserVideo], config: PipelineConfig):
    """(train, val, test) with stratified splits keyed on the run seed."""
    train_all, test = split(list(videos), config.train_ratio, derive_seed(config.seed, "test-split"))
    train, val = split(train_all, 1.0 - config.val_ratio, derive_seed(config.seed, "val-split"))
    return train, val, test


def train_model(videos: Sequence[UserVideo], config: PipelineConfig) -> TrainedModel:
    train, val, test = split_videos(videos, config)
    res = fit([(v, v.label) for v in train], [(v, v.label) for v in val], config.train, config.model)
    return TrainedModel(res.params, [v.root for v in train], [v.root for v in val], [v.root for v in test],
                        res.best_epoch, res.epochs_run)


def evaluate_model(params, videos: Sequence[UserVideo], sbp: float = 1.0) -> EvalReport:
    scores = predict_scores(params, list(videos))
    return evaluate_scores(scores, [v.label for v in videos], sbp)


def train_and_evaluate(videos: Sequence[UserVideo], config: PipelineConfig):
    model = train_model(videos, config)
    test_set = set(model.test_roots)
    test = [v for v in videos if v.root in test_set]
    return model, evaluate_model(model.params, test, config.sbp)


def sweep_sbp(config: PipelineConfig, graphs: Sequence[BehaviorGraph], fractions: Sequence[float],
              threads: int = 1) -> list[EvalReport]:
    """One train/evaluate round per fraction with shared seeds; no de-duplication."""
    reports = []
    for f in fractions:
        if not 0 < f <= 1:
            raise ValueError(f"fraction {f} outside (0, 1]")
        cfg = replace(config, sbp=float(f))
        videos = run_pipeline(cfg, graphs, threads).videos
        _, report = train_and_evaluate(videos, cfg)
        log.info("sbp %.2f: acc %.3f auc %.3f", f, report.accuracy, report.auc)
        reports.append(report)
    return reports


# ---------------------------------------------------------------------------
# on-disk stage outputs


def _video_name(k: int, root) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in str(root))
    return f"{k:05d}_{safe}.uvsd"


def save_videos(videos: Sequence[UserVideo], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for k, v in enumerate(videos):
        name = _video_name(k, v.root)
        write_video(v, out / name)
        index.append({"file": name, "root": v.root, "label": v.label})
    (out / "index.json").write_text(json.dumps(index, indent=1) + "\n", encoding="utf-8")
    return out


def load_videos(video_dir) -> list[UserVideo]:
    d = Path(video_dir)
    index = json.loads((d / "index.json").read_text(encoding="utf-8"))
    return [read_video(d / row["file"], row["root"], row["label"]) for row in index]


def save_model(model: TrainedModel, path) -> None:
    write_checkpoint(model.params, path)
    meta = {"train": model.train_roots, "val": model.val_roots, "test": model.test_roots,
            "best_epoch": model.best_epoch, "epochs_run": model.epochs_run}
    Path(str(path) + ".split.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")


def load_model(path):
    params = read_checkpoint(path)
    meta_path = Path(str(path) + ".split.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else None
    return params, meta


def frame_mean_features(videos: Sequence[UserVideo]) -> np.ndarray:
    """Per-frame channel means, flattened: the input of the logistic baseline."""
    return np.stack([v.frames.mean(axis=(1, 2)).ravel() for v in videos])
