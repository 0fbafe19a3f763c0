"""Command line entry point: synth, imageize, train, eval, sweep, export-frames."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .datasets import generate_synthetic
from .graph import dump_dataset, load_dataset

log = logging.getLogger("uvsd")

CONFIG_SNAPSHOT = "config.json"


class CliError(Exception):
    pass


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _graphs(args, cfg):
    if getattr(args, "input", None):
        return load_dataset(args.input)
    return generate_synthetic(cfg.synth)


def cmd_synth(args):
    cfg = _config(args)
    graphs = generate_synthetic(cfg.synth)
    dump_dataset(graphs, args.out)
    return {"graphs": len(graphs), "spammers": sum(g.label for g in graphs), "out": str(args.out)}


def cmd_imageize(args):
    from .pipeline import run_pipeline, save_videos

    cfg = _config(args)
    graphs = load_dataset(args.input)
    result = run_pipeline(cfg, graphs, args.threads)
    out = save_videos(result.videos, args.out)
    (out / CONFIG_SNAPSHOT).write_text(json.dumps(cfg.to_dict(), indent=1) + "\n", encoding="utf-8")
    return {"videos": len(result.videos), "failures": [[str(r), m] for r, m in result.failures], "out": str(out)}


def cmd_train(args):
    from .pipeline import load_videos, save_model, train_model

    cfg = _config(args)
    videos = load_videos(args.videos)
    model = train_model(videos, cfg)
    save_model(model, args.out)
    return {"best_epoch": model.best_epoch, "epochs_run": model.epochs_run, "out": str(args.out)}


def _snapshot_sbp(video_dir) -> float:
    snap = Path(video_dir) / CONFIG_SNAPSHOT
    if snap.exists():
        return float(json.loads(snap.read_text(encoding="utf-8")).get("sbp", 1.0))
    return 1.0


def cmd_eval(args):
    from .pipeline import evaluate_model, load_model, load_videos

    params, meta = load_model(args.model)
    videos = load_videos(args.videos)
    if meta is not None:
        # score only the held-out users recorded at training time
        test = set(map(str, meta["test"]))
        videos = [v for v in videos if str(v.root) in test]
        if not videos:
            raise CliError("none of the model's test users are present in the video directory")
    report = evaluate_model(params, videos, _snapshot_sbp(args.videos))
    Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    return json.loads(report.to_json())


def cmd_sweep(args):
    from .pipeline import sweep_sbp

    cfg = _config(args)
    try:
        fractions = [float(x) for x in args.fractions.split(",") if x.strip()]
    except ValueError as exc:
        raise CliError(f"bad --fractions value {args.fractions!r}") from exc
    if not fractions:
        raise CliError("--fractions is empty")
    reports = sweep_sbp(cfg, _graphs(args, cfg), fractions, args.threads)
    rows = [json.loads(r.to_json()) for r in reports]
    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
    return {"reports": rows}


def cmd_export_frames(args):
    from .raster import FrameImage, save_frame
    from .video import read_video

    video = read_video(args.video)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for k, frame in enumerate(video.frames):
        name = f"frame_{k:03d}.{args.format}"
        save_frame(FrameImage(frame), out / name)
        names.append(name)
    return {"frames": names, "out": str(out)}


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress):
        # repeated on every subcommand; SUPPRESS keeps values given before the subcommand
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        parser.add_argument("--seed", type=int, default=dflt(None), help="override the run seed")
        parser.add_argument("--threads", type=int, default=dflt(1), help="worker processes for imageization")
        parser.add_argument("--verbose", "-v", action="count", default=dflt(0))

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, True)
    p = argparse.ArgumentParser(prog="uvsd", description="Spammer detection from user behavior videos.")
    global_flags(p, False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a labelled synthetic dataset")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("imageize", parents=[common], help="turn behavior graphs into user videos")
    s.add_argument("--config")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_imageize)

    s = sub.add_parser("train", parents=[common], help="train the video classifier")
    s.add_argument("--config")
    s.add_argument("--videos", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="score a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--videos", required=True)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", parents=[common], help="train/evaluate once per behavior fraction")
    s.add_argument("--config")
    s.add_argument("--fractions", default="0.05,0.1,0.25,0.5,0.75,1.0")
    s.add_argument("--in", dest="input", help="dataset JSONL; synthetic data when omitted")
    s.add_argument("--out", help="write the reports here as a JSON list")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("export-frames", parents=[common], help="write a video's frames as images")
    s.add_argument("--video", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("png", "ppm"), default="png")
    s.set_defaults(func=cmd_export_frames)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        summary = args.func(args)
    except Exception as exc:  # reported as JSON, never a traceback
        log.debug("command failed", exc_info=True)
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, (CliError, ValueError, FileNotFoundError)) else 1
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
