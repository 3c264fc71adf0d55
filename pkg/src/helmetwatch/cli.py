"""Command-line front end.

Exit codes: 0 success, 2 input error (missing or unreadable files), 3 model
format error, 4 validation error (config or model field out of range).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np

from . import __version__
from .centrist import extract_features, resample_patch, WINDOW_H, WINDOW_W
from .config import ConfigError, PipelineConfig, dump_config, load_config
from .imagery import DimensionError, frame_name, list_frames, read_frame, read_gray, to_gray, write_frame

log = logging.getLogger("helmetwatch")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FORMAT = 3
EXIT_VALIDATION = 4


class InputError(Exception):
    """Missing or unreadable input; maps to exit code 2."""


# -- helpers -----------------------------------------------------------------

def _config(args) -> PipelineConfig:
    if getattr(args, "config", None) is None:
        return PipelineConfig()
    if not Path(args.config).is_file():
        raise InputError(f"config file not found: {args.config}")
    return load_config(args.config)


def _frame_paths(directory) -> List[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"frame directory not found: {d}")
    paths = list_frames(d)
    if not paths:
        raise InputError(f"no frames (.png/.pgm/.ppm) in {d}")
    return paths


def _frames(paths: List[Path]) -> Iterator[Tuple[int, Path, np.ndarray]]:
    """``(frame_id, path, frame)`` with 1-based ids in file order."""
    for i, p in enumerate(paths, start=1):
        try:
            frame = read_frame(p)
        except Exception as exc:  # Pillow raises several unrelated types
            raise InputError(f"cannot read frame {p}: {exc}") from None
        yield i, p, frame


def _read_images(directory, what: str) -> List[np.ndarray]:
    paths = _frame_paths(directory)
    out = []
    for p in paths:
        try:
            out.append(read_gray(p))
        except Exception as exc:
            raise InputError(f"cannot read {what} image {p}: {exc}") from None
    return out


def _load_model(path):
    from .classifier.modelio import load_model

    if not Path(path).is_file():
        raise InputError(f"model file not found: {path}")
    return load_model(path)


def _mkdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- subcommands -------------------------------------------------------------

def cmd_bgseg(args) -> int:
    from .evalharness.tables import region_writer
    from .motion import extract_regions, init_model

    cfg = _config(args)
    paths = _frame_paths(args.frames)
    out = _mkdir(args.out)
    mask_dir = _mkdir(out / "masks")
    model = None
    with open(out / "regions.csv", "w", newline="", encoding="utf-8") as fh:
        write = region_writer(fh)
        for fid, _, frame in _frames(paths):
            gray = to_gray(frame) if frame.ndim == 3 else frame
            if model is None:
                model = init_model(gray, cfg.vibe)
                mask = np.zeros(gray.shape, dtype=bool)
            else:
                mask = model.segment(gray)
                model.update(gray, mask)
            for region in extract_regions(mask, cfg.motion.min_area, cfg.motion.morph_radius):
                write(fid, region)
            write_frame(mask_dir / frame_name(fid, ".pgm"), mask.astype(np.uint8) * 255)
    log.info("segmented %d frames into %s", len(paths), out)
    return EXIT_OK


def cmd_train(args) -> int:
    from .classifier.bootstrap import bootstrap_train
    from .classifier.modelio import save_model

    cfg = _config(args)
    pos_imgs = _read_images(args.positives, "positive")
    neg_imgs = _read_images(args.negatives, "negative")
    patches = []
    for img in pos_imgs:
        if img.shape != (WINDOW_H, WINDOW_W):
            img = resample_patch(img, (0, 0, img.shape[1], img.shape[0]))
        patches.append(img)
    pos = extract_features(patches)

    def progress(stats):
        log.info("round %d: negatives=%d added=%d/%d train_acc=%.4f kkt=%.2e",
                 stats.round, stats.negatives, stats.added, stats.false_positives,
                 stats.train_accuracy, stats.kkt_residual)

    result = bootstrap_train(pos, neg_imgs, cfg.train, progress=progress)
    save_model(result.model, args.out)
    if args.history:
        hist = {
            "rounds": [vars(s) for s in result.history],
            "hik_kkt_residual": result.hik_kkt_residual,
            "support_vectors": int(len(result.model.hik.alphas)),
        }
        Path(args.history).write_text(json.dumps(hist, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %s (%d support vectors)", args.out, len(result.model.hik.alphas))
    return EXIT_OK


def _process(args, detect_helmets: bool) -> int:
    from .detector import full_frame_plan, nms, scan
    from .evalharness.tables import detection_writer
    from .pipeline import FrameResult, HelmetPipeline

    cfg = _config(args)
    model = _load_model(args.model)
    paths = _frame_paths(args.frames)
    out = _mkdir(args.out)
    ann_dir = _mkdir(out / "annotated") if args.annotate else None
    pipe = HelmetPipeline(model, cfg, detect_helmets=detect_helmets)
    name = "detections.csv"
    n_det = 0
    with open(out / name, "w", newline="", encoding="utf-8") as fh:
        write = detection_writer(fh, with_verdicts=detect_helmets)
        for fid, _, frame in _frames(paths):
            if getattr(args, "full_frame", False):
                gray = to_gray(frame) if frame.ndim == 3 else frame
                dets = nms(scan(gray, pipe.model, full_frame_plan(gray.shape, cfg.scan)),
                           cfg.cascade.nms_iou)
                result = FrameResult(fid, detections=dets)
            else:
                result = pipe.process(frame, fid)
            for i, det in enumerate(result.detections):
                write(fid, det, result.verdicts[i] if detect_helmets else None)
            n_det += len(result.detections)
            if ann_dir is not None:
                write_frame(ann_dir / frame_name(fid), pipe.annotate(frame, result))
    log.info("%d detections over %d frames -> %s", n_det, len(paths), out / name)
    return EXIT_OK


def cmd_detect(args) -> int:
    return _process(args, detect_helmets=False)


def cmd_run(args) -> int:
    return _process(args, detect_helmets=True)


def cmd_eval(args) -> int:
    from .evalharness.metrics import evaluate
    from .evalharness.tables import TableError, read_detections, read_truth, write_points, write_svg_curve

    cfg = _config(args)
    for p in (args.detections, args.truth):
        if not Path(p).is_file():
            raise InputError(f"file not found: {p}")
    try:
        dets = read_detections(args.detections)
        truth = read_truth(args.truth)
    except TableError as exc:
        raise InputError(str(exc)) from None
    iou_min = args.iou if args.iou is not None else cfg.eval.iou
    report = evaluate(dets, truth, iou_min)
    out = _mkdir(args.out)
    # undefined ratios (no detections, no truth) become null, not bare NaN
    summary = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
               for k, v in report.summary().items()}
    summary["iou"] = iou_min
    (out / "metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for tag, roc, pr in (("pedestrian", report.pedestrian_roc, report.pedestrian_pr),
                         ("helmet", report.helmet_roc, report.helmet_pr)):
        if roc is not None:
            write_points(out / f"roc_{tag}.csv", ("fpr", "tpr"), roc.points())
            write_svg_curve(out / f"roc_{tag}.svg", roc.points(), "false positive rate",
                            "true positive rate", f"{tag} ROC (AUC {roc.auc:.4f})", diagonal=True)
        if pr is not None:
            write_points(out / f"pr_{tag}.csv", ("recall", "precision"), pr.points())
            write_svg_curve(out / f"pr_{tag}.svg", pr.points(), "recall", "precision", f"{tag} PR")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .evalharness import synthetic as syn
    from .evalharness.tables import write_truth

    out = _mkdir(args.out)
    if args.kind == "scene":
        cfg = syn.default_test_scene(seed=args.seed, n_frames=args.frames,
                                     width=args.width, height=args.height)
        frames, truth = syn.generate_synthetic(cfg)
        fdir = _mkdir(out / "frames")
        for t, frame in enumerate(frames, start=1):
            write_frame(fdir / frame_name(t), frame)
        write_truth(out / "truth.csv", truth)
        log.info("wrote %d frames and truth.csv to %s", len(frames), out)
    else:
        pdir, ndir = _mkdir(out / "positives"), _mkdir(out / "negatives")
        for i, patch in enumerate(syn.positive_patches(args.positives, args.seed), start=1):
            write_frame(pdir / f"pos_{i:05d}.png", patch)
        for i, img in enumerate(syn.negative_images(args.negatives, args.seed + 1), start=1):
            write_frame(ndir / f"neg_{i:05d}.png", img)
        log.info("wrote %d positives and %d negatives to %s", args.positives, args.negatives, out)
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(dump_config(_config(args)))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="helmetwatch",
        description="Motion-gated pedestrian detection and safety-helmet colour checks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False):
        p.add_argument("--config", help="INI config file (missing keys use defaults)")
        if model:
            p.add_argument("--model", required=True, help="model file written by 'train'")

    p = sub.add_parser("bgseg", help="background subtraction: masks (PGM) and regions.csv")
    p.add_argument("--frames", required=True, help="directory of frames, processed in numeric order")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_bgseg)

    p = sub.add_parser("train", help="bootstrap-train the linear + HIK cascade")
    p.add_argument("--positives", required=True, help="directory of pedestrian patches (any size, resampled to 108x36)")
    p.add_argument("--negatives", required=True, help="directory of pedestrian-free images")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--history", help="optional JSON file with per-round statistics")
    common(p)
    p.set_defaults(func=cmd_train)

    for name, func, text in (("detect", cmd_detect, "pedestrian detection only"),
                             ("run", cmd_run, "full pipeline with helmet verdicts")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--frames", required=True, help="directory of frames, processed in numeric order")
        p.add_argument("--out", required=True, help="output directory (detections.csv, annotated/)")
        p.add_argument("--annotate", action="store_true", help="also write annotated PNG frames")
        if name == "detect":
            p.add_argument("--full-frame", action="store_true",
                           help="scan every window instead of motion surroundings")
        common(p, model=True)
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--detections", required=True, help="detections.csv from 'run' or 'detect'")
    p.add_argument("--truth", required=True, help="ground-truth CSV: frame_id,x,y,w,h,worn,color")
    p.add_argument("--out", required=True, help="output directory for metrics and curves")
    p.add_argument("--iou", type=float, help="match threshold (default from config, 0.5)")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic scene or training corpus")
    p.add_argument("kind", choices=("scene", "corpus"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--frames", type=int, default=300, help="scene length")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--positives", type=int, default=200, help="corpus positive patches")
    p.add_argument("--negatives", type=int, default=50, help="corpus negative images")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("config", help="print the effective configuration")
    common(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    from .classifier.modelio import FormatError, ModelValidationError

    try:
        return args.func(args)
    except (InputError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConfigError, ModelValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
