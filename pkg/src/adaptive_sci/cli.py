"""Command-line entry point: ``adaptive-sci <command> [options]``.

Exit codes: 0 on success, 1 on invalid input or configuration, 2 on I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
import zipfile
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import Config, ConfigError, load_config
from .detect import BoundingBox, average_precision, detect_measurements, write_detections
from .fixtures import two_regime_env
from .reconstruct import gap_tv, psnr
from .rl_agent import QTable, greedy_policy, train
from .runner import compare, emit_csv, q_value_bound, run_adaptive, run_fixed
from .sci_forward import Measurement, generate_masks, load_masks, save_masks, sense
from .video_io import FrameSequence, generate_scene, load_frames, retime, save_frames

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if args.seed is not None:
        cfg.run = dataclasses.replace(cfg.run, seed=args.seed)
        cfg.train = dataclasses.replace(cfg.train, seed=args.seed)
        if cfg.scene is not None:
            cfg.scene = dataclasses.replace(cfg.scene, seed=args.seed)
    return cfg


def _path(given: Optional[str], fallback: Optional[str], what: str) -> str:
    p = given or fallback
    if not p:
        raise ConfigError(f"no {what} given (use the option or the [paths] section)")
    return p


def _video(args, cfg: Config):
    seq, track = load_frames(_path(args.video, cfg.paths.video, "video manifest"))
    return seq, track


def _masks(args, cfg: Config):
    return load_masks(_path(args.masks, cfg.paths.masks, "mask file"))


def _need_track(track):
    if track is None:
        raise ConfigError("the video manifest has no ground-truth track")
    return track


# --- measurement files ------------------------------------------------------

def save_measurements(path, ms: List[Measurement], mask_seed: int, video: str) -> None:
    np.savez(path, y=np.stack([m.y for m in ms]), B=np.array([m.B for m in ms]),
             sigma=np.array([m.sigma for m in ms]), offset=np.array([m.frame_offset for m in ms]),
             mask_seed=np.array(mask_seed), video=np.array(video))


def load_measurements(path):
    with np.load(path) as z:
        ms = [Measurement(z["y"][i], int(z["B"][i]), float(z["sigma"][i]), int(z["offset"][i]))
              for i in range(len(z["B"]))]
        return ms, int(z["mask_seed"]), str(z["video"])


# --- commands ---------------------------------------------------------------

def cmd_generate(args, cfg: Config) -> None:
    if cfg.scene is None:
        raise ConfigError("generate needs a [scene] section in the config")
    seq, track = generate_scene(cfg.scene)
    if cfg.retime is not None:
        seq, track = retime(seq, track, cfg.retime)
    manifest = save_frames(seq, args.out, track)
    print(f"wrote {len(seq)} frames to {manifest}")


def cmd_masks(args, cfg: Config) -> None:
    if args.size:
        w, h = args.size
    elif cfg.scene is not None:
        w, h = cfg.scene.width, cfg.scene.height
    else:
        raise ConfigError("mask size unknown: pass --size W H or give a [scene] section")
    bmax = args.bmax or cfg.run.states.bmax
    c = generate_masks(w, h, bmax, cfg.run.seed, cfg.run.states.values)
    save_masks(c, args.out)
    print(f"wrote {bmax} masks of {w}x{h} to {args.out}")


def cmd_sense(args, cfg: Config) -> None:
    seq, _ = _video(args, cfg)
    c = _masks(args, cfg)
    B = args.B
    cfg.run.states.index(B)
    sigma = cfg.run.sigma if args.sigma is None else args.sigma
    rng = np.random.default_rng(cfg.run.seed)
    ms = [sense(seq.window(t, B), c, B, sigma, rng, frame_offset=t)
          for t in range(0, len(seq) - B + 1, B)]
    if not ms:
        raise ConfigError(f"video of {len(seq)} frames is shorter than B={B}")
    save_measurements(args.out, ms, c.seed, seq.name)
    print(f"wrote {len(ms)} measurements at B={B} to {args.out}")


def cmd_reconstruct(args, cfg: Config) -> None:
    ms, _, name = load_measurements(args.measurements)
    c = _masks(args, cfg)
    cubes = [gap_tv(m, c, cfg.run.reconstruction) for m in ms]
    frames = np.concatenate([np.moveaxis(x, -1, 0) for x in cubes])
    out = FrameSequence(frames, name=f"{name}_recon")
    save_frames(out, args.out)
    if args.video or cfg.paths.video:
        seq, _ = _video(args, cfg)
        truth = [seq.window(m.frame_offset, m.B) for m in ms]
        report = psnr(np.concatenate(cubes, -1), np.concatenate(truth, -1))
        print(f"PSNR {report.psnr_db:.2f} dB over {frames.shape[0]} frames")
    print(f"wrote {frames.shape[0]} reconstructed frames to {args.out}")


def cmd_detect(args, cfg: Config) -> None:
    ms, _, _ = load_measurements(args.measurements)
    c = _masks(args, cfg)
    dets = detect_measurements(ms, c, cfg.run.detector)
    write_detections(args.out, dets)
    print(f"wrote {sum(map(len, dets))} detections to {args.out}")
    if args.video or cfg.paths.video:
        _, track = _video(args, cfg)
        track = _need_track(track)
        gts = [[BoundingBox(*h) for h in track.hulls(m.frame_offset, m.B)] for m in ms]
        print(f"AP {average_precision(dets, gts, cfg.run.detector.iou_thresh):.4f}")


def cmd_train(args, cfg: Config) -> None:
    env = two_regime_env(cfg.train.seed, cfg.run)
    q, returns = train(env, cfg.train, q_bound=q_value_bound(cfg.run, cfg.train.discount))
    q.save(_path(args.out, cfg.paths.qtable, "Q-table output"))
    with open(args.curve, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["episode", "return"])
        for i, r in enumerate(returns):
            w.writerow([i, f"{r:.6g}"])
    print(f"trained {cfg.train.episodes} episodes, {len(q)} observations in the table")


def cmd_run(args, cfg: Config) -> None:
    seq, track = _video(args, cfg)
    c = _masks(args, cfg)
    q = QTable.load(_path(args.qtable, cfg.paths.qtable, "Q-table"))
    log = run_adaptive(seq, _need_track(track), c, greedy_policy(q), cfg.run)
    emit_csv(log, args.out, include_timing=args.timing)
    s = log.summary()
    print(f"{len(log.steps)} steps, mean B {s['mean_B']:.3f}, "
          f"mean detection rate {s['mean_detection_rate']:.4f}")


def _baselines(seq, track, c, cfg: Config):
    return [run_fixed(seq, track, c, B, cfg.run) for B in cfg.run.states.values]


def cmd_baseline(args, cfg: Config) -> None:
    seq, track = _video(args, cfg)
    c = _masks(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for log in _baselines(seq, _need_track(track), c, cfg):
        emit_csv(log, out / f"{log.label}.csv", include_timing=args.timing)
        print(f"{log.label}: mean detection rate {log.summary()['mean_detection_rate']:.4f}")


def cmd_compare(args, cfg: Config) -> None:
    seq, track = _video(args, cfg)
    track = _need_track(track)
    c = _masks(args, cfg)
    q = QTable.load(_path(args.qtable, cfg.paths.qtable, "Q-table"))
    adaptive = run_adaptive(seq, track, c, greedy_policy(q), cfg.run)
    fixed = _baselines(seq, track, c, cfg)
    report = compare(adaptive, fixed)
    emit_csv(report, args.out)
    if args.log_dir:
        d = Path(args.log_dir)
        d.mkdir(parents=True, exist_ok=True)
        for log in [adaptive, *fixed]:
            emit_csv(log, d / f"{log.label}.csv")
    dp, dr = report.nearest_delta
    print(f"nearest fixed B={report.nearest_B}: delta PSNR {dp:+.3f} dB, delta detection rate {dr:+.4f}")


class _Parser(argparse.ArgumentParser):
    # bad arguments are a validation error, not argparse's default status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adaptive-sci", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="overrides every seed in the config")
    p.add_argument("--config", help="plain-text config file")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("generate", cmd_generate, "render the configured scene to frames and a track")
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("masks", cmd_masks, "generate a binary mask stack")
    sp.add_argument("--size", type=int, nargs=2, metavar=("W", "H"))
    sp.add_argument("--bmax", type=int)
    sp.add_argument("--out", required=True)

    sp = add("sense", cmd_sense, "compress consecutive windows of B frames")
    sp.add_argument("--video")
    sp.add_argument("--masks")
    sp.add_argument("-B", "--B", type=int, required=True)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--out", required=True, help="measurement file (.npz)")

    sp = add("reconstruct", cmd_reconstruct, "GAP-TV reconstruction of a measurement file")
    sp.add_argument("--measurements", required=True)
    sp.add_argument("--masks")
    sp.add_argument("--video", help="ground truth; prints PSNR when given")
    sp.add_argument("--out", required=True, help="output frame directory")

    sp = add("detect", cmd_detect, "blob detection on normalized measurements")
    sp.add_argument("--measurements", required=True)
    sp.add_argument("--masks")
    sp.add_argument("--video", help="manifest with a track; prints AP when given")
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "Q-learning on the two-regime synthetic environment")
    sp.add_argument("--out", help="Q-table file")
    sp.add_argument("--curve", required=True, help="per-episode return CSV")

    for name, fn, help_ in (("run", cmd_run, "adaptive capture with a trained Q-table"),
                            ("baseline", cmd_baseline, "fixed-B capture at every state"),
                            ("compare", cmd_compare, "adaptive run against every fixed baseline")):
        sp = add(name, fn, help_)
        sp.add_argument("--video")
        sp.add_argument("--masks")
        if name != "baseline":
            sp.add_argument("--qtable")
        sp.add_argument("--out", required=True)
        if name != "compare":
            sp.add_argument("--timing", action="store_true", help="include wall-clock column")
        else:
            sp.add_argument("--log-dir", help="also write every per-step log here")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        args.fn(args, cfg)
    except (OSError, zipfile.BadZipFile) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
