"""Command-line interface.

Every subcommand accepts --config <path>, --seed <u64> and --out <dir>;
--seed overrides the config seed when given.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..degrade import make_pair
from ..diffusion import build_schedule
from ..metrics import MotionField
from ..network import Denoiser, load_checkpoint
from . import ablate, analyze, config as cfgmod, dataset as ds, evaluate, io
from .train import TrainingDiverged, load_clips, run_training, to_signal


def _load_config(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.degrade.seed = args.seed
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output directory")


def cmd_make_data(args) -> int:
    cfg = _load_config(args)
    manifest = ds.make_toy_dataset(
        args.out, n_clips=args.clips, frames=args.frames, size=args.size, seed=cfg.seed
    )
    print(f"wrote {len(manifest['clips'])} clips to {args.out}")
    return 0


def cmd_degrade(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = ds.list_tensor_files(args.input)
    manifest = {"seed": cfg.degrade.seed, "clips": []}
    for i, path in enumerate(files):
        hr = io.read_tensor(path)
        lr, _, params = make_pair(hr, cfg.degrade, clip_index=i)
        io.write_tensor(out_dir / path.name, lr)
        manifest["clips"].append({"file": path.name, **params})
    (out_dir / "degrade_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"degraded {len(files)} clips into {out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    try:
        result = run_training(cfg, args.out, seed=cfg.seed)
    except TrainingDiverged as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"trained {len(result.rows)} steps; checkpoint at {result.checkpoint_path}")
    return 0


def _load_model(cfg, checkpoint) -> Denoiser:
    model = Denoiser(cfg.model, seed=cfg.seed)
    model.load_param_vector(load_checkpoint(checkpoint, cfg.model))
    return model


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = _load_model(cfg, args.checkpoint)
    sched = build_schedule(cfg.schedule.t_max, cfg.schedule.kind)
    files = ds.list_tensor_files(args.input)
    for i, path in enumerate(files):
        lr = io.read_tensor(path)
        t, c, h, w = lr.shape
        hr_shape = (t, c, h * cfg.degrade.factor, w * cfg.degrade.factor)
        pred = evaluate.restore_clip(model, lr, hr_shape, sched, cfg.sample_steps, cfg.seed + i)
        io.write_tensor(out_dir / path.name, pred)
    print(f"restored {len(files)} clips into {out_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    pred_files = ds.list_tensor_files(args.pred)
    motions = ds.load_motion_manifest(args.manifest) if args.manifest else {}
    names, rows = [], []
    for path in pred_files:
        ref_path = Path(args.ref) / path.name
        pred = io.read_tensor(path)
        ref = io.read_tensor(ref_path)
        motion = MotionField(np.asarray(motions[path.name])) if path.name in motions else None
        names.append(path.name)
        rows.append(evaluate.score_clip(pred, ref, motion))
    aggregate = evaluate.write_eval_outputs(args.out, names, rows)
    print(json.dumps(aggregate, indent=2))
    return 0


def cmd_analyze_freq(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = _load_model(cfg, args.checkpoint)
    sched = build_schedule(cfg.schedule.t_max, cfg.schedule.kind)
    num_steps = args.steps or cfg.sample_steps

    data_cfg = cfgmod.ExperimentConfig(
        seed=cfg.seed, degrade=cfg.degrade, data=cfgmod.DataConfig(hr_dir=args.input)
    )
    clips = load_clips(data_cfg)
    if args.clips:
        clips.names = clips.names[: args.clips]
        clips.hr = clips.hr[: args.clips]
        clips.lr = clips.lr[: args.clips]
    h, w = clips.hr[0].shape[-2:]
    from ..network import condition_from_lr

    pairs = [
        (hr, to_signal(condition_from_lr(lr, h, w))) for hr, lr in zip(clips.hr, clips.lr)
    ]
    rows = analyze.mean_band_trajectory(
        lambda state, t, cond: model.predict(state, t, cond),
        pairs,
        sched,
        num_steps,
        cfg.loss.rho,
        cfg.seed,
    )
    analyze.write_freq_csv(out_dir / "band_psnr.csv", rows)
    print(f"wrote {len(rows)} trajectory rows for {len(pairs)} clips")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    rows = ablate.run_ablation(cfg, args.axis, args.out, seed=cfg.seed)
    print(f"ablation over {args.axis}: {len(rows)} rows")
    return 0


def cmd_export_frames(args) -> int:
    video = io.read_tensor(args.input)
    if video.shape[1] != 3:
        print(f"error: export-frames needs 3 channels, got {video.shape[1]}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    for i, frame in enumerate(video):
        io.write_ppm(out_dir / f"{stem}_{i:04d}.ppm", frame)
    print(f"exported {video.shape[0]} frames to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsrdiff")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-data", help="generate the bundled toy dataset")
    _add_common(p)
    p.add_argument("--clips", type=int, default=16)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=32)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("degrade", help="synthesize LR pairs from HR clips")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True, help="directory of HR .vtr files")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("train", help="train the denoiser")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="restore LR clips with a checkpoint")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True, help="directory of LR .vtr files")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="score restored clips against references")
    _add_common(p)
    p.add_argument("--pred", required=True, help="directory of restored .vtr files")
    p.add_argument("--ref", required=True, help="directory of reference .vtr files")
    p.add_argument("--manifest", help="motion manifest for warping error")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze-freq", help="band-PSNR curves along the sampler")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True, help="directory of HR .vtr files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--clips", type=int, default=None, help="limit number of clips")
    p.set_defaults(func=cmd_analyze_freq)

    p = sub.add_parser("ablate", help="train/evaluate one ablation axis")
    _add_common(p)
    p.add_argument("--axis", required=True, choices=ablate.AXES)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-frames", help="dump a tensor file as PPM frames")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True, help="a .vtr file")
    p.set_defaults(func=cmd_export_frames)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
