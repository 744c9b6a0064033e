"""Command-line surface tying the pipeline together.

Commands: aggregate, synth, train-attn, train-clf, train-mag, detect,
caricaturize, perturb, eval-auc, run-experiment. Every command takes --seed
where randomness is involved; exit code 0 on success, nonzero with a message
on stderr otherwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

CLI_MODE_NAMES = {
    "full": "full",
    "no-attn": "no_attention",
    "no-mod": "unmodulated",
    "fixed-gauss": "fixed_gaussian",
}


def _cmd_aggregate(args):
    from .annotation import aggregate_annotations, load_annotation_json
    from .clipio import save_heatmaps

    records, dims = [], None
    for path in args.records:
        rec, rec_dims = load_annotation_json(path)
        if dims is None:
            dims = rec_dims
        elif rec_dims != dims:
            raise ValueError(f"{path}: dims {rec_dims} differ from {dims}")
        records.append(rec)
    if dims is None:
        raise ValueError("no annotation records given")
    sigma = tuple(float(x) for x in args.sigma.split(","))
    if len(sigma) != 3:
        raise ValueError("--sigma must be sx,sy,st")
    amap = aggregate_annotations(records, dims, kernel_sigma=sigma)
    save_heatmaps(amap.maps, args.out)
    print(f"wrote {args.out} ({dims[0]} frames of {dims[1]}x{dims[2]})")


def _cmd_synth(args):
    from .toydata import ToyDatasetSpec, generate_toy_dataset, save_dataset

    spec = ToyDatasetSpec(n_real=args.n_real, n_fake=args.n_fake, t=args.frames,
                          h=args.height, w=args.width, seed=args.seed)
    ds = generate_toy_dataset(spec)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds.videos)} clips to {args.out}")


def _common_train_args(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="dataset dir from `synth`")
    p.add_argument("--val", help="validation dataset dir")
    p.add_argument("--epochs", type=int, default=14)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--batch-videos", type=int, default=4)
    p.add_argument("--frames-per-video", type=int, default=4)
    p.add_argument("--videos-per-epoch", type=int, default=0)
    p.add_argument("--crop", type=int, default=0)
    p.add_argument("--encoder-channels", default="8,16,32")
    p.add_argument("--seed", type=int, default=0)


def _train_cfg(args):
    from .training import TrainConfig

    return TrainConfig(epochs=args.epochs, base_lr=args.lr,
                       batch_videos=args.batch_videos,
                       frames_per_video=args.frames_per_video,
                       videos_per_epoch=args.videos_per_epoch or None,
                       crop=args.crop or None, seed=args.seed)


def _cmd_train_attn(args):
    from .attention import EncoderConfig
    from .persist import save_attention_net
    from .toydata import load_dataset
    from .training import train_attention_module

    train_ds = load_dataset(args.data)
    val_ds = load_dataset(args.val) if args.val else None
    enc = EncoderConfig([int(x) for x in args.encoder_channels.split(",")])
    result = train_attention_module(train_ds, val_ds, enc, _train_cfg(args))
    save_attention_net(result.net, args.out)
    last_cc = result.val_cc[-1] if result.val_cc else float("nan")
    print(f"wrote {args.out} (final val CC {last_cc:.3f})")


def _cmd_train_clf(args):
    from .attention import EncoderConfig
    from .classifier import ClassifierConfig
    from .persist import save_pipeline
    from .toydata import load_dataset
    from .training import train_classifier

    train_ds = load_dataset(args.data)
    val_ds = load_dataset(args.val) if args.val else train_ds
    clf = ClassifierConfig(depth=args.depth,
                           stage_channels=[int(x) for x in args.clf_channels.split(",")],
                           attention_mode=CLI_MODE_NAMES[args.mode])
    enc = EncoderConfig([int(x) for x in args.encoder_channels.split(",")])
    result = train_classifier(train_ds, val_ds, clf, enc, _train_cfg(args))
    save_pipeline(result.pipeline, args.out)
    if args.log:
        result.write_log_csv(args.log)
    print(f"wrote {args.out} (best val acc {result.best_val_acc:.3f}, "
          f"AUC {result.best_val_auc:.3f})")


def _cmd_train_mag(args):
    from .caricature import (Magnifier, MagnifierConfig, MagnifierTrainConfig,
                             copy_input_baseline_l1, evaluate_magnifier,
                             synth_triplet_generate, train_magnifier)
    from .autodiff.params import ParamStore
    from .persist import load_attention_net, load_pipeline, save_magnifier

    try:
        encoder = load_attention_net(args.encoder)
    except ValueError:
        encoder = load_pipeline(args.encoder).attention
        if encoder is None:
            raise ValueError(f"{args.encoder}: pipeline has no attention module")
    encoder.store.freeze()
    hw = (args.height, args.width)
    triplets = synth_triplet_generate(args.seed, args.n_triplets, hw=hw)
    held_out = synth_triplet_generate(args.seed + 1, max(args.n_triplets // 5, 8), hw=hw)
    mag_cfg = MagnifierConfig(code_channels=encoder.cfg.code_channels,
                              upsample_stages=len(encoder.cfg.stage_channels))
    mag = Magnifier(ParamStore(), mag_cfg, np.random.default_rng(args.seed))
    train_magnifier(triplets, encoder, mag,
                    MagnifierTrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed))
    save_magnifier(mag, args.out)
    l1 = evaluate_magnifier(held_out, encoder, mag)
    base = copy_input_baseline_l1(held_out)
    print(f"wrote {args.out} (held-out L1 {l1:.4f}, copy-input baseline {base:.4f})")


def _cmd_detect(args):
    from .classifier import classify_video
    from .clipio import load_any_clip, load_heatmaps
    from .persist import load_pipeline

    pipeline = load_pipeline(args.model)
    clip = load_any_clip(args.clip)
    maps = load_heatmaps(args.maps) if args.maps else None
    result = classify_video(pipeline, clip, maps)
    print(json.dumps({
        "label": result.label,
        "video_score": result.video_score,
        "frame_scores": [round(float(s), 6) for s in result.frame_scores],
    }, indent=1))


def _cmd_caricaturize(args):
    from .caricature import caricaturize_clip
    from .clipio import load_any_clip, load_heatmaps, save_clip, save_png_dir
    from .persist import load_attention_net, load_magnifier, load_pipeline

    try:
        encoder = load_attention_net(args.encoder)
    except ValueError:
        pipeline = load_pipeline(args.encoder)
        encoder = pipeline.attention
        if encoder is None:
            raise ValueError(f"{args.encoder}: pipeline has no attention module")
    magnifier = load_magnifier(args.magnifier)
    clip = load_any_clip(args.clip)
    if args.maps == "predict":
        maps = encoder.predict_heatmaps(clip).maps
    elif args.maps:
        maps = load_heatmaps(args.maps)
    else:
        maps = None
    out = caricaturize_clip(clip, maps, args.alpha, encoder, magnifier)
    if args.png:
        save_png_dir(out, args.out)
    else:
        save_clip(out, args.out)
    print(f"wrote caricature (alpha={args.alpha}) to {args.out}")


def _cmd_perturb(args):
    from .clipio import load_any_clip, save_clip
    from .perturb import PerturbationSpec, perturb

    clip = load_any_clip(args.clip)
    spec = PerturbationSpec(args.kind, args.severity)
    out = perturb(clip, spec, np.random.default_rng(args.seed))
    save_clip(out, args.out)
    print(f"wrote {args.kind}@{args.severity} perturbed clip to {args.out}")


def _cmd_eval_auc(args):
    from .metrics import video_auc

    scored = []
    with open(args.scores) as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#") or row[0] == "score":
                continue
            scored.append((float(row[0]), int(row[1])))
    print(f"{video_auc(scored):.6f}")


def _cmd_run_experiment(args):
    from .experiment import load_experiment_config, run_experiment

    cfg = load_experiment_config(args.config)
    report = run_experiment(cfg, progress=lambda m: print(m, flush=True))
    print(f"report written to {cfg.out_dir}")
    for mode, (mean, std) in report.mode_summary().items():
        print(f"  {mode}: {mean:.3f} +/- {std:.3f}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fakeamp",
                                 description="artifact attention + caricature pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="annotation JSONs -> attention map container")
    p.add_argument("records", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", default="20,20,6")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("synth", help="generate the toy detection dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-real", type=int, default=100)
    p.add_argument("--n-fake", type=int, default=100)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train-attn", help="train the artifact attention module alone")
    _common_train_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_attn)

    p = sub.add_parser("train-clf", help="train the detector pipeline")
    _common_train_args(p)
    p.add_argument("--mode", choices=sorted(CLI_MODE_NAMES), default="full")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--clf-channels", default="16,32")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="training log CSV path")
    p.set_defaults(func=_cmd_train_clf)

    p = sub.add_parser("train-mag", help="train the caricature magnifier")
    p.add_argument("--encoder", required=True,
                   help="attention-net or pipeline checkpoint (will be frozen)")
    p.add_argument("--out", required=True)
    p.add_argument("--n-triplets", type=int, default=256)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train_mag)

    p = sub.add_parser("detect", help="classify a clip")
    p.add_argument("--clip", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--maps", help="optional heatmap container (default: predict)")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("caricaturize", help="amplify artifacts in a clip")
    p.add_argument("--clip", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--magnifier", required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--maps", default="predict",
                   help="'predict', a heatmap container path, or '' for uniform")
    p.add_argument("--out", required=True)
    p.add_argument("--png", action="store_true", help="write numbered PNGs")
    p.set_defaults(func=_cmd_caricaturize)

    p = sub.add_parser("perturb", help="apply a photometric perturbation")
    p.add_argument("--clip", required=True)
    p.add_argument("--kind", choices=("contrast", "gaussian_noise", "gaussian_blur",
                                      "pixelation"), required=True)
    p.add_argument("--severity", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("eval-auc", help="video-level AUC of a score,label CSV")
    p.add_argument("--scores", required=True)
    p.set_defaults(func=_cmd_eval_auc)

    p = sub.add_parser("run-experiment", help="ablation + robustness report")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run_experiment)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # surface a clean message, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
