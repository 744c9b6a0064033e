"""End-to-end ablation and robustness experiments driven by a key=value config."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .attention import EncoderConfig
from .classifier import ATTENTION_MODES, ClassifierConfig
from .metrics import accuracy, video_auc
from .perturb import PERTURBATION_KINDS, PerturbationSpec, perturb
from .toydata import ToyDatasetSpec, generate_toy_dataset
from .training import TrainConfig, evaluate_pipeline, train_classifier


@dataclass
class ExperimentConfig:
    modes: tuple[str, ...] = ("full", "unmodulated", "fixed_gaussian")
    seeds: tuple[int, ...] = (0, 1, 2)
    # dataset
    train_real: int = 200
    train_fake: int = 200
    val_real: int = 40
    val_fake: int = 40
    frames: int = 8
    height: int = 64
    width: int = 64
    data_seed: int = 0
    # model
    encoder_channels: tuple[int, ...] = (8, 16, 32)
    clf_channels: tuple[int, ...] = (16, 32)
    depth: int = 2
    # training
    epochs: int = 20
    lr: float = 3e-3
    batch_videos: int = 4
    frames_per_video: int = 4
    videos_per_epoch: int = 112
    early_stop_window: int = 10
    crop: int = 0  # 0 disables cropping
    # robustness
    perturbations: bool = True
    out_dir: str = "reports/experiment"


def _parse_value(raw: str, kind):
    if kind == bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if kind == int:
        return int(raw)
    if kind == float:
        return float(raw)
    if kind == str:
        return raw.strip()
    # tuple fields: comma-separated ints or mode names
    items = [x.strip() for x in raw.split(",") if x.strip()]
    if all(x.lstrip("+-").isdigit() for x in items):
        return tuple(int(x) for x in items)
    return tuple(items)


def load_experiment_config(path) -> ExperimentConfig:
    """Line-based key=value file; '#' starts a comment."""
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    kwargs = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ValueError(f"{path}:{ln}: unknown key {key!r}; valid: {sorted(known)}")
        default = getattr(ExperimentConfig(), key)
        kwargs[key] = _parse_value(raw, type(default))
    cfg = ExperimentConfig(**kwargs)
    for m in cfg.modes:
        if m not in ATTENTION_MODES:
            raise ValueError(f"invalid mode {m!r}; valid: {ATTENTION_MODES}")
    return cfg


@dataclass
class ModeResult:
    mode: str
    seed: int
    val_auc: float
    val_acc: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    mode_results: list[ModeResult] = field(default_factory=list)
    perturbation_rows: dict[str, float] = field(default_factory=dict)  # name -> mean AUC

    def mode_summary(self) -> dict[str, tuple[float, float]]:
        """mode -> (mean AUC, std AUC) across seeds."""
        out = {}
        for mode in self.config.modes:
            aucs = [r.val_auc for r in self.mode_results if r.mode == mode]
            out[mode] = (float(np.mean(aucs)), float(np.std(aucs)))
        return out


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    """Train/evaluate each attention mode over the seeds; optionally run robustness."""
    report = ExperimentReport(config=cfg)
    say = progress or (lambda msg: None)

    train_ds = generate_toy_dataset(ToyDatasetSpec(
        n_real=cfg.train_real, n_fake=cfg.train_fake, t=cfg.frames,
        h=cfg.height, w=cfg.width, seed=cfg.data_seed))
    val_ds = generate_toy_dataset(ToyDatasetSpec(
        n_real=cfg.val_real, n_fake=cfg.val_fake, t=cfg.frames,
        h=cfg.height, w=cfg.width, seed=cfg.data_seed + 1))

    best_full = None
    for mode in cfg.modes:
        for seed in cfg.seeds:
            say(f"training mode={mode} seed={seed}")
            clf_cfg = ClassifierConfig(depth=cfg.depth,
                                       stage_channels=list(cfg.clf_channels),
                                       attention_mode=mode)
            enc_cfg = EncoderConfig(list(cfg.encoder_channels))
            tcfg = TrainConfig(
                epochs=cfg.epochs, base_lr=cfg.lr, batch_videos=cfg.batch_videos,
                frames_per_video=cfg.frames_per_video,
                videos_per_epoch=cfg.videos_per_epoch or None,
                early_stop_window=cfg.early_stop_window,
                crop=cfg.crop or None, seed=seed,
            )
            result = train_classifier(train_ds, val_ds, clf_cfg, enc_cfg, tcfg)
            report.mode_results.append(ModeResult(mode, seed, result.best_val_auc,
                                                  result.best_val_acc))
            say(f"  -> val AUC {result.best_val_auc:.3f} acc {result.best_val_acc:.3f}")
            if mode == "full" and (best_full is None
                                   or result.best_val_auc > best_full[0]):
                best_full = (result.best_val_auc, result.pipeline)

    if cfg.perturbations and best_full is not None:
        say("running perturbation robustness on the best full-mode model")
        pipeline = best_full[1]
        clean = evaluate_pipeline(pipeline, val_ds)
        report.perturbation_rows["clean"] = video_auc(clean)
        for kind in PERTURBATION_KINDS:
            aucs = []
            for severity in range(1, 6):
                spec = PerturbationSpec(kind, severity)
                scored = []
                rng = np.random.default_rng(10_000 + severity)
                for start in range(0, len(val_ds.videos), 8):
                    chunk = val_ds.videos[start:start + 8]
                    frames = np.concatenate([
                        perturb(v.clip, spec, rng) for v in chunk])
                    scores = pipeline.frame_scores(frames)
                    off = 0
                    for v in chunk:
                        t = v.clip.shape[0]
                        scored.append((float(scores[off:off + t].mean()), v.label))
                        off += t
                aucs.append(video_auc(scored))
            report.perturbation_rows[kind] = float(np.mean(aucs))
            say(f"  {kind}: mean AUC over severities {report.perturbation_rows[kind]:.3f}")

    _write_report(report)
    return report


def _write_report(report: ExperimentReport):
    out = Path(report.config.out_dir)
    rows = [["kind", "mode", "seed", "value"]]
    for r in report.mode_results:
        rows.append(["val_auc", r.mode, str(r.seed), f"{r.val_auc:.4f}"])
        rows.append(["val_acc", r.mode, str(r.seed), f"{r.val_acc:.4f}"])
    for name, auc in report.perturbation_rows.items():
        rows.append(["perturbed_auc", name, "-", f"{auc:.4f}"])
    buf = "\n".join(",".join(r) for r in rows) + "\n"
    _atomic_write(out / "results.csv", buf)

    lines = ["mode summary (mean +/- std AUC over seeds)"]
    for mode, (mean, std) in report.mode_summary().items():
        lines.append(f"  {mode:16s} {mean:.3f} +/- {std:.3f}")
    if report.perturbation_rows:
        lines.append("perturbation robustness (mean AUC across severities)")
        for name, auc in report.perturbation_rows.items():
            lines.append(f"  {name:16s} {auc:.3f}")
    _atomic_write(out / "summary.txt", "\n".join(lines) + "\n")
