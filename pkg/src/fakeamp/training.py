"""Joint training of the detector pipeline on toy (or any array-based) datasets."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .attention import attention_supervision_loss
from .autodiff import functional as F
from .autodiff.optim import RAdamLookahead
from .autodiff.tensor import Tensor, sigmoid
from .classifier import DetectorPipeline, ClassifierConfig
from .attention import EncoderConfig
from .metrics import accuracy, video_auc
from .toydata import ToyDataset


@dataclass
class TrainConfig:
    epochs: int = 30
    base_lr: float = 1e-3
    batch_videos: int = 8
    frames_per_video: int = 32
    videos_per_epoch: Optional[int] = None  # None = full pass
    early_stop_window: int = 10
    cosine_half_period: int = 100
    flip_prob: float = 0.5
    crop: Optional[int] = None  # e.g. 48 on 64x64 clips; None disables
    attention_loss_weight: float = 1.0
    seed: int = 0


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_acc: float
    val_auc: float
    lr: float


@dataclass
class TrainResult:
    pipeline: DetectorPipeline
    log: list[EpochLog] = field(default_factory=list)
    best_val_acc: float = 0.0
    best_val_auc: float = 0.0

    def write_log_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_acc", "val_auc", "lr"])
            for row in self.log:
                w.writerow([row.epoch, f"{row.train_loss:.6f}", f"{row.val_acc:.4f}",
                            f"{row.val_auc:.4f}", f"{row.lr:.6g}"])


class BalancedSampler:
    """Draw videos with equal class probability (oversampling the rarer class)."""

    def __init__(self, labels: np.ndarray, rng: np.random.Generator):
        labels = np.asarray(labels)
        self.real_idx = np.where(labels == 0)[0]
        self.fake_idx = np.where(labels == 1)[0]
        if self.real_idx.size == 0:
            raise ValueError("dataset has no real videos; oversampling is undefined")
        if self.fake_idx.size == 0:
            raise ValueError("dataset has no fake videos; oversampling is undefined")
        self.rng = rng

    def draw(self, n: int) -> np.ndarray:
        labels = self.rng.integers(0, 2, size=n)
        pool = (self.real_idx, self.fake_idx)
        return np.asarray([self.rng.choice(pool[l]) for l in labels])

    def draw_batch(self, size: int) -> np.ndarray:
        """Exactly class-balanced batch (odd slot random); guarantees a fake per batch."""
        half = size // 2
        picks = [self.rng.choice(self.fake_idx, size=max(half, 1)),
                 self.rng.choice(self.real_idx, size=half)]
        if size % 2 and size > 1:
            extra = self.real_idx if self.rng.random() < 0.5 else self.fake_idx
            picks.append(self.rng.choice(extra, size=1))
        batch = np.concatenate(picks)[:size] if size > 1 else picks[0]
        self.rng.shuffle(batch)
        return batch


def sample_frames(t: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """min(k, t) distinct indices in temporal order."""
    k = min(k, t)
    return np.sort(rng.choice(t, size=k, replace=False))


def augment_clip(clip: np.ndarray, maps: Optional[np.ndarray], cfg: TrainConfig,
                 rng: np.random.Generator) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Horizontal flip (p=0.5) and random crop, applied consistently to clip and maps."""
    if cfg.flip_prob > 0 and rng.random() < cfg.flip_prob:
        clip = clip[:, :, :, ::-1].copy()
        maps = maps[:, :, ::-1].copy() if maps is not None else None
    if cfg.crop is not None:
        h, w = clip.shape[2], clip.shape[3]
        if cfg.crop < h or cfg.crop < w:
            oy = rng.integers(0, h - cfg.crop + 1)
            ox = rng.integers(0, w - cfg.crop + 1)
            clip = clip[:, :, oy:oy + cfg.crop, ox:ox + cfg.crop]
            if maps is not None:
                maps = maps[:, oy:oy + cfg.crop, ox:ox + cfg.crop]
                sums = maps.sum(axis=(1, 2), keepdims=True)
                area = cfg.crop * cfg.crop
                maps = np.where(sums > 0, maps / np.maximum(sums, 1e-12),
                                1.0 / area).astype(np.float32)
    return clip, maps


def evaluate_pipeline(pipeline: DetectorPipeline, dataset: ToyDataset,
                      chunk_videos: int = 8) -> list[tuple[float, int]]:
    """Video scores over a dataset; frames of several videos share one forward pass."""
    scored = []
    videos = dataset.videos
    for start in range(0, len(videos), chunk_videos):
        chunk = videos[start:start + chunk_videos]
        frames = np.concatenate([v.clip for v in chunk])
        scores = pipeline.frame_scores(frames)
        offset = 0
        for v in chunk:
            t = v.clip.shape[0]
            scored.append((float(scores[offset:offset + t].mean()), v.label))
            offset += t
    return scored


def train_classifier(train_ds: ToyDataset, val_ds: ToyDataset,
                     clf_cfg: ClassifierConfig, enc_cfg: EncoderConfig,
                     cfg: TrainConfig) -> TrainResult:
    """Two-in-one training: classification BCE plus heatmap supervision (full mode).

    The classifier is modulated by the attention module's own predictions;
    ground-truth maps enter only through the supervision loss on fake videos.
    Early stopping restores the best validation-accuracy snapshot.
    """
    rng = np.random.default_rng(cfg.seed)
    pipeline = DetectorPipeline(clf_cfg, enc_cfg, seed=int(rng.integers(2 ** 31)))
    sampler = BalancedSampler(train_ds.labels, rng)
    opt = RAdamLookahead(pipeline.store, lr=cfg.base_lr,
                         cosine_half_period=cfg.cosine_half_period)

    n_epoch_videos = cfg.videos_per_epoch or len(train_ds.videos)
    result = TrainResult(pipeline=pipeline)
    best_acc = -1.0
    best_params = None
    stale = 0

    steps_per_epoch = max(1, n_epoch_videos // cfg.batch_videos)
    for epoch in range(cfg.epochs):
        opt.set_epoch(epoch)
        total_loss, n_batches = 0.0, 0
        for _ in range(steps_per_epoch):
            batch = sampler.draw_batch(cfg.batch_videos)
            clips, labels, gt_list = [], [], []
            for vi in batch:
                video = train_ds.videos[vi]
                idx = sample_frames(video.clip.shape[0], cfg.frames_per_video, rng)
                gt_maps = video.gt_map.maps[idx] if video.gt_map is not None else None
                clip, gt_maps = augment_clip(video.clip[idx], gt_maps, cfg, rng)
                clips.append(clip)
                labels.append(video.label)
                gt_list.append(gt_maps)
            loss = _batch_loss(pipeline, clips, labels, gt_list, cfg)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total_loss += loss.item()
            n_batches += 1

        scored = evaluate_pipeline(pipeline, val_ds)
        val_acc = accuracy(scored, pipeline.clf_cfg.threshold)
        val_auc = video_auc(scored)
        result.log.append(EpochLog(epoch, total_loss / max(n_batches, 1),
                                   val_acc, val_auc, opt.lr))

        if val_acc > best_acc + 1e-9:
            best_acc = val_acc
            best_params = pipeline.store.state_arrays()
            result.best_val_acc = val_acc
            result.best_val_auc = val_auc
            stale = 0
        else:
            stale += 1
        if stale >= cfg.early_stop_window:
            break

    if best_params is not None:
        pipeline.store.load_arrays(best_params)
        scored = evaluate_pipeline(pipeline, val_ds)
        result.best_val_acc = accuracy(scored, pipeline.clf_cfg.threshold)
        result.best_val_auc = video_auc(scored)
    return result


@dataclass
class AttentionTrainResult:
    net: "ArtifactAttentionNet"
    epoch_losses: list[float] = field(default_factory=list)
    val_cc: list[float] = field(default_factory=list)


def train_attention_module(train_ds: ToyDataset, val_ds: Optional[ToyDataset],
                           enc_cfg: EncoderConfig, cfg: TrainConfig
                           ) -> AttentionTrainResult:
    """Supervise heatmap prediction alone (no classifier) on fake videos' maps."""
    from .annotation import heatmap_cc
    from .attention import ArtifactAttentionNet
    from .autodiff.params import ParamStore

    rng = np.random.default_rng(cfg.seed)
    store = ParamStore()
    net = ArtifactAttentionNet(store, enc_cfg, np.random.default_rng(cfg.seed))
    opt = RAdamLookahead(store, lr=cfg.base_lr, cosine_half_period=cfg.cosine_half_period)

    fakes = [v for v in train_ds.videos if v.gt_map is not None]
    if not fakes:
        raise ValueError("attention training needs videos with ground-truth maps")
    result = AttentionTrainResult(net=net)
    best = -np.inf
    best_params = None
    stale = 0
    for epoch in range(cfg.epochs):
        opt.set_epoch(epoch)
        order = rng.permutation(len(fakes))
        if cfg.videos_per_epoch:
            order = order[:cfg.videos_per_epoch]
        total, count = 0.0, 0
        for start in range(0, len(order), cfg.batch_videos):
            clips, gts = [], []
            for vi in order[start:start + cfg.batch_videos]:
                video = fakes[vi]
                idx = sample_frames(video.clip.shape[0], cfg.frames_per_video, rng)
                clip, gt_maps = augment_clip(video.clip[idx], video.gt_map.maps[idx],
                                             cfg, rng)
                clips.append(clip)
                gts.append(gt_maps)
            frames = Tensor(np.concatenate(clips))
            pred = net.decode_t(net.encode_t(frames, True), True)
            loss = attention_supervision_loss(pred, np.concatenate(gts))
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item()
            count += 1
        result.epoch_losses.append(total / max(count, 1))

        if val_ds is not None:
            ccs = []
            for video in val_ds.videos:
                if video.gt_map is None:
                    continue
                pred = net.predict_heatmaps(video.clip).maps
                ccs.extend(heatmap_cc(p, g) for p, g in zip(pred, video.gt_map.maps))
            score = float(np.mean(ccs))
            result.val_cc.append(score)
            if score > best + 1e-9:
                best, best_params, stale = score, store.state_arrays(), 0
            else:
                stale += 1
            if stale >= cfg.early_stop_window:
                break
    if best_params is not None:
        store.load_arrays(best_params)
    return result


def _batch_loss(pipeline: DetectorPipeline, clips: list[np.ndarray], labels: list[int],
                gt_list: list[Optional[np.ndarray]], cfg: TrainConfig) -> Tensor:
    """Frame-level BCE over all videos' sampled frames, plus heatmap supervision.

    Frames of every video in the batch run through one forward pass; the
    supervision term covers only frames whose video has ground-truth maps.
    """
    frames = Tensor(np.concatenate(clips))
    frame_labels = np.concatenate([
        np.full(c.shape[0], float(lab), dtype=np.float32)
        for c, lab in zip(clips, labels)
    ])
    supervision = None
    if pipeline.clf_cfg.attention_mode == "full":
        codes = pipeline.attention.encode_t(frames, training=True)
        pred_maps = pipeline.attention.decode_t(codes, training=True)
        sup_idx, sup_maps = [], []
        offset = 0
        for c, gt in zip(clips, gt_list):
            if gt is not None:
                sup_idx.extend(range(offset, offset + c.shape[0]))
                sup_maps.append(gt)
            offset += c.shape[0]
        if sup_idx:
            supervision = attention_supervision_loss(
                pred_maps.take(np.asarray(sup_idx)), np.concatenate(sup_maps))
        maps_for_blocks = pred_maps.data.copy()  # modulation uses detached predictions
    else:
        maps_for_blocks = None
    logits = pipeline.classifier.forward_logits(frames, maps_for_blocks, training=True)
    loss = F.bce_loss(sigmoid(logits), Tensor(frame_labels))
    if supervision is not None:
        loss = loss + cfg.attention_loss_weight * supervision
    return loss
