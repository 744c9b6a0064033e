"""Artifact amplification: distort latent frame differences and reconstruct.

The frame distortion block computes M(e_next - e_i), gates it with the
artifact attention map and scales it by alpha. Training anchors the distorted
code at e_i so alpha matches the synthetic triplets' magnification factor;
generation adds the scaled delta on top of e_next so alpha=0 and A=0 are
exact identities (the clip reconstructs unmodified).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .attention import ArtifactAttentionNet
from .autodiff import functional as F
from .autodiff.params import ParamStore
from .autodiff.tensor import Tensor, mish, no_grad
from .layers import Conv, PlainResBlock, resize_bilinear, scale_to_mean_one


@dataclass
class MagnifierConfig:
    code_channels: int = 128
    upsample_stages: int = 4  # x2 each; must invert the encoder downsampling
    alpha_default: float = 2.0
    eq3_literal: bool = False  # printed-form difference (e_i - e_next), motion-reversing


class Magnifier:
    """Manipulator residual block on code differences plus the caricature constructor."""

    def __init__(self, store: ParamStore, cfg: MagnifierConfig | None = None,
                 rng: np.random.Generator | None = None, prefix: str = "mag"):
        self.cfg = cfg or MagnifierConfig()
        self.store = store
        rng = rng or np.random.default_rng(0)
        c = self.cfg.code_channels
        # near-identity init: the final conv of the residual branch starts at zero
        self.manipulator = PlainResBlock(store, f"{prefix}.manip", c, rng,
                                         zero_init_last=True)
        chans = [c]
        for _ in range(self.cfg.upsample_stages):
            chans.append(max(chans[-1] // 2, 16))
        self.blocks = []
        for i in range(self.cfg.upsample_stages):
            self.blocks.append((
                Conv(store, f"{prefix}.dec{i}a", chans[i], chans[i], 3, 1, 1, rng),
                Conv(store, f"{prefix}.dec{i}b", chans[i], chans[i + 1], 3, 1, 1, rng),
            ))
        self.out_conv1 = Conv(store, f"{prefix}.out1", chans[-1], chans[-1], 3, 1, 1, rng)
        # mid-range bias keeps the clamped output off the [0,1] rails at init
        self.out_conv = Conv(store, f"{prefix}.out", chans[-1], 3, k=3, stride=1,
                             pad=1, rng=rng, bias_init=0.5)

    # latent ops ---------------------------------------------------------
    def distortion_delta_t(self, e_i: Tensor, e_next: Tensor,
                           a_feat: Optional[np.ndarray]) -> Tensor:
        """M(e_next - e_i) gated elementwise by the attention map (None means all-ones)."""
        diff = (e_i - e_next) if self.cfg.eq3_literal else (e_next - e_i)
        delta = self.manipulator(diff)
        if a_feat is not None:
            a = np.asarray(a_feat, dtype=np.float32)
            if a.ndim == 2:
                a = a[None]
            delta = delta * Tensor(a[:, None, :, :])
        return delta

    def frame_distortion_t(self, e_i: Tensor, e_next: Tensor,
                           a_feat: Optional[np.ndarray], alpha: float) -> Tensor:
        """Distorted code anchored at e_i: e_i + alpha * (M(e_next - e_i) . A)."""
        return e_i + float(alpha) * self.distortion_delta_t(e_i, e_next, a_feat)

    def construct_t(self, codes: Tensor) -> Tensor:
        """Decode codes to frames: 3x3 convs + x2 nearest upsampling per block, clamp to [0,1]."""
        x = codes
        for conv_a, conv_b in self.blocks:
            x = mish(conv_b(mish(conv_a(x))))
            x = F.nearest_upsample(x, 2)
        x = mish(self.out_conv1(x))
        return self.out_conv(x).clip(0.0, 1.0)


def frame_distortion(magnifier: Magnifier, e_i: np.ndarray, e_next: np.ndarray,
                     a_feat: Optional[np.ndarray], alpha: float) -> np.ndarray:
    """Data-level frame distortion over (C, h, w) or (N, C, h, w) code slices."""
    e_i = np.asarray(e_i, dtype=np.float32)
    e_next = np.asarray(e_next, dtype=np.float32)
    if e_i.shape != e_next.shape:
        raise ValueError(f"code shapes differ: {e_i.shape} vs {e_next.shape}")
    single = e_i.ndim == 3
    if single:
        e_i, e_next = e_i[None], e_next[None]
        if a_feat is not None and np.asarray(a_feat).ndim == 2:
            a_feat = np.asarray(a_feat)[None]
    with no_grad():
        out = magnifier.frame_distortion_t(Tensor(e_i), Tensor(e_next), a_feat, alpha).data
    return out[0] if single else out


def construct_caricature(magnifier: Magnifier, codes: np.ndarray) -> np.ndarray:
    """Decode a (T, C, h, w) code volume into a (T, 3, H, W) clip in [0, 1]."""
    with no_grad():
        return magnifier.construct_t(Tensor(np.asarray(codes, dtype=np.float32))).data


def caricaturize_clip(clip: np.ndarray, maps: Optional[np.ndarray], alpha: float,
                      encoder: ArtifactAttentionNet, magnifier: Magnifier) -> np.ndarray:
    """Amplify artifacts: e_hat_{i+1} = e_{i+1} + alpha * (M(e_{i+1}-e_i) . A_i).

    The first frame passes through undistorted. With alpha=0 or an all-zero
    map the latent path is exactly the original code sequence. ``maps`` is a
    (T, H, W) stack (None disables gating, i.e. uniform magnification).
    """
    clip = np.asarray(clip, dtype=np.float32)
    t = clip.shape[0]
    if t < 2:
        raise ValueError(f"caricature needs at least 2 frames, got {t}")
    _check_compatible(encoder, magnifier)
    with no_grad():
        codes = encoder.encode_t(Tensor(clip), training=False).data
        hw = codes.shape[2], codes.shape[3]
        if maps is not None:
            feat = scale_to_mean_one(resize_bilinear(maps, hw)).astype(np.float32)
            a_prev = feat[:-1]  # pair (i, i+1) is gated by frame i's map
        else:
            a_prev = None
        delta = magnifier.distortion_delta_t(Tensor(codes[:-1]), Tensor(codes[1:]),
                                             a_prev).data
        distorted = np.concatenate([codes[:1], codes[1:] + np.float32(alpha) * delta])
        return magnifier.construct_t(Tensor(distorted)).data


def _check_compatible(encoder: ArtifactAttentionNet, magnifier: Magnifier):
    enc_factor = encoder.cfg.downsample_factor
    mag_factor = 2 ** magnifier.cfg.upsample_stages
    if enc_factor != mag_factor:
        raise ValueError(
            f"constructor upsampling x{mag_factor} does not invert encoder "
            f"downsampling x{enc_factor}"
        )
    if magnifier.cfg.code_channels != encoder.cfg.code_channels:
        raise ValueError(
            f"magnifier built for {magnifier.cfg.code_channels} code channels, "
            f"encoder produces {encoder.cfg.code_channels}"
        )


# synthetic magnification triplets -----------------------------------------

@dataclass
class Triplet:
    frame_a: np.ndarray
    frame_b: np.ndarray
    magnified_b: np.ndarray
    alpha: float


@dataclass
class SpriteScene:
    """A textured background with one textured sprite at a movable subpixel position."""

    background: np.ndarray  # (3, H, W)
    sprite: np.ndarray      # (3, sh, sw)
    mask: np.ndarray        # (sh, sw) soft alpha in [0, 1]
    base_pos: tuple[float, float]  # (y, x) of sprite top-left at rest


def _smooth_noise(rng: np.random.Generator, shape_hw: tuple[int, int],
                  scale: int = 8) -> np.ndarray:
    """Low-frequency texture in [0, 1]: coarse noise upsampled bilinearly."""
    h, w = shape_hw
    coarse = rng.random((max(2, h // scale) + 1, max(2, w // scale) + 1))
    fine = resize_bilinear(coarse, (h, w))
    lo, hi = fine.min(), fine.max()
    return ((fine - lo) / (hi - lo + 1e-9))


def make_sprite_scene(rng: np.random.Generator, hw: tuple[int, int] = (64, 64),
                      sprite_size: int | None = None, margin: float = 10.0) -> SpriteScene:
    h, w = hw
    if sprite_size is None:
        sprite_size = min(16, min(h, w) // 3)
    if sprite_size < 3:
        raise ValueError(f"frame {h}x{w} too small for a sprite")
    margin = min(margin, (min(h, w) - sprite_size) / 2.0 - 0.5)
    if margin < 0:
        raise ValueError(f"frame {h}x{w} cannot hold a {sprite_size}px sprite")
    bg = np.stack([0.25 + 0.5 * _smooth_noise(rng, hw) for _ in range(3)])
    sp = np.stack([0.05 + 0.9 * _smooth_noise(rng, (sprite_size, sprite_size), scale=4)
                   for _ in range(3)])
    ys, xs = np.mgrid[0:sprite_size, 0:sprite_size]
    r = (sprite_size - 1) / 2.0
    d = np.sqrt((ys - r) ** 2 + (xs - r) ** 2)
    mask = np.clip((r - d) / 2.0 + 0.5, 0.0, 1.0)  # soft disk edge
    pos_y = rng.uniform(margin, h - sprite_size - margin)
    pos_x = rng.uniform(margin, w - sprite_size - margin)
    return SpriteScene(bg.astype(np.float32), sp.astype(np.float32),
                       mask.astype(np.float32), (pos_y, pos_x))


def render_sprite_frame(scene: SpriteScene, offset: tuple[float, float]) -> np.ndarray:
    """Composite the sprite at base_pos + offset with bilinear subpixel placement."""
    h, w = scene.background.shape[1:]
    sh, sw = scene.mask.shape
    py = scene.base_pos[0] + offset[0]
    px = scene.base_pos[1] + offset[1]
    iy, ix = int(np.floor(py)), int(np.floor(px))
    fy, fx = py - iy, px - ix
    # bilinear splat of sprite and mask onto an (sh+1, sw+1) patch
    wts = ((1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx)
    patch = np.zeros((3, sh + 1, sw + 1), dtype=np.float64)
    mpatch = np.zeros((sh + 1, sw + 1), dtype=np.float64)
    masked = scene.sprite * scene.mask[None]
    for (dy, dx), wt in zip(((0, 0), (0, 1), (1, 0), (1, 1)), wts):
        patch[:, dy:dy + sh, dx:dx + sw] += wt * masked
        mpatch[dy:dy + sh, dx:dx + sw] += wt * scene.mask
    out = scene.background.astype(np.float64).copy()
    y0, x0 = max(iy, 0), max(ix, 0)
    y1, x1 = min(iy + sh + 1, h), min(ix + sw + 1, w)
    if y0 < y1 and x0 < x1:
        sy0, sx0 = y0 - iy, x0 - ix
        sy1, sx1 = sy0 + (y1 - y0), sx0 + (x1 - x0)
        m = mpatch[sy0:sy1, sx0:sx1]
        out[:, y0:y1, x0:x1] = out[:, y0:y1, x0:x1] * (1 - m) + patch[:, sy0:sy1, sx0:sx1]
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def synth_triplet_generate(seed: int, n: int, alpha_range=(1.0, 3.0),
                           hw: tuple[int, int] = (64, 64)) -> list[Triplet]:
    """Deterministic triplets: sprite at p, p+delta and p+alpha*delta (|delta| <= 2 px)."""
    if n < 1:
        raise ValueError("need n >= 1 triplets")
    rng = np.random.default_rng(seed)
    a_lo, a_hi = alpha_range
    margin = 2.0 * max(abs(a_lo), abs(a_hi)) + 4.0
    triplets = []
    for _ in range(n):
        sprite = max(5, int(min(hw) * rng.uniform(0.42, 0.52)))
        scene = make_sprite_scene(rng, hw, sprite_size=sprite, margin=margin)
        angle = rng.uniform(0, 2 * np.pi)
        step = rng.uniform(1.5, 2.0)
        delta = (step * np.sin(angle), step * np.cos(angle))
        alpha = float(rng.uniform(a_lo, a_hi))
        frame_a = render_sprite_frame(scene, (0.0, 0.0))
        frame_b = render_sprite_frame(scene, delta)
        magnified = render_sprite_frame(scene, (alpha * delta[0], alpha * delta[1]))
        triplets.append(Triplet(frame_a, frame_b, magnified, alpha))
    return triplets


def render_translation_clip(seed: int, t: int = 8, hw: tuple[int, int] = (64, 64),
                            delta: tuple[float, float] = (0.0, 1.0),
                            plain_background: bool = False) -> tuple[np.ndarray, SpriteScene]:
    """Clip whose sprite translates by ``delta`` every frame (for centroid oracles)."""
    rng = np.random.default_rng(seed)
    scene = make_sprite_scene(rng, hw, margin=2.0 + max(abs(delta[0]), abs(delta[1])) * (t + 4))
    if plain_background:
        scene = SpriteScene(np.full_like(scene.background, 0.5), scene.sprite,
                            scene.mask, scene.base_pos)
    frames = [render_sprite_frame(scene, (i * delta[0], i * delta[1])) for i in range(t)]
    return np.stack(frames), scene


def diff_centroid(frame: np.ndarray, background: np.ndarray,
                  threshold: float = 0.0) -> tuple[float, float]:
    """(y, x) centroid of |frame - background| mass; the sprite-position oracle.

    ``threshold`` (fraction of the max difference) suppresses low-level
    reconstruction noise when the frames are network outputs.
    """
    d = np.abs(frame.astype(np.float64) - background.astype(np.float64)).sum(axis=0)
    if threshold > 0:
        d = np.where(d >= threshold * d.max(), d, 0.0)
    total = d.sum()
    if total <= 0:
        raise ValueError("frames are identical; centroid undefined")
    ys, xs = np.mgrid[0:d.shape[0], 0:d.shape[1]]
    return float((ys * d).sum() / total), float((xs * d).sum() / total)


# training -------------------------------------------------------------------

@dataclass
class MagnifierTrainConfig:
    epochs: int = 20
    batch_size: int = 8
    lr: float = 2e-3
    cosine_half_period: int = 100
    early_stop_window: int = 10
    seed: int = 0


@dataclass
class MagnifierTrainLog:
    epoch_losses: list[float] = field(default_factory=list)
    best_so_far: list[float] = field(default_factory=list)


def train_magnifier(triplets: list[Triplet], encoder: ArtifactAttentionNet,
                    magnifier: Magnifier, cfg: MagnifierTrainConfig | None = None,
                    val_triplets: Optional[list[Triplet]] = None) -> MagnifierTrainLog:
    """Fit manipulator+constructor so distorted codes decode to the magnified frame.

    The encoder must be frozen; attention maps stay disabled (all-ones) during
    this phase. Loss is plain L1 against the ground-truth magnified frame.
    """
    from .autodiff.optim import RAdamLookahead

    if any(t.requires_grad for _, t in encoder.store.items()):
        raise ValueError("encoder must be frozen before magnifier training "
                         "(call store.freeze())")
    _check_compatible(encoder, magnifier)
    cfg = cfg or MagnifierTrainConfig()
    rng = np.random.default_rng(cfg.seed)
    opt = RAdamLookahead(magnifier.store, lr=cfg.lr,
                         cosine_half_period=cfg.cosine_half_period)

    with no_grad():
        e_a = encoder.encode_t(Tensor(np.stack([t.frame_a for t in triplets])), False).data
        e_b = encoder.encode_t(Tensor(np.stack([t.frame_b for t in triplets])), False).data
    targets = np.stack([t.magnified_b for t in triplets])
    alphas = np.asarray([t.alpha for t in triplets], dtype=np.float32)

    log = MagnifierTrainLog()
    best = np.inf
    best_params = None
    stale = 0
    for epoch in range(cfg.epochs):
        opt.set_epoch(epoch)
        order = rng.permutation(len(triplets))
        total, count = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            ei = Tensor(e_a[idx])
            en = Tensor(e_b[idx])
            a_col = alphas[idx][:, None, None, None]
            distorted = ei + Tensor(a_col) * magnifier.distortion_delta_t(ei, en, None)
            recon = magnifier.construct_t(distorted)
            loss = F.l1_loss(recon, Tensor(targets[idx]))
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
            count += len(idx)
        epoch_loss = total / count
        if val_triplets is not None:
            epoch_loss = evaluate_magnifier(val_triplets, encoder, magnifier)
        log.epoch_losses.append(epoch_loss)
        if epoch_loss < best - 1e-6:
            best = epoch_loss
            best_params = magnifier.store.state_arrays()
            stale = 0
        else:
            stale += 1
        log.best_so_far.append(best)
        if stale >= cfg.early_stop_window:
            break
    if best_params is not None:
        magnifier.store.load_arrays(best_params)
    return log


def evaluate_magnifier(triplets: list[Triplet], encoder: ArtifactAttentionNet,
                       magnifier: Magnifier) -> float:
    """Mean L1 between reconstructed-magnified output and ground truth."""
    with no_grad():
        e_a = encoder.encode_t(Tensor(np.stack([t.frame_a for t in triplets])), False)
        e_b = encoder.encode_t(Tensor(np.stack([t.frame_b for t in triplets])), False)
        alphas = np.asarray([t.alpha for t in triplets], dtype=np.float32)
        distorted = e_a + Tensor(alphas[:, None, None, None]) * \
            magnifier.distortion_delta_t(e_a, e_b, None)
        recon = magnifier.construct_t(distorted).data
    targets = np.stack([t.magnified_b for t in triplets])
    return float(np.mean(np.abs(recon - targets)))


def copy_input_baseline_l1(triplets: list[Triplet]) -> float:
    """L1 of predicting frame_b unchanged; the bar a trained magnifier must halve."""
    return float(np.mean([np.abs(t.frame_b.astype(np.float64) -
                                 t.magnified_b.astype(np.float64)).mean()
                          for t in triplets]))
