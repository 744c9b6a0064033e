"""Training utilities: balanced sampling, frame selection, augmentation."""

import numpy as np
import pytest
from scipy.stats import chisquare

from fakeamp.attention import EncoderConfig
from fakeamp.classifier import ClassifierConfig
from fakeamp.toydata import ToyDatasetSpec, generate_toy_dataset
from fakeamp.training import (
    BalancedSampler,
    TrainConfig,
    augment_clip,
    sample_frames,
    train_classifier,
)


class TestBalancedSampler:
    def test_oversampling_one_to_four(self, rng):
        # real:fake = 1:4 in the pool; draws must be ~1:1
        labels = np.array([0] * 20 + [1] * 80)
        sampler = BalancedSampler(labels, np.random.default_rng(0))
        draws = sampler.draw(1000)
        n_real = int((labels[draws] == 0).sum())
        n_fake = 1000 - n_real
        stat, p = chisquare([n_real, n_fake])
        assert p > 0.001  # consistent with a fair 1:1 split

    def test_batch_always_has_both_classes(self):
        labels = np.array([0] * 2 + [1] * 50)
        sampler = BalancedSampler(labels, np.random.default_rng(1))
        for _ in range(50):
            batch = sampler.draw_batch(4)
            drawn = labels[batch]
            assert (drawn == 0).any() and (drawn == 1).any()

    def test_no_real_videos_error(self):
        with pytest.raises(ValueError, match="real"):
            BalancedSampler(np.array([1, 1, 1]), np.random.default_rng(0))

    def test_no_fake_videos_error(self):
        with pytest.raises(ValueError, match="fake"):
            BalancedSampler(np.array([0, 0]), np.random.default_rng(0))


class TestFrameSampling:
    def test_min_of_32_and_t(self, rng):
        idx = sample_frames(100, 32, rng)
        assert len(idx) == 32
        assert len(set(idx.tolist())) == 32
        assert list(idx) == sorted(idx)

    def test_short_clip_uses_all(self, rng):
        idx = sample_frames(8, 32, rng)
        assert sorted(idx.tolist()) == list(range(8))


class TestAugmentation:
    def test_flip_consistent_for_clip_and_maps(self, rng):
        clip = rng.random((2, 3, 8, 8)).astype(np.float32)
        maps = rng.random((2, 8, 8)).astype(np.float32)
        maps /= maps.sum(axis=(1, 2), keepdims=True)
        cfg = TrainConfig(flip_prob=1.0, crop=None)
        out_clip, out_maps = augment_clip(clip, maps, cfg, np.random.default_rng(0))
        assert np.array_equal(out_clip, clip[:, :, :, ::-1])
        assert np.array_equal(out_maps, maps[:, :, ::-1])

    def test_crop_renormalizes_maps(self, rng):
        clip = rng.random((2, 3, 16, 16)).astype(np.float32)
        maps = rng.random((2, 16, 16)).astype(np.float32)
        maps /= maps.sum(axis=(1, 2), keepdims=True)
        cfg = TrainConfig(flip_prob=0.0, crop=8)
        out_clip, out_maps = augment_clip(clip, maps, cfg, np.random.default_rng(0))
        assert out_clip.shape == (2, 3, 8, 8)
        assert np.abs(out_maps.sum(axis=(1, 2)) - 1).max() < 1e-5


@pytest.mark.slow
class TestTrainingSmoke:
    def test_two_epoch_run_produces_log(self):
        train_ds = generate_toy_dataset(ToyDatasetSpec(n_real=6, n_fake=6, t=4,
                                                       h=32, w=32, seed=0))
        val_ds = generate_toy_dataset(ToyDatasetSpec(n_real=3, n_fake=3, t=4,
                                                     h=32, w=32, seed=1))
        cfg = TrainConfig(epochs=2, base_lr=1e-3, batch_videos=4, frames_per_video=2,
                          videos_per_epoch=8, seed=0)
        res = train_classifier(train_ds, val_ds,
                               ClassifierConfig(depth=1, stage_channels=[8],
                                                attention_mode="full"),
                               EncoderConfig([4, 8]), cfg)
        assert len(res.log) == 2
        for row in res.log:
            assert row.train_loss > 0
            assert 0 <= row.val_acc <= 1
            assert 0 <= row.val_auc <= 1
            assert row.lr > 0

    def test_log_csv_columns(self, tmp_path):
        train_ds = generate_toy_dataset(ToyDatasetSpec(n_real=4, n_fake=4, t=4,
                                                       h=32, w=32, seed=2))
        cfg = TrainConfig(epochs=1, batch_videos=4, frames_per_video=2,
                          videos_per_epoch=4, seed=0)
        res = train_classifier(train_ds, train_ds,
                               ClassifierConfig(depth=1, stage_channels=[8],
                                                attention_mode="unmodulated"),
                               EncoderConfig([4, 8]), cfg)
        res.write_log_csv(tmp_path / "log.csv")
        header = (tmp_path / "log.csv").read_text().splitlines()[0]
        assert header == "epoch,train_loss,val_acc,val_auc,lr"
