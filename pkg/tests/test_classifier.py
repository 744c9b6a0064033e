"""Classifier contracts: modulated attention vs a dense oracle, modes, consensus."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fakeamp.annotation import center_gaussian_baseline
from fakeamp.attention import EncoderConfig
from fakeamp.autodiff import grad_check
from fakeamp.autodiff.params import ParamStore
from fakeamp.autodiff.tensor import Tensor
from fakeamp.classifier import (
    ATTENTION_MODES,
    AttentionBlockParams,
    ClassifierConfig,
    ClassifierNet,
    DetectorPipeline,
    classify_video,
    modulated_self_attention,
)
from fakeamp.layers import resize_bilinear, scale_to_mean_one


def dense_attention_oracle(x, a_map, wq, wk, wv, gamma):
    """Independent per-position implementation of the modulated attention."""
    c, h, w = x.shape
    n = h * w
    xf = x.reshape(c, n).astype(np.float64)
    q = wq.astype(np.float64) @ xf          # (cbar, n)
    k = wk.astype(np.float64) @ xf
    if a_map is not None:
        k = k * a_map.reshape(1, n).astype(np.float64)
    logits = np.zeros((n, n))
    for qi in range(n):
        for kj in range(n):
            logits[qi, kj] = float(q[:, qi] @ k[:, kj])
    aff = np.zeros_like(logits)
    for qi in range(n):
        row = logits[qi] - logits[qi].max()
        e = np.exp(row)
        aff[qi] = e / e.sum()
    v = wv.astype(np.float64) @ xf          # (c, n)
    y = np.zeros_like(xf)
    for ci in range(c):
        for qi in range(n):
            y[ci, qi] = sum(aff[qi, kj] * v[ci, kj] for kj in range(n))
    return (gamma * y + xf).reshape(c, h, w)


class TestModulatedSelfAttention:
    def test_matches_dense_oracle_20_instances(self, rng):
        for trial in range(20):
            c = int(rng.choice([4, 8]))
            h = w = int(rng.choice([2, 3]))
            store = ParamStore()
            p = AttentionBlockParams(store, f"t{trial}", c, rng)
            p.gamma.data = np.asarray(rng.standard_normal(), dtype=np.float32)
            x = rng.standard_normal((c, h, w)).astype(np.float32)
            a = rng.random((h, w)).astype(np.float32) + 0.1
            got = modulated_self_attention(Tensor(x), a, p).data
            ref = dense_attention_oracle(x, a, p.w_q.data, p.w_k.data, p.w_v.data,
                                         float(p.gamma.data))
            assert np.abs(got - ref).max() < 1e-6

    def test_gamma_zero_identity_exact(self, rng):
        store = ParamStore()
        p = AttentionBlockParams(store, "g0", 8, rng)
        x = rng.standard_normal((2, 8, 4, 4)).astype(np.float32)
        out = modulated_self_attention(Tensor(x), None, p).data
        assert np.array_equal(out, x)

    def test_all_ones_map_equals_unmodulated(self, rng):
        store = ParamStore()
        p = AttentionBlockParams(store, "a1", 8, rng)
        p.gamma.data = np.asarray(0.8, dtype=np.float32)
        x = Tensor(rng.standard_normal((3, 8, 3, 3)).astype(np.float32))
        ones = np.ones((3, 3, 3), dtype=np.float32)
        a = modulated_self_attention(x, ones, p).data
        b = modulated_self_attention(x, None, p).data
        assert np.abs(a - b).max() < 1e-6

    def test_affinity_rows_sum_one(self, rng):
        # softmax over key positions: perturbing one key column leaves rows normalized
        store = ParamStore()
        p = AttentionBlockParams(store, "rows", 4, rng)
        x = Tensor(rng.standard_normal((1, 4, 2, 2)).astype(np.float32))
        from fakeamp.autodiff.tensor import softmax
        xf = x.reshape(1, 4, 4)
        q = p.w_q @ xf
        k = p.w_k @ xf
        aff = softmax(q.transpose((0, 2, 1)) @ k, axis=-1).data
        assert np.abs(aff.sum(axis=-1) - 1).max() < 1e-6
        assert np.all(aff >= 0)

    def test_channels_not_divisible_by_four(self, rng):
        store = ParamStore()
        with pytest.raises(ValueError, match="divisible by 4"):
            AttentionBlockParams(store, "bad", 6, rng)

    def test_negative_map_rejected(self, rng):
        store = ParamStore()
        p = AttentionBlockParams(store, "neg", 4, rng)
        x = Tensor(rng.standard_normal((1, 4, 2, 2)).astype(np.float32))
        with pytest.raises(ValueError, match="non-negative"):
            modulated_self_attention(x, -np.ones((1, 2, 2), dtype=np.float32), p)

    def test_gradcheck_through_attention(self, rng):
        store = ParamStore()
        p = AttentionBlockParams(store, "gc", 4, rng)
        p.gamma.data = np.asarray(0.5, dtype=np.float32)
        a = rng.random((1, 2, 2)).astype(np.float64) + 0.5
        for _ in range(3):
            x = Tensor(rng.standard_normal((1, 4, 2, 2)).astype(np.float64))
            err = grad_check(
                lambda t: (modulated_self_attention(t, a, p) ** 2).sum(), x)
            assert err < 1e-3


class TestStem:
    def test_spatial_reduction_x4(self, rng):
        store = ParamStore()
        net = ClassifierNet(store, ClassifierConfig(depth=2, stage_channels=[16, 32]),
                            np.random.default_rng(0))
        x = Tensor(rng.random((8, 3, 64, 64)).astype(np.float32))
        out = net.stem_t(x, training=False)
        assert out.shape == (8, 16, 16, 16)

    def test_too_small_input(self, rng):
        store = ParamStore()
        net = ClassifierNet(store, ClassifierConfig(depth=1, stage_channels=[16]),
                            np.random.default_rng(0))
        with pytest.raises(ValueError, match="at least"):
            net.stem_t(Tensor(rng.random((1, 3, 4, 4)).astype(np.float32)), False)

    def test_stem_gradcheck(self, rng):
        store = ParamStore()
        net = ClassifierNet(store, ClassifierConfig(depth=1, stage_channels=[4]),
                            np.random.default_rng(0))
        r = Tensor(rng.standard_normal((1, 4, 4, 4)))

        def f(t):
            return (net.stem_t(t, training=False) * r).sum()

        for _ in range(3):
            x = Tensor(rng.random((1, 3, 16, 16)).astype(np.float64))
            assert grad_check(f, x, eps=1e-4) < 1e-3


class TestBlockModes:
    def _forward(self, mode, x, maps, seed=0):
        store = ParamStore()
        cfg = ClassifierConfig(depth=2, stage_channels=[8, 16], attention_mode=mode)
        net = ClassifierNet(store, cfg, np.random.default_rng(seed))
        # give gamma a bite so modes actually differ
        for _, attn in net.blocks:
            if attn is not None:
                attn.gamma.data = np.asarray(0.9, dtype=np.float32)
        return net.forward_logits(Tensor(x), maps, training=False).data

    def test_no_attention_ignores_maps(self, rng):
        x = rng.random((2, 3, 32, 32)).astype(np.float32)
        m1 = np.full((2, 32, 32), 1 / 1024, dtype=np.float32)
        m2 = rng.random((2, 32, 32)).astype(np.float32)
        m2 /= m2.sum(axis=(1, 2), keepdims=True)
        assert np.array_equal(self._forward("no_attention", x, m1),
                              self._forward("no_attention", x, m2))

    def test_full_gamma_zero_equals_any_map(self, rng):
        x = rng.random((2, 3, 32, 32)).astype(np.float32)
        store = ParamStore()
        cfg = ClassifierConfig(depth=2, stage_channels=[8, 16], attention_mode="full")
        net = ClassifierNet(store, cfg, np.random.default_rng(0))
        m1 = np.full((2, 32, 32), 1 / 1024, dtype=np.float32)
        m2 = rng.random((2, 32, 32)).astype(np.float32)
        m2 /= m2.sum(axis=(1, 2), keepdims=True)
        a = net.forward_logits(Tensor(x), m1, training=False).data
        b = net.forward_logits(Tensor(x), m2, training=False).data
        assert np.abs(a - b).max() < 1e-6  # gamma init 0

    def test_modes_differ_with_nonzero_gamma(self, rng):
        x = rng.random((2, 3, 32, 32)).astype(np.float32)
        maps = rng.random((2, 32, 32)).astype(np.float32) + 0.05
        maps /= maps.sum(axis=(1, 2), keepdims=True)
        full = self._forward("full", x, maps)
        unmod = self._forward("unmodulated", x, None)
        fixed = self._forward("fixed_gaussian", x, None)
        assert np.abs(full - unmod).max() > 1e-6
        assert np.abs(unmod - fixed).max() > 1e-6

    def test_invalid_mode_lists_valid(self):
        with pytest.raises(ValueError, match="full"):
            ClassifierConfig(attention_mode="bogus")
        assert set(ATTENTION_MODES) == {"full", "no_attention", "unmodulated",
                                        "fixed_gaussian"}


class TestMapPreparation:
    def test_resize_preserves_mass_roughly_and_mean_one(self, rng):
        maps = rng.random((3, 64, 64)).astype(np.float64)
        maps /= maps.sum(axis=(1, 2), keepdims=True)
        feat = scale_to_mean_one(resize_bilinear(maps, (16, 16)))
        assert feat.shape == (3, 16, 16)
        assert np.abs(feat.mean(axis=(1, 2)) - 1.0).max() < 1e-9

    def test_fixed_gaussian_block_map(self, rng):
        store = ParamStore()
        cfg = ClassifierConfig(depth=1, stage_channels=[8],
                               attention_mode="fixed_gaussian")
        net = ClassifierNet(store, cfg, np.random.default_rng(0))
        a = net._block_map(None, (64, 64), (8, 8), n=3)
        assert a.shape == (3, 8, 8)
        base = center_gaussian_baseline(64, 64)
        ref = scale_to_mean_one(resize_bilinear(base[None], (8, 8)))[0]
        assert np.abs(a[0] - ref).max() < 1e-6
        y, x = np.unravel_index(np.argmax(a[0]), (8, 8))
        assert (y, x) == (4, 4)


class TestClassifyVideo:
    @pytest.fixture(scope="class")
    def pipeline(self):
        return DetectorPipeline(
            ClassifierConfig(depth=1, stage_channels=[8], attention_mode="unmodulated"),
            EncoderConfig([4, 8]), seed=0)

    def test_consensus_is_mean_and_threshold(self, pipeline, rng):
        clip = rng.random((5, 3, 16, 16)).astype(np.float32)
        res = classify_video(pipeline, clip)
        assert res.video_score == pytest.approx(float(res.frame_scores.mean()), abs=1e-6)
        assert res.label == ("fake" if res.video_score > 0.5 else "real")

    def test_tie_resolves_to_real(self):
        # scores of exactly 0.5 must not be labeled fake
        from fakeamp.classifier import DetectionResult
        score = 0.5
        label = "fake" if score > 0.5 else "real"
        assert label == "real"

    def test_empty_clip_error(self, pipeline):
        with pytest.raises(ValueError, match="T == 0"):
            classify_video(pipeline, np.zeros((0, 3, 16, 16), dtype=np.float32))

    def test_example_arithmetic(self):
        scores = np.array([0.9, 0.7, 0.2])
        video_score = scores.mean()
        assert video_score == pytest.approx(0.6)
        assert ("fake" if video_score > 0.5 else "real") == "fake"

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_result_invariants_property(self, scores):
        arr = np.asarray(scores, dtype=np.float64)
        video_score = float(arr.mean())
        label = "fake" if video_score > 0.5 else "real"
        assert abs(video_score - arr.mean()) < 1e-6
        assert label in ("real", "fake")
        if label == "fake":
            assert video_score > 0.5

    def test_full_mode_predicts_maps_when_missing(self, rng):
        pipe = DetectorPipeline(
            ClassifierConfig(depth=1, stage_channels=[8], attention_mode="full"),
            EncoderConfig([4, 8]), seed=1)
        clip = rng.random((3, 3, 16, 16)).astype(np.float32)
        res = classify_video(pipe, clip)
        assert res.frame_scores.shape == (3,)
