"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Training-based criteria share module-scoped fixtures so the expensive runs
happen once. Run with ``pytest -s tests/test_acceptance.py`` to see the
per-criterion lines as they complete.
"""

import time

import numpy as np
import pytest

from fakeamp.annotation import (
    AnnotationRecord,
    Stroke,
    aggregate_annotations,
    center_gaussian_baseline,
    heatmap_cc,
    rasterize_record,
)
from fakeamp.attention import (
    ArtifactAttentionNet,
    EncoderConfig,
    attention_supervision_loss,
)
from fakeamp.autodiff import (
    batchnorm2d,
    bce_loss,
    conv2d,
    depthwise_conv2d,
    global_avg_pool,
    grad_check,
    l1_loss,
    maxpool2d,
    mish,
    nearest_upsample,
    sigmoid,
    softmax,
    softplus,
)
from fakeamp.autodiff.params import ParamStore
from fakeamp.autodiff.tensor import Tensor, no_grad
from fakeamp.caricature import (
    Magnifier,
    MagnifierConfig,
    MagnifierTrainConfig,
    caricaturize_clip,
    copy_input_baseline_l1,
    diff_centroid,
    evaluate_magnifier,
    frame_distortion,
    render_translation_clip,
    synth_triplet_generate,
    train_magnifier,
)
from fakeamp.classifier import AttentionBlockParams, ClassifierNet, ClassifierConfig, \
    modulated_self_attention
from fakeamp.metrics import video_auc
from fakeamp.toydata import ToyDatasetSpec, generate_toy_dataset
from fakeamp.training import TrainConfig, train_attention_module
from tests.test_annotation import dense_gaussian_3d_oracle, normalize_oracle
from tests.test_classifier import dense_attention_oracle
from tests.test_metrics import pairwise_auc_oracle


def report(name: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" — {detail}" if detail else "")
    print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def toy_sets():
    train = generate_toy_dataset(ToyDatasetSpec(n_real=100, n_fake=100, t=8,
                                                h=64, w=64, seed=0))
    val = generate_toy_dataset(ToyDatasetSpec(n_real=25, n_fake=25, t=8,
                                              h=64, w=64, seed=1))
    return train, val


@pytest.fixture(scope="module")
def trained_attention(toy_sets):
    """Attention module trained on toy maps; encoder reused by the magnifier."""
    train, val = toy_sets
    result = train_attention_module(
        train, val, EncoderConfig(),
        TrainConfig(epochs=6, base_lr=2e-3, batch_videos=4, frames_per_video=4,
                    videos_per_epoch=64, seed=0))
    return result


@pytest.fixture(scope="module")
def trained_magnifier(trained_attention):
    """Magnifier trained against the frozen attention encoder; timed for the gate."""
    encoder = trained_attention.net
    encoder.store.freeze()
    triplets = synth_triplet_generate(0, 256, alpha_range=(1.0, 3.0))
    magnifier = Magnifier(ParamStore(),
                          MagnifierConfig(code_channels=128, upsample_stages=4),
                          np.random.default_rng(1))
    t0 = time.time()
    train_magnifier(triplets, encoder, magnifier,
                    MagnifierTrainConfig(epochs=25, batch_size=8, lr=3e-3, seed=0))
    elapsed = time.time() - t0
    return encoder, magnifier, elapsed


@pytest.fixture(scope="module")
def table4_report():
    from fakeamp.experiment import ExperimentConfig, run_experiment

    cfg = ExperimentConfig(out_dir="reports/acceptance_table4")
    t0 = time.time()
    rep = run_experiment(cfg)
    return rep, time.time() - t0


# ------------------------------------------------------- criterion 1: grads

@pytest.mark.slow
class TestGradientSuite:
    def test_every_op_and_composite(self):
        rng = np.random.default_rng(7)
        t0 = time.time()
        worst = {}

        def check(name, f, make_x, n=5, eps=1e-5):
            errs = []
            for _ in range(n):
                errs.append(grad_check(f, make_x(), eps=eps))
            worst[name] = max(errs)
            assert worst[name] < 1e-3, f"{name}: {worst[name]}"

        # primitive ops
        rnd = lambda *s: Tensor(rng.standard_normal(s).astype(np.float64))
        w_c = rnd(3, 2, 3, 3)
        b_c = rnd(3)
        check("conv2d", lambda t: (conv2d(t, w_c, b_c, 2, 1) ** 2).sum(),
              lambda: rnd(1, 2, 6, 6))
        w_d = rnd(2, 3, 3)
        b_d = rnd(2)
        check("depthwise_conv2d",
              lambda t: (depthwise_conv2d(t, w_d, b_d, 1, 1) ** 2).sum(),
              lambda: rnd(1, 2, 5, 5))
        check("matmul", lambda t: ((rnd(3, 4).detach() @ t) ** 2).sum(),
              lambda: rnd(4, 5))
        check("mish", lambda t: (mish(t) ** 2).sum(), lambda: rnd(3, 3))
        check("sigmoid", lambda t: (sigmoid(t) ** 2).sum(), lambda: rnd(8))
        check("softplus", lambda t: (softplus(t) ** 2).sum(), lambda: rnd(8))
        check("softmax",
              lambda t: ((softmax(t, -1) - Tensor(np.full((2, 5), 0.3))) ** 2).sum(),
              lambda: rnd(2, 5))
        check("maxpool2d", lambda t: (maxpool2d(t, 3, 2, 1) ** 2).sum(),
              lambda: Tensor(rng.permutation(36).astype(np.float64).reshape(1, 1, 6, 6) / 6))
        check("nearest_upsample", lambda t: (nearest_upsample(t, 2) ** 2).sum(),
              lambda: rnd(1, 2, 3, 3))
        check("global_avg_pool", lambda t: (global_avg_pool(t) ** 2).sum(),
              lambda: rnd(2, 3, 4, 4))
        g_bn = Tensor(rng.random(2) + 0.5)
        b_bn = rnd(2)
        r_bn = rnd(2, 2, 3, 3)
        check("batchnorm2d",
              lambda t: (batchnorm2d(t, g_bn, b_bn, np.zeros(2), np.ones(2), True)
                         * r_bn).sum(),
              lambda: rnd(2, 2, 3, 3))
        check("add_sub_mul", lambda t: ((t + t) * (t - 0.5)).sum(), lambda: rnd(6))
        tgt = Tensor(rng.random(6))
        check("l1_loss", lambda t: l1_loss(t, tgt), lambda: rnd(6))
        yb = Tensor((rng.random(6) > 0.5).astype(np.float64))
        check("bce_loss", lambda t: bce_loss(sigmoid(t), yb), lambda: rnd(6))

        # composites
        store = ParamStore()
        stem_net = ClassifierNet(store, ClassifierConfig(depth=1, stage_channels=[4]),
                                 np.random.default_rng(0))
        r_stem = Tensor(rng.standard_normal((1, 4, 4, 4)))
        check("stem", lambda t: (stem_net.stem_t(t, False) * r_stem).sum(),
              lambda: Tensor(rng.random((1, 3, 16, 16)).astype(np.float64)), eps=1e-4)

        p_attn = AttentionBlockParams(ParamStore(), "acc", 8, np.random.default_rng(1))
        p_attn.gamma.data = np.asarray(0.7, dtype=np.float32)
        a_map = rng.random((1, 2, 2)) + 0.2
        check("attention_block",
              lambda t: (modulated_self_attention(t, a_map, p_attn) ** 2).sum(),
              lambda: rnd(1, 8, 2, 2))

        small = ArtifactAttentionNet(ParamStore(), EncoderConfig([4, 8]),
                                     np.random.default_rng(2))
        gt = np.stack([center_gaussian_baseline(16, 16, (3, 3))])

        def attn_loss(t):
            pred = small.decode_t(small.encode_t(t, False), False)
            return attention_supervision_loss(pred, gt)

        check("artifact_attention_loss", attn_loss,
              lambda: Tensor(rng.random((1, 3, 16, 16)).astype(np.float64)), n=5,
              eps=1e-4)

        mag = Magnifier(ParamStore(),
                        MagnifierConfig(code_channels=4, upsample_stages=2),
                        np.random.default_rng(3))
        e_base = rng.random((1, 4, 4, 4))

        def mag_f(t):
            d = mag.frame_distortion_t(Tensor(e_base), t, None, 2.0)
            return (mag.construct_t(d) ** 2).sum()

        check("magnifier", mag_f,
              lambda: Tensor((e_base + rng.random((1, 4, 4, 4)) * 0.2)), n=5, eps=1e-4)

        elapsed = time.time() - t0
        detail = f"max rel err {max(worst.values()):.2e} over {len(worst)} ops, " \
                 f"{elapsed:.0f}s"
        report("gradient suite (<1e-3, <2 min)", elapsed < 120, detail)


# ------------------------------------------- criterion 2: attention oracle

class TestAttentionOracle:
    def test_dense_equation_match(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for trial in range(20):
            c = int(rng.choice([4, 8]))
            h = w = int(rng.choice([2, 3]))
            p = AttentionBlockParams(ParamStore(), "o", c, rng)
            p.gamma.data = np.asarray(rng.standard_normal(), dtype=np.float32)
            x = rng.standard_normal((c, h, w)).astype(np.float32)
            a = rng.random((h, w)).astype(np.float32) + 0.1
            got = modulated_self_attention(Tensor(x), a, p).data
            ref = dense_attention_oracle(x, a, p.w_q.data, p.w_k.data, p.w_v.data,
                                         float(p.gamma.data))
            worst = max(worst, float(np.abs(got - ref).max()))
        gamma_ok = self._gamma_zero_exact(rng)
        ones_ok = self._ones_map_matches(rng)
        report("attention-mechanism oracle (20 instances, 1e-6)",
               worst < 1e-6 and gamma_ok and ones_ok,
               f"max dev {worst:.2e}, gamma0 exact={gamma_ok}, A=1 match={ones_ok}")

    @staticmethod
    def _gamma_zero_exact(rng):
        p = AttentionBlockParams(ParamStore(), "g", 8, rng)
        x = rng.standard_normal((2, 8, 3, 3)).astype(np.float32)
        return np.array_equal(modulated_self_attention(Tensor(x), None, p).data, x)

    @staticmethod
    def _ones_map_matches(rng):
        p = AttentionBlockParams(ParamStore(), "1", 8, rng)
        p.gamma.data = np.asarray(1.3, dtype=np.float32)
        x = Tensor(rng.standard_normal((2, 8, 3, 3)).astype(np.float32))
        ones = np.ones((2, 3, 3), dtype=np.float32)
        dev = np.abs(modulated_self_attention(x, ones, p).data
                     - modulated_self_attention(x, None, p).data).max()
        return dev < 1e-6


# ------------------------------------------ criterion 3: aggregation oracle

class TestAggregationOracle:
    def test_dense_3d_convolution_match(self):
        rng = np.random.default_rng(13)
        worst = 0.0
        sum_dev = 0.0
        for trial in range(6):
            t = int(rng.integers(2, 5))
            h = int(rng.integers(8, 14))
            w = int(rng.integers(8, 14))
            records = []
            for a in range(int(rng.integers(1, 4))):
                strokes = [Stroke(int(rng.integers(0, t)),
                                  [(int(rng.integers(0, w)), int(rng.integers(0, h)))
                                   for _ in range(int(rng.integers(1, 4)))])]
                records.append(AnnotationRecord(f"a{a}", "v", strokes,
                                                brush_radius=int(rng.integers(1, 3))))
            sigmas = (float(rng.uniform(1.5, 4)), float(rng.uniform(1.5, 4)),
                      float(rng.uniform(1, 2)))
            got = aggregate_annotations(records, (t, h, w), kernel_sigma=sigmas)
            vol = np.mean([rasterize_record(r, (t, h, w)) for r in records], axis=0)
            ref = normalize_oracle(dense_gaussian_3d_oracle(vol.astype(np.float64),
                                                            sigmas))
            worst = max(worst, float(np.abs(got.maps - ref).max()))
            sum_dev = max(sum_dev, float(np.abs(got.maps.sum(axis=(1, 2)) - 1).max()))
        ok = worst < 1e-5 and sum_dev < 1e-5
        report("aggregation oracle (dense 3D conv, 1e-5)", ok,
               f"max dev {worst:.2e}, frame-sum dev {sum_dev:.2e}")


# -------------------------------------------------- criterion 4: AUC oracle

class TestAucOracle:
    def test_exact_pairwise_agreement(self):
        rng = np.random.default_rng(17)
        exact = True
        for trial in range(100):
            n = int(rng.integers(4, 40))
            quantized = rng.random() < 0.5
            scores = (np.round(rng.random(n), 1) if quantized else rng.random(n))
            labels = rng.integers(0, 2, size=n)
            labels[0], labels[1] = 1, 0
            scored = list(zip(scores.tolist(), labels.tolist()))
            if video_auc(scored) != pytest.approx(pairwise_auc_oracle(scored),
                                                  abs=1e-12):
                exact = False
                break
        report("AUC oracle (100 instances incl. ties, exact)", exact)


# ----------------------------------------- criterion 5: caricature identities

@pytest.mark.slow
class TestCaricatureIdentities:
    def test_identities_and_centroid(self, trained_magnifier):
        encoder, magnifier, _ = trained_magnifier
        rng = np.random.default_rng(19)

        # alpha=1 with identity manipulator: exact code reproduction
        ident_mag = Magnifier(ParamStore(),
                              MagnifierConfig(code_channels=8, upsample_stages=2),
                              np.random.default_rng(0))
        e_i = (rng.random((8, 4, 4)) * 0.5 + 0.5).astype(np.float32)
        e_next = (rng.random((8, 4, 4)) * 0.5 + 0.5).astype(np.float32)
        alpha1_exact = np.array_equal(
            frame_distortion(ident_mag, e_i, e_next, None, 1.0), e_next)

        # alpha=0 and A=0: latent path identity through the trained pair
        clip = rng.random((4, 3, 64, 64)).astype(np.float32)
        with no_grad():
            recon = magnifier.construct_t(Tensor(encoder.encode(clip).codes)).data
        a0 = caricaturize_clip(clip, None, 0.0, encoder, magnifier)
        z = np.zeros((4, 64, 64), dtype=np.float32)
        azero = caricaturize_clip(clip, z, 3.0, encoder, magnifier)
        alpha0_exact = np.abs(a0 - recon).max() == 0.0
        gate_exact = np.abs(azero - recon).max() == 0.0

        # centroid displacement ~2 px at alpha=2 on a 1 px/frame translation clip
        disp = measured_caricature_displacement(encoder, magnifier, alpha=2.0)
        centroid_ok = abs(disp - 2.0) <= 0.3

        report("caricature identities (exact) + centroid 2.0±0.3",
               alpha1_exact and alpha0_exact and gate_exact and centroid_ok,
               f"alpha1={alpha1_exact} alpha0={alpha0_exact} gate={gate_exact} "
               f"displacement={disp:.2f}px")


def measured_caricature_displacement(encoder, magnifier, alpha=2.0) -> float:
    """Mean x-displacement of the sprite between caricature and reconstruction."""
    clip, scene = render_translation_clip(11, t=6, delta=(0.0, 1.0),
                                          plain_background=True)
    cari = caricaturize_clip(clip, None, alpha, encoder, magnifier)
    with no_grad():
        recon = magnifier.construct_t(Tensor(encoder.encode(clip).codes)).data
        bg_clip = np.repeat(scene.background[None], 2, axis=0)
        recon_bg = magnifier.construct_t(
            Tensor(encoder.encode(bg_clip.astype(np.float32)).codes)).data[0]
    disps = []
    for j in range(2, 6):
        c_cari = diff_centroid(cari[j], recon_bg)
        c_recon = diff_centroid(recon[j], recon_bg)
        disps.append(c_cari[1] - c_recon[1])
    return float(np.mean(disps))


# -------------------------------------------- criterion 6: magnifier training

@pytest.mark.slow
class TestMagnifierTraining:
    def test_beats_copy_baseline_by_half(self, trained_magnifier):
        encoder, magnifier, elapsed = trained_magnifier
        held = synth_triplet_generate(99, 48, alpha_range=(1.0, 3.0))
        l1 = evaluate_magnifier(held, encoder, magnifier)
        base = copy_input_baseline_l1(held)
        ratio = l1 / base
        ok = ratio <= 0.5 and elapsed < 1800
        report("magnifier training (L1 ≤ 50% of copy baseline, <30 min)", ok,
               f"held-out L1 {l1:.4f} vs baseline {base:.4f} (ratio {ratio:.2f}), "
               f"{elapsed:.0f}s")

    def test_alpha_one_sanity(self, trained_magnifier):
        encoder, magnifier, _ = trained_magnifier
        ident = synth_triplet_generate(7, 32, alpha_range=(1.0, 1.0))
        l1 = evaluate_magnifier(ident, encoder, magnifier)
        report("alpha=1 triplets reconstruct frame_b (L1 < 0.05)", l1 < 0.05,
               f"L1 {l1:.4f}")


# ---------------------------------------------- criterion 7: toy Table-4 run

@pytest.mark.slow
class TestToyTable4:
    def test_mode_ordering_and_floor(self, table4_report):
        rep, elapsed = table4_report
        summary = rep.mode_summary()
        full, _ = summary["full"]
        unmod, _ = summary["unmodulated"]
        fixed, _ = summary["fixed_gaussian"]
        ok = (full >= unmod >= fixed and full >= 0.9
              and full - fixed >= 0.03 and elapsed < 3600)
        report("toy Table-4 (full ≥ unmod ≥ fixed, full ≥ 0.9, gap ≥ 0.03, <1h)",
               ok,
               f"full {full:.3f}, unmod {unmod:.3f}, fixed {fixed:.3f}, "
               f"{elapsed / 60:.1f} min")


# -------------------------------------- criterion 8: perturbation robustness

@pytest.mark.slow
class TestPerturbationRobustness:
    def test_clean_dominates_and_rows_exist(self, table4_report):
        rep, _ = table4_report
        rows = rep.perturbation_rows
        expected = {"clean", "contrast", "gaussian_noise", "gaussian_blur",
                    "pixelation"}
        have_rows = expected.issubset(rows)
        clean = rows.get("clean", 0.0)
        dominated = all(clean >= rows[k] for k in expected - {"clean"})
        report("perturbation harness (clean ≥ perturbed, one row per kind)",
               have_rows and dominated,
               ", ".join(f"{k}={rows.get(k, float('nan')):.3f}"
                         for k in sorted(expected)))


# --------------------------------------- criterion 9: heatmap quality on toy

@pytest.mark.slow
class TestPredictedHeatmapQuality:
    def test_beats_center_baseline_on_80pct(self, trained_attention, toy_sets):
        _, val = toy_sets
        net = trained_attention.net
        wins = 0
        total = 0
        base = center_gaussian_baseline(64, 64)
        for video in val.videos:
            if video.gt_map is None:
                continue
            pred = net.predict_heatmaps(video.clip).maps
            cc_pred = np.mean([heatmap_cc(p, g)
                               for p, g in zip(pred, video.gt_map.maps)])
            cc_base = np.mean([heatmap_cc(base, g) for g in video.gt_map.maps])
            wins += int(cc_pred > cc_base)
            total += 1
        frac = wins / total
        report("predicted-heatmap quality (CC beats center baseline on ≥80%)",
               frac >= 0.8, f"{wins}/{total} fakes ({frac:.0%})")

    def test_argmax_inside_footprint_80pct(self, trained_attention, toy_sets):
        _, val = toy_sets
        net = trained_attention.net
        inside = 0
        total = 0
        for video in val.videos:
            if video.footprint is None:
                continue
            pred = net.predict_heatmaps(video.clip).maps
            for frame in pred:
                y, x = np.unravel_index(np.argmax(frame), frame.shape)
                inside += int(video.footprint[y, x])
                total += 1
        frac = inside / total
        report("decoder argmax inside artifact footprint on ≥80% of frames",
               frac >= 0.8, f"{inside}/{total} frames ({frac:.0%})")


# --------------------------------------------------- secondary: JSON fixtures

class TestSecondaryFixtures:
    """Exported-annotation fixtures from the browser tool, checked into the corpus."""

    def test_one_pixel_fixture_aggregates_near_paint(self, tmp_path):
        import json
        from pathlib import Path

        from fakeamp.annotation import load_annotation_json

        fixture = Path(__file__).parent / "fixtures" / "ui_export_one_pixel.json"
        rec, dims = load_annotation_json(fixture)
        obj = json.loads(fixture.read_text())
        assert set(obj) == {"video_id", "annotator_id", "T", "H", "W",
                            "brush_radius", "strokes"}
        amap = aggregate_annotations([rec], dims, kernel_sigma=(4, 4, 2))
        px, py = obj["strokes"][0]["pixels"][0]
        frame = obj["strokes"][0]["frame"]
        y, x = np.unravel_index(np.argmax(amap.maps[frame]), amap.maps[frame].shape)
        dist = np.hypot(x - px, y - py)
        report("secondary fixture: one-pixel paint aggregates within brush radius",
               dist <= rec.brush_radius, f"argmax offset {dist:.1f}px")

    def test_empty_fixture_yields_uniform(self):
        from pathlib import Path

        from fakeamp.annotation import load_annotation_json

        fixture = Path(__file__).parent / "fixtures" / "ui_export_empty.json"
        rec, dims = load_annotation_json(fixture)
        amap = aggregate_annotations([rec], dims)
        uniform = np.abs(amap.maps - 1.0 / (dims[1] * dims[2])).max() < 1e-6
        report("secondary fixture: empty export aggregates to uniform maps", uniform)
