"""Save/load models as a CKPT parameter file plus a JSON architecture sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .attention import ArtifactAttentionNet, EncoderConfig
from .autodiff.checkpoint import load_checkpoint, save_checkpoint
from .autodiff.params import ParamStore
from .caricature import Magnifier, MagnifierConfig
from .classifier import ClassifierConfig, DetectorPipeline


def _sidecar(path) -> Path:
    return Path(path).with_suffix(Path(path).suffix + ".json")


def save_pipeline(pipeline: DetectorPipeline, path):
    save_checkpoint(pipeline.store, path)
    meta = {
        "kind": "detector_pipeline",
        "classifier": {
            "depth": pipeline.clf_cfg.depth,
            "stage_channels": pipeline.clf_cfg.stage_channels,
            "attention_mode": pipeline.clf_cfg.attention_mode,
            "threshold": pipeline.clf_cfg.threshold,
        },
        "encoder": {"stage_channels": pipeline.enc_cfg.stage_channels},
    }
    _sidecar(path).write_text(json.dumps(meta, indent=1))


def load_pipeline(path) -> DetectorPipeline:
    meta = json.loads(_sidecar(path).read_text())
    if meta.get("kind") != "detector_pipeline":
        raise ValueError(f"{path}: sidecar does not describe a detector pipeline")
    c = meta["classifier"]
    pipeline = DetectorPipeline(
        ClassifierConfig(depth=c["depth"], stage_channels=list(c["stage_channels"]),
                         attention_mode=c["attention_mode"], threshold=c["threshold"]),
        EncoderConfig(list(meta["encoder"]["stage_channels"])),
        seed=0,
    )
    pipeline.store.load_arrays(load_checkpoint(path))
    return pipeline


def save_attention_net(net: ArtifactAttentionNet, path):
    save_checkpoint(net.store, path)
    meta = {"kind": "attention_net",
            "encoder": {"stage_channels": net.cfg.stage_channels}}
    _sidecar(path).write_text(json.dumps(meta, indent=1))


def load_attention_net(path) -> ArtifactAttentionNet:
    meta = json.loads(_sidecar(path).read_text())
    if meta.get("kind") != "attention_net":
        raise ValueError(f"{path}: sidecar does not describe an attention net")
    store = ParamStore()
    net = ArtifactAttentionNet(store, EncoderConfig(list(meta["encoder"]["stage_channels"])),
                               np.random.default_rng(0))
    store.load_arrays(load_checkpoint(path))
    return net


def save_magnifier(mag: Magnifier, path):
    save_checkpoint(mag.store, path)
    meta = {"kind": "magnifier",
            "config": {"code_channels": mag.cfg.code_channels,
                       "upsample_stages": mag.cfg.upsample_stages,
                       "alpha_default": mag.cfg.alpha_default,
                       "eq3_literal": mag.cfg.eq3_literal}}
    _sidecar(path).write_text(json.dumps(meta, indent=1))


def load_magnifier(path) -> Magnifier:
    meta = json.loads(_sidecar(path).read_text())
    if meta.get("kind") != "magnifier":
        raise ValueError(f"{path}: sidecar does not describe a magnifier")
    store = ParamStore()
    mag = Magnifier(store, MagnifierConfig(**meta["config"]), np.random.default_rng(0))
    store.load_arrays(load_checkpoint(path))
    return mag
