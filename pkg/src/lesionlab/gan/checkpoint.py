"""Versioned GAN checkpoints.

The payload is plain tensors/containers so files load with
``torch.load(weights_only=True)``. A version header plus a config hash let
the sampler reject files produced under a different architecture.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import torch

CHECKPOINT_VERSION = 1


def config_hash(config_dict: dict) -> str:
    return hashlib.sha256(json.dumps(config_dict, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class GanCheckpoint:
    arch: str                      # "cpggan" | "img2img"
    config: dict                   # trainer + net config, plain values
    stage: int
    alpha: float
    step: int
    generator_state: dict
    critic_state: dict
    loss_history: list = field(default_factory=list)
    trained_record_ids: list = field(default_factory=list)
    version: int = CHECKPOINT_VERSION

    @property
    def hash(self) -> str:
        return config_hash(self.config)

    def payload(self) -> dict:
        return {
            "version": self.version,
            "arch": self.arch,
            "config": json.dumps(self.config, sort_keys=True),
            "config_hash": self.hash,
            "stage": self.stage,
            "alpha": self.alpha,
            "step": self.step,
            "generator_state": self.generator_state,
            "critic_state": self.critic_state,
            "loss_history": json.dumps(self.loss_history),
            "trained_record_ids": list(self.trained_record_ids),
        }


def save_checkpoint(ckpt: GanCheckpoint, path: str | Path) -> Path:
    """Atomic write: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(ckpt.payload(), fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_checkpoint(path: str | Path, expect_config: dict | None = None) -> GanCheckpoint:
    data = torch.load(path, weights_only=True)
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint version {data.get('version')} != {CHECKPOINT_VERSION}")
    ckpt = GanCheckpoint(
        arch=data["arch"], config=json.loads(data["config"]), stage=data["stage"],
        alpha=data["alpha"], step=data["step"],
        generator_state=data["generator_state"], critic_state=data["critic_state"],
        loss_history=json.loads(data["loss_history"]),
        trained_record_ids=list(data["trained_record_ids"]))
    if ckpt.hash != data["config_hash"]:
        raise ValueError("checkpoint config hash does not match its payload")
    if expect_config is not None and config_hash(expect_config) != ckpt.hash:
        raise ValueError("checkpoint was trained under a different config")
    return ckpt
