"""Run configuration dataclasses and YAML round-tripping."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .gan.losses import GanLossConfig
from .gan.nets import GanNetConfig


@dataclass(frozen=True)
class GanTrainConfig:
    total_steps: int = 40_000          # critic steps; generator steps ride along
    batch_size: int = 16
    adam_lr: float = 2.0e-4
    adam_betas: tuple[float, float] = (0.0, 0.99)
    label_flip_period: int = 3         # deterministic every-k-th critic step
    flip_prob: float | None = None     # stochastic alternative; overrides period
    include_normals: bool = False
    critic_steps_per_gen_step: int = 1
    checkpoint_every: int = 10_000
    seed: int = 0
    target_resolution: int = 64
    fade_images: int | list[int] = 64_000
    stable_images: int | list[int] = 64_000
    net: GanNetConfig = field(default_factory=GanNetConfig)
    loss: GanLossConfig = field(default_factory=GanLossConfig)

    def __post_init__(self):
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.label_flip_period < 1:
            raise ValueError("label_flip_period must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class DetTrainConfig:
    total_steps: int = 2_500
    batch_size: int = 16
    adam_lr: float = 1.0e-3
    train_resolution: int = 128
    eval_resolution: int = 192
    grid_size: int = 16                # S; stride = train_resolution / S
    num_anchors: int = 6
    lambda_coord: float = 5.0
    lambda_noobj: float = 0.5
    conf_threshold: float = 0.001
    nms_iou: float = 0.45
    checkpoint_every: int = 500
    selection_window: tuple[float, float] = (0.4, 1.0)
    base_channels: int = 16
    num_blocks: int = 4
    seed: int = 0
    augment: bool = True

    def __post_init__(self):
        if self.train_resolution % self.grid_size:
            raise ValueError("grid_size must divide train_resolution")
        if self.eval_resolution % (self.train_resolution // self.grid_size):
            raise ValueError("eval resolution must be a multiple of the stride")


def _to_plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def config_to_dict(cfg) -> dict:
    return _to_plain(cfg)


def gan_config_from_dict(d: dict) -> GanTrainConfig:
    d = dict(d)
    net = GanNetConfig(**d.pop("net", {}))
    loss = GanLossConfig(**d.pop("loss", {}))
    if "adam_betas" in d:
        d["adam_betas"] = tuple(d["adam_betas"])
    return GanTrainConfig(net=net, loss=loss, **d)


def det_config_from_dict(d: dict) -> DetTrainConfig:
    d = dict(d)
    if "selection_window" in d:
        d["selection_window"] = tuple(d["selection_window"])
    return DetTrainConfig(**d)


def load_yaml(path: str | Path) -> dict:
    with open(path) as fh:
        return yaml.safe_load(fh) or {}


def save_yaml(data: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)
