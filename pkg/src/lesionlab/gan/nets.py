"""Conditional progressive generator and critic.

The box mask rides along the whole ladder: every generator up-block consumes
[features || mask] at the previous resolution, and the critic re-concatenates
the pooled mask in front of every block. Masks are normalized to [0, 1];
images live in [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from .layers import EqualizedConv2d, EqualizedLinear, MinibatchStdDev, PixelNorm
from .schedule import ProgressiveSchedule


@dataclass(frozen=True)
class GanNetConfig:
    latent_dim: int = 128
    base_channels: int = 64     # width at 4x4
    max_channels: int = 64
    min_channels: int = 8
    use_pixelnorm: bool = True
    use_minibatch_stddev: bool = True
    equalized_lr: bool = True

    def channels(self, stage: int) -> int:
        return max(self.min_channels, min(self.max_channels, self.base_channels >> stage))


def _pool_mask(mask: torch.Tensor, resolution: int) -> torch.Tensor:
    factor = mask.shape[-1] // resolution
    if factor == 1:
        return mask
    return F.avg_pool2d(mask, factor)


class _GenBlock(nn.Module):
    """Upsample x2 then two 3x3 convs; consumes the mask at the input resolution."""

    def __init__(self, in_ch: int, out_ch: int, cfg: GanNetConfig):
        super().__init__()
        self.conv1 = EqualizedConv2d(in_ch + 1, out_ch, 3, padding=1, equalized=cfg.equalized_lr)
        self.conv2 = EqualizedConv2d(out_ch, out_ch, 3, padding=1, equalized=cfg.equalized_lr)
        self.norm = PixelNorm() if cfg.use_pixelnorm else nn.Identity()

    def forward(self, h, mask_at_input_res):
        h = torch.cat([h, mask_at_input_res], dim=1)
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.norm(F.leaky_relu(self.conv1(h), 0.2))
        h = self.norm(F.leaky_relu(self.conv2(h), 0.2))
        return h


class Generator(nn.Module):
    def __init__(self, schedule: ProgressiveSchedule, cfg: GanNetConfig | None = None):
        super().__init__()
        cfg = cfg or GanNetConfig()
        self.cfg = cfg
        self.schedule = schedule
        self.latent_dim = cfg.latent_dim
        ch0 = cfg.channels(0)
        self.input_norm = PixelNorm() if cfg.use_pixelnorm else nn.Identity()
        self.base = EqualizedLinear(cfg.latent_dim, ch0 * 16, equalized=cfg.equalized_lr)
        self.base_conv = EqualizedConv2d(ch0, ch0, 3, padding=1, equalized=cfg.equalized_lr)
        self.norm = PixelNorm() if cfg.use_pixelnorm else nn.Identity()
        self.blocks = nn.ModuleList(
            _GenBlock(cfg.channels(s - 1), cfg.channels(s), cfg)
            for s in range(1, schedule.n_stages))
        self.to_rgb = nn.ModuleList(
            EqualizedConv2d(cfg.channels(s), 1, 1, gain=1.0, equalized=cfg.equalized_lr)
            for s in range(schedule.n_stages))

    def forward(self, z: torch.Tensor, mask: torch.Tensor,
                stage: int, alpha: float = 1.0) -> torch.Tensor:
        """z: (B, L); mask: (B, 1, R, R) normalized to [0,1] at full resolution."""
        if stage >= self.schedule.n_stages:
            raise ValueError(f"stage {stage} beyond schedule ({self.schedule.n_stages} stages)")
        h = self.input_norm(z)
        h = self.base(h).reshape(z.shape[0], -1, 4, 4)
        h = self.norm(F.leaky_relu(h, 0.2))
        h = self.norm(F.leaky_relu(self.base_conv(h), 0.2))
        prev = h
        for s in range(1, stage + 1):
            prev = h
            h = self.blocks[s - 1](h, _pool_mask(mask, self.schedule.stages[s - 1]))
        rgb = self.to_rgb[stage](h)
        if stage > 0 and alpha < 1.0:
            skip = F.interpolate(self.to_rgb[stage - 1](prev), scale_factor=2, mode="nearest")
            rgb = alpha * rgb + (1.0 - alpha) * skip
        return torch.tanh(rgb)


class _CriticBlock(nn.Module):
    """Two 3x3 convs then pool x2; consumes the mask at the input resolution."""

    def __init__(self, in_ch: int, out_ch: int, cfg: GanNetConfig):
        super().__init__()
        self.conv1 = EqualizedConv2d(in_ch + 1, in_ch, 3, padding=1, equalized=cfg.equalized_lr)
        self.conv2 = EqualizedConv2d(in_ch, out_ch, 3, padding=1, equalized=cfg.equalized_lr)

    def forward(self, h, mask_at_input_res):
        h = torch.cat([h, mask_at_input_res], dim=1)
        h = F.leaky_relu(self.conv1(h), 0.2)
        h = F.leaky_relu(self.conv2(h), 0.2)
        return F.avg_pool2d(h, 2)


class Critic(nn.Module):
    def __init__(self, schedule: ProgressiveSchedule, cfg: GanNetConfig | None = None):
        super().__init__()
        cfg = cfg or GanNetConfig()
        self.cfg = cfg
        self.schedule = schedule
        self.from_rgb = nn.ModuleList(
            EqualizedConv2d(2, cfg.channels(s), 1, equalized=cfg.equalized_lr)
            for s in range(schedule.n_stages))
        self.blocks = nn.ModuleList(
            _CriticBlock(cfg.channels(s), cfg.channels(s - 1), cfg)
            for s in range(1, schedule.n_stages))
        ch0 = cfg.channels(0)
        self.mbstd = MinibatchStdDev() if cfg.use_minibatch_stddev else None
        extra = 1 if cfg.use_minibatch_stddev else 0
        self.final_conv = EqualizedConv2d(ch0 + 1 + extra, ch0, 3, padding=1,
                                          equalized=cfg.equalized_lr)
        self.final_dense = EqualizedLinear(ch0 * 16, ch0, equalized=cfg.equalized_lr)
        self.score = EqualizedLinear(ch0, 1, gain=1.0, equalized=cfg.equalized_lr)

    def forward(self, image: torch.Tensor, mask: torch.Tensor,
                stage: int, alpha: float = 1.0) -> torch.Tensor:
        """image: (B, 1, r, r) at the stage resolution; mask at the same size."""
        if stage >= self.schedule.n_stages:
            raise ValueError(f"stage {stage} beyond schedule")
        res = self.schedule.stages[stage]
        if image.shape[-1] != res or mask.shape[-1] != res:
            raise ValueError(f"expected {res}x{res} inputs at stage {stage}, "
                             f"got image {tuple(image.shape[-2:])} mask {tuple(mask.shape[-2:])}")
        h = F.leaky_relu(self.from_rgb[stage](torch.cat([image, mask], dim=1)), 0.2)
        for s in range(stage, 0, -1):
            h = self.blocks[s - 1](h, _pool_mask(mask, self.schedule.stages[s]))
            if s == stage and alpha < 1.0:
                pooled_img = F.avg_pool2d(image, 2)
                pooled_msk = F.avg_pool2d(mask, 2)
                skip = F.leaky_relu(
                    self.from_rgb[stage - 1](torch.cat([pooled_img, pooled_msk], dim=1)), 0.2)
                h = alpha * h + (1.0 - alpha) * skip
        h = torch.cat([h, _pool_mask(mask, 4)], dim=1)
        if self.mbstd is not None:
            h = self.mbstd(h)
        h = F.leaky_relu(self.final_conv(h), 0.2)
        h = F.leaky_relu(self.final_dense(h.flatten(1)), 0.2)
        return self.score(h).squeeze(1)


@dataclass
class CpgGan:
    generator: Generator
    critic: Critic
    schedule: ProgressiveSchedule
    config: GanNetConfig


def build_nets(schedule: ProgressiveSchedule, cfg: GanNetConfig | None = None,
               seed: int | None = None) -> CpgGan:
    cfg = cfg or GanNetConfig()
    if seed is not None:
        torch.manual_seed(seed)
    return CpgGan(generator=Generator(schedule, cfg), critic=Critic(schedule, cfg),
                  schedule=schedule, config=cfg)
