"""Flat conditional baseline: encoder-decoder generator with skip connections
mapping (mask || noise) to an image, and a 3-stage downsampling critic."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn


@dataclass(frozen=True)
class UNetConfig:
    depth: int = 4                    # encoder/decoder levels, fixed by design
    base_channels: int = 24
    skip_connections: bool = True
    noise_mode: str = "field"         # "field": extra input channel; "dropout"
    critic_downsample_layers: int = 3
    critic_channels: int = 32

    def __post_init__(self):
        if self.depth != 4:
            raise ValueError("generator depth is fixed at 4")
        if self.noise_mode not in ("field", "dropout"):
            raise ValueError("noise_mode must be 'field' or 'dropout'")


class UNetGenerator(nn.Module):
    def __init__(self, resolution: int, cfg: UNetConfig | None = None):
        super().__init__()
        cfg = cfg or UNetConfig()
        self.cfg = cfg
        self.resolution = resolution
        c = cfg.base_channels
        enc_ch = [c, 2 * c, 4 * c, 8 * c]
        in_ch = 1 if cfg.noise_mode == "dropout" else 2
        self.encoders = nn.ModuleList()
        prev = in_ch
        for i, ch in enumerate(enc_ch):
            block = [nn.Conv2d(prev, ch, 4, stride=2, padding=1)]
            if i > 0:
                block.append(nn.BatchNorm2d(ch))
            block.append(nn.LeakyReLU(0.2))
            self.encoders.append(nn.Sequential(*block))
            prev = ch
        self.decoders = nn.ModuleList()
        dec_ch = [4 * c, 2 * c, c, c]
        for i, ch in enumerate(dec_ch):
            extra = enc_ch[-(i + 2)] if (cfg.skip_connections and i < 3) else 0
            self.decoders.append(nn.Sequential(
                nn.ConvTranspose2d(prev, ch, 4, stride=2, padding=1),
                nn.BatchNorm2d(ch), nn.ReLU()))
            prev = ch + extra
        self.out = nn.Conv2d(prev, 1, 1)
        self.dropout = nn.Dropout2d(0.5) if cfg.noise_mode == "dropout" else None

    def forward(self, mask: torch.Tensor, noise: torch.Tensor | None = None) -> torch.Tensor:
        """mask: (B,1,R,R) in [0,1]; noise: (B,1,R,R) field (ignored in dropout mode)."""
        if self.cfg.noise_mode == "dropout":
            h = mask
        else:
            if noise is None:
                raise ValueError("noise field required")
            if noise.shape != mask.shape:
                raise ValueError("noise must match the mask shape")
            h = torch.cat([mask, noise], dim=1)
        skips = []
        for enc in self.encoders:
            h = enc(h)
            skips.append(h)
        for i, dec in enumerate(self.decoders):
            h = dec(h)
            if self.dropout is not None and i < 2:
                h = self.dropout(h)
            if self.cfg.skip_connections and i < 3:
                h = torch.cat([h, skips[-(i + 2)]], dim=1)
        return torch.tanh(self.out(h))


class UNetCritic(nn.Module):
    """(image || mask) through 3 strided conv stages to a scalar score.

    No normalization layers: per-sample gradients must stay decoupled for the
    gradient penalty.
    """

    def __init__(self, resolution: int, cfg: UNetConfig | None = None):
        super().__init__()
        cfg = cfg or UNetConfig()
        c = cfg.critic_channels
        layers = []
        prev = 2
        for i in range(cfg.critic_downsample_layers):
            layers += [nn.Conv2d(prev, c * 2 ** i, 4, stride=2, padding=1), nn.LeakyReLU(0.2)]
            prev = c * 2 ** i
        self.features = nn.Sequential(*layers)
        feat_res = resolution // 2 ** cfg.critic_downsample_layers
        self.score = nn.Linear(prev * feat_res * feat_res, 1)

    def forward(self, image: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if image.shape != mask.shape:
            raise ValueError("image and mask must share a shape")
        h = self.features(torch.cat([image, mask], dim=1))
        return self.score(h.flatten(1)).squeeze(1)


def build_unet_nets(resolution: int, cfg: UNetConfig | None = None):
    cfg = cfg or UNetConfig()
    return UNetGenerator(resolution, cfg), UNetCritic(resolution, cfg)
