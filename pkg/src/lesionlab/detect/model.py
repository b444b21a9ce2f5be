"""Compact fully-convolutional backbone with a single-scale grid head."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels // 2, 1)
        self.conv2 = nn.Conv2d(channels // 2, channels, 3, padding=1)

    def forward(self, x):
        h = F.leaky_relu(self.conv1(x), 0.1)
        h = F.leaky_relu(self.conv2(h), 0.1)
        return x + h


class DetectorNet(nn.Module):
    """Stride-8 feature extractor; output (N, B*5 + C, H/8, W/8).

    Fully convolutional, so train and eval resolutions may differ as long as
    both are multiples of the stride.
    """

    STRIDE = 8

    def __init__(self, num_anchors: int, num_classes: int = 1,
                 base_channels: int = 16, num_blocks: int = 4):
        super().__init__()
        c = base_channels
        self.stem = nn.Conv2d(1, c, 3, padding=1)
        downs, blocks = [], []
        ch = c
        for _ in range(3):  # three stride-2 stages -> stride 8
            nxt = min(8 * c, ch * 2)
            downs.append(nn.Conv2d(ch, nxt, 3, stride=2, padding=1))
            ch = nxt
        self.downs = nn.ModuleList(downs)
        self.blocks = nn.ModuleList(ResidualBlock(ch) for _ in range(num_blocks))
        self.head = nn.Sequential(
            nn.Conv2d(ch, ch, 3, padding=1), nn.LeakyReLU(0.1),
            nn.Conv2d(ch, num_anchors * 5 + num_classes, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] % self.STRIDE or x.shape[-2] % self.STRIDE:
            raise ValueError(f"input size must be a multiple of {self.STRIDE}")
        h = F.leaky_relu(self.stem(x), 0.1)
        for down in self.downs:
            h = F.leaky_relu(down(h), 0.1)
        for block in self.blocks:
            h = block(h)
        return self.head(h)
