"""Building blocks shared by the progressive generator and critic."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn


class EqualizedConv2d(nn.Module):
    """Conv with unit-normal init and runtime He scaling (equalized LR)."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, padding: int = 0,
                 gain: float = math.sqrt(2.0), equalized: bool = True):
        super().__init__()
        self.weight = nn.Parameter(torch.randn(out_ch, in_ch, kernel, kernel))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        self.padding = padding
        fan_in = in_ch * kernel * kernel
        if equalized:
            self.scale = gain / math.sqrt(fan_in)
        else:
            self.scale = 1.0
            with torch.no_grad():
                self.weight.mul_(gain / math.sqrt(fan_in))

    def forward(self, x):
        return F.conv2d(x, self.weight * self.scale, self.bias, padding=self.padding)


class EqualizedLinear(nn.Module):
    def __init__(self, in_features: int, out_features: int,
                 gain: float = math.sqrt(2.0), equalized: bool = True):
        super().__init__()
        self.weight = nn.Parameter(torch.randn(out_features, in_features))
        self.bias = nn.Parameter(torch.zeros(out_features))
        if equalized:
            self.scale = gain / math.sqrt(in_features)
        else:
            self.scale = 1.0
            with torch.no_grad():
                self.weight.mul_(gain / math.sqrt(in_features))

    def forward(self, x):
        return F.linear(x, self.weight * self.scale, self.bias)


class PixelNorm(nn.Module):
    def forward(self, x):
        return x * torch.rsqrt(torch.mean(x * x, dim=1, keepdim=True) + 1e-8)


class MinibatchStdDev(nn.Module):
    """Append one channel holding the batch-wide feature std (PGGAN trick)."""

    def forward(self, x):
        if x.shape[0] == 1:
            stat = x.new_zeros(())
        else:
            stat = torch.sqrt(x.var(dim=0, unbiased=False) + 1e-8).mean()
        feat = stat.expand(x.shape[0], 1, x.shape[2], x.shape[3])
        return torch.cat([x, feat], dim=1)
