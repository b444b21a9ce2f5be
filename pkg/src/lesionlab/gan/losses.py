"""Wasserstein critic/generator objectives with gradient penalty."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch


@dataclass(frozen=True)
class GanLossConfig:
    lambda_gp: float = 10.0
    drift_epsilon: float = 0.0  # optional score-magnitude regularizer

    def __post_init__(self):
        if self.lambda_gp < 0:
            raise ValueError("lambda_gp must be >= 0")


def critic_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor,
                gp_value: torch.Tensor | float = 0.0) -> torch.Tensor:
    """mean(fake) - mean(real) + gradient penalty; the critic minimizes this."""
    real_scores = torch.as_tensor(real_scores, dtype=torch.float64
                                  if not torch.is_tensor(real_scores) else None)
    fake_scores = torch.as_tensor(fake_scores, dtype=torch.float64
                                  if not torch.is_tensor(fake_scores) else None)
    if real_scores.numel() == 0 or fake_scores.numel() == 0:
        raise ValueError("score batches must be nonempty")
    return fake_scores.mean() - real_scores.mean() + gp_value


def generator_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    fake_scores = torch.as_tensor(fake_scores, dtype=torch.float64
                                  if not torch.is_tensor(fake_scores) else None)
    if fake_scores.numel() == 0:
        raise ValueError("score batch must be nonempty")
    return -fake_scores.mean()


def gradient_penalty(critic: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
                     real_batch: torch.Tensor, fake_batch: torch.Tensor,
                     masks: torch.Tensor, lambda_gp: float = 10.0,
                     rng: torch.Generator | None = None) -> torch.Tensor:
    """lambda * E[(||grad D(y_hat)||_2 - 1)^2] on per-pair interpolates.

    y_hat = eps*real + (1-eps)*fake with a per-sample scalar eps ~ U[0,1];
    the mask is passed through unperturbed and the gradient is taken with
    respect to the interpolated image.
    """
    if real_batch.shape != fake_batch.shape:
        raise ValueError("real/fake batches must be aligned one-to-one")
    b = real_batch.shape[0]
    eps = torch.rand((b,) + (1,) * (real_batch.dim() - 1),
                     generator=rng, dtype=real_batch.dtype)
    interp = (eps * real_batch + (1.0 - eps) * fake_batch).detach().requires_grad_(True)
    scores = critic(interp, masks)
    grads = torch.autograd.grad(scores.sum(), interp, create_graph=True)[0]
    norms = grads.flatten(1).norm(2, dim=1)
    return lambda_gp * ((norms - 1.0) ** 2).mean()
