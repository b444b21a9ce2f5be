"""Adversarial training loops: progressive conditional GAN and the flat
image-to-image baseline. Both use the Wasserstein objective with gradient
penalty, periodic label flipping and optional normal-image co-training.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from ..config import GanTrainConfig, config_to_dict
from ..masks import build_mask
from ..phantom import PROVENANCE_NORMAL, PROVENANCE_SYNTHETIC, ImageRecord
from .checkpoint import GanCheckpoint, save_checkpoint
from .losses import critic_loss, generator_loss, gradient_penalty
from .nets import build_nets
from .schedule import ProgressiveSchedule, build_schedule
from .unet import UNetConfig, build_unet_nets

log = logging.getLogger(__name__)


def prepare_training_arrays(records: list[ImageRecord], resolution: int):
    """Stack images ([-1,1] float32) and conditioning masks ([0,1] float32)."""
    if not records:
        raise ValueError("empty training set")
    for r in records:
        if r.provenance == PROVENANCE_SYNTHETIC:
            raise ValueError("synthetic records are not admitted to GAN training")
        if r.image.shape != (resolution, resolution):
            raise ValueError(f"record {r.record_id}: image {r.image.shape} does not "
                             f"match schedule resolution {resolution}")
    imgs = np.stack([r.image for r in records]).astype(np.float32) / 127.5 - 1.0
    msks = np.stack([build_mask(r.boxes, resolution).normalized() for r in records])
    ids = [r.record_id for r in records]
    return (torch.from_numpy(imgs).unsqueeze(1),
            torch.from_numpy(msks).unsqueeze(1), ids)


def _select_pool(config: GanTrainConfig, records: list[ImageRecord]) -> list[ImageRecord]:
    if config.include_normals:
        return list(records)
    return [r for r in records if r.provenance != PROVENANCE_NORMAL]


def flip_schedule(total_steps: int, period: int) -> list[int]:
    """1-indexed critic steps whose real/synthetic roles are swapped."""
    return [s for s in range(1, total_steps + 1) if s % period == 0]


def _is_flip_step(config: GanTrainConfig, step: int, rng: np.random.Generator) -> bool:
    if config.flip_prob is not None:
        return bool(rng.random() < config.flip_prob)
    return step % config.label_flip_period == 0


def _fade_real(real: torch.Tensor, alpha: float) -> torch.Tensor:
    # during fade-in the real distribution is blended toward its own
    # upsampled low-resolution version, mirroring the generator's skip path
    if alpha >= 1.0 or real.shape[-1] <= 4:
        return real
    low = F.interpolate(F.avg_pool2d(real, 2), scale_factor=2, mode="nearest")
    return alpha * real + (1.0 - alpha) * low


def train_gan(config: GanTrainConfig, train_records: list[ImageRecord],
              schedule: ProgressiveSchedule | None = None,
              out_dir: str | Path | None = None,
              log_every: int = 0) -> GanCheckpoint:
    """Progressive conditional training; returns the final checkpoint."""
    if schedule is None:
        schedule = build_schedule(config.target_resolution, config.fade_images,
                                  config.stable_images)
    pool = _select_pool(config, train_records)
    imgs, msks, ids = prepare_training_arrays(pool, schedule.final_resolution)

    torch.manual_seed(config.seed)
    nets = build_nets(schedule, config.net)
    return _run_adversarial(config, nets.generator, nets.critic, imgs, msks, ids,
                            schedule=schedule, arch="cpggan", out_dir=out_dir,
                            log_every=log_every)


def train_img2img(config: GanTrainConfig, train_records: list[ImageRecord],
                  unet: UNetConfig | None = None,
                  out_dir: str | Path | None = None,
                  log_every: int = 0) -> GanCheckpoint:
    """Flat encoder-decoder baseline under the same training contract."""
    unet = unet or UNetConfig()
    pool = _select_pool(config, train_records)
    imgs, msks, ids = prepare_training_arrays(pool, config.target_resolution)

    torch.manual_seed(config.seed)
    gen, crit = build_unet_nets(config.target_resolution, unet)
    return _run_adversarial(config, gen, crit, imgs, msks, ids,
                            schedule=None, arch="img2img", out_dir=out_dir,
                            log_every=log_every, unet=unet)


def _run_adversarial(config, generator, critic, imgs, msks, ids, *, schedule,
                     arch, out_dir, log_every, unet=None):
    rng = np.random.default_rng(config.seed)
    tg = torch.Generator().manual_seed(config.seed + 1)
    opt_d = torch.optim.Adam(critic.parameters(), lr=config.adam_lr, betas=config.adam_betas)
    opt_g = torch.optim.Adam(generator.parameters(), lr=config.adam_lr, betas=config.adam_betas)
    n = imgs.shape[0]
    batch = config.batch_size
    full_res = imgs.shape[-1]
    latent = config.net.latent_dim
    history = []
    cfg_dict = {"trainer": config_to_dict(config), "arch": arch}
    if unet is not None:
        cfg_dict["unet"] = config_to_dict(unet)

    def current_state(step_done: int):
        if schedule is None:
            return 0, 1.0, full_res
        stage, alpha = schedule.state_at(step_done * batch)
        return stage, alpha, schedule.stages[stage]

    def sample_latent(b):
        if arch == "img2img":
            return torch.rand((b, 1, full_res, full_res), generator=tg) * 2 - 1
        return torch.rand((b, latent), generator=tg) * 2 - 1

    def forward_g(z, mask_full, stage, alpha, res):
        m = F.avg_pool2d(mask_full, full_res // res) if res < full_res else mask_full
        if arch == "img2img":
            return generator(m, z), m
        return generator(z, m, stage, alpha), m

    def make_ckpt(step_done: int) -> GanCheckpoint:
        stage, alpha, _ = current_state(step_done)
        return GanCheckpoint(
            arch=arch, config=cfg_dict, stage=stage, alpha=alpha, step=step_done,
            generator_state={k: v.clone() for k, v in generator.state_dict().items()},
            critic_state={k: v.clone() for k, v in critic.state_dict().items()},
            loss_history=history, trained_record_ids=list(ids))

    t0 = time.time()
    for step in range(1, config.total_steps + 1):
        stage, alpha, res = current_state(step - 1)
        idx = torch.from_numpy(rng.integers(0, n, batch))
        real_full, mask_full = imgs[idx], msks[idx]
        real = F.avg_pool2d(real_full, full_res // res) if res < full_res else real_full
        real = _fade_real(real, alpha)

        z = sample_latent(batch)
        with torch.no_grad():
            fake, m = forward_g(z, mask_full, stage, alpha, res)

        critic_fn = (lambda i, mm: critic(i, mm)) if arch == "img2img" else \
            (lambda i, mm: critic(i, mm, stage, alpha))
        gp = gradient_penalty(critic_fn, real, fake, m, config.loss.lambda_gp, rng=tg)
        scores = critic_fn(torch.cat([real, fake]), torch.cat([m, m]))
        real_s, fake_s = scores[:batch], scores[batch:]
        flipped = _is_flip_step(config, step, rng)
        if flipped:
            d_loss = critic_loss(fake_s, real_s, gp)
        else:
            d_loss = critic_loss(real_s, fake_s, gp)
        if config.loss.drift_epsilon:
            d_loss = d_loss + config.loss.drift_epsilon * (real_s ** 2).mean()
        opt_d.zero_grad(set_to_none=True)
        d_loss.backward()
        opt_d.step()

        g_loss_val = None
        if step % config.critic_steps_per_gen_step == 0:
            idx_g = torch.from_numpy(rng.integers(0, n, batch))
            zg = sample_latent(batch)
            fake_g, m_g = forward_g(zg, msks[idx_g], stage, alpha, res)
            g_loss = generator_loss(critic_fn(fake_g, m_g))
            opt_g.zero_grad(set_to_none=True)
            g_loss.backward()
            opt_g.step()
            g_loss_val = float(g_loss.item())

        history.append({"step": step, "stage": stage, "alpha": round(alpha, 6),
                        "d_loss": float(d_loss.item()), "g_loss": g_loss_val,
                        "gp": float(gp.item()), "flipped": flipped})
        if log_every and step % log_every == 0:
            rate = step / (time.time() - t0)
            log.info("step %d/%d stage=%d alpha=%.3f d=%.3f g=%s (%.1f it/s)",
                     step, config.total_steps, stage, alpha, d_loss.item(),
                     f"{g_loss_val:.3f}" if g_loss_val is not None else "-", rate)
        if out_dir and config.checkpoint_every and step % config.checkpoint_every == 0:
            save_checkpoint(make_ckpt(step), Path(out_dir) / f"ckpt_{step:08d}.pt")

    final = make_ckpt(config.total_steps)
    if out_dir:
        save_checkpoint(final, Path(out_dir) / "final.pt")
    return final
