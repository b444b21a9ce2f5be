"""Sampling synthetic records from a trained checkpoint.

Annotation box-sets are drawn from the training split, optionally augmented
(flip/shift/zoom), rendered to conditioning masks and fed to the generator.
An interior-vs-annulus contrast filter drops low-quality images, resampling
until the requested count is met (bounded attempts).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..config import gan_config_from_dict
from ..geometry import BoundingBox
from ..masks import augment_annotation, build_mask
from ..phantom import PROVENANCE_SYNTHETIC, ImageRecord, box_contrast
from .checkpoint import GanCheckpoint
from .nets import build_nets
from .schedule import build_schedule
from .unet import UNetConfig, build_unet_nets

log = logging.getLogger(__name__)


@dataclass
class SampleRequest:
    count: int
    annotation_source: list[list[BoundingBox]]
    augment: bool = True
    quality_filter: float = 20.0      # gray levels; <= 0 disables the filter
    batch_size: int = 32
    max_attempts_factor: int = 10

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.count > 0 and not self.annotation_source:
            raise ValueError("annotation_source must be nonempty")


def load_generator(ckpt: GanCheckpoint) -> tuple[nn.Module, int, str]:
    """Rebuild the generator of a final-stage checkpoint; returns (net, resolution, arch)."""
    trainer_cfg = gan_config_from_dict(ckpt.config["trainer"])
    if ckpt.arch == "cpggan":
        schedule = build_schedule(trainer_cfg.target_resolution, trainer_cfg.fade_images,
                                  trainer_cfg.stable_images)
        if ckpt.stage != schedule.n_stages - 1 or ckpt.alpha < 1.0:
            raise ValueError(f"checkpoint is mid-schedule (stage {ckpt.stage}, "
                             f"alpha {ckpt.alpha}); sampling needs the final stage")
        nets = build_nets(schedule, trainer_cfg.net)
        nets.generator.load_state_dict(ckpt.generator_state)
        nets.generator.eval()
        return nets.generator, schedule.final_resolution, "cpggan"
    if ckpt.arch == "img2img":
        unet_cfg = UNetConfig(**ckpt.config.get("unet", {}))
        gen, _ = build_unet_nets(trainer_cfg.target_resolution, unet_cfg)
        gen.load_state_dict(ckpt.generator_state)
        gen.eval()
        if unet_cfg.noise_mode == "dropout":
            for m in gen.modules():
                if isinstance(m, nn.Dropout2d):
                    m.train()
        return gen, trainer_cfg.target_resolution, "img2img"
    raise ValueError(f"unknown checkpoint arch {ckpt.arch!r}")


def _generate(gen: nn.Module, arch: str, masks: torch.Tensor, latent_dim: int,
              tg: torch.Generator) -> np.ndarray:
    b = masks.shape[0]
    with torch.no_grad():
        if arch == "cpggan":
            z = torch.rand((b, latent_dim), generator=tg) * 2 - 1
            n_stages = gen.schedule.n_stages
            out = gen(z, masks, n_stages - 1, 1.0)
        else:
            noise = torch.rand(masks.shape, generator=tg) * 2 - 1
            out = gen(masks, noise)
    imgs = ((out.squeeze(1).numpy() + 1.0) * 127.5)
    return np.clip(np.rint(imgs), 0, 255).astype(np.uint8)


def contrast_pass(image: np.ndarray, boxes: list[BoundingBox], threshold: float) -> bool:
    """True when every box clears the interior-vs-annulus contrast threshold."""
    img = image.astype(np.float64)
    return all(box_contrast(img, b, boxes) >= threshold for b in boxes)


def sample_images(ckpt: GanCheckpoint, request: SampleRequest,
                  rng: np.random.Generator) -> list[ImageRecord]:
    if request.count == 0:
        return []
    gen, resolution, arch = load_generator(ckpt)
    latent_dim = gan_config_from_dict(ckpt.config["trainer"]).net.latent_dim
    tg = torch.Generator().manual_seed(int(rng.integers(2 ** 62)))

    accepted: list[ImageRecord] = []
    attempts = 0
    max_attempts = request.max_attempts_factor * request.count
    n_source = len(request.annotation_source)
    while len(accepted) < request.count:
        if attempts >= max_attempts:
            rate = len(accepted) / max(1, attempts)
            raise RuntimeError(
                f"quality filter accepted {len(accepted)}/{request.count} after "
                f"{attempts} attempts (acceptance rate {rate:.1%}, threshold "
                f"{request.quality_filter}); retrain or lower the threshold")
        b = min(request.batch_size, max_attempts - attempts)
        box_sets = []
        while len(box_sets) < b:
            boxes = list(request.annotation_source[int(rng.integers(n_source))])
            if request.augment:
                boxes = augment_annotation(boxes, resolution, rng)
                if not boxes:
                    continue  # transform pushed every box out; redraw
            box_sets.append(boxes)
        masks_np = np.stack([build_mask(bs, resolution).normalized() for bs in box_sets])
        masks = torch.from_numpy(masks_np).unsqueeze(1)
        images = _generate(gen, arch, masks, latent_dim, tg)
        for img, boxes in zip(images, box_sets):
            attempts += 1
            if request.quality_filter > 0 and not contrast_pass(img, boxes, request.quality_filter):
                continue
            i = len(accepted)
            accepted.append(ImageRecord(
                image=img, boxes=boxes, subject_id="synthetic",
                provenance=PROVENANCE_SYNTHETIC, record_id=f"synthetic/{arch}_{i:06d}"))
            if len(accepted) == request.count:
                break
    log.info("sampled %d records in %d attempts (%.1f%% accepted)",
             len(accepted), attempts, 100.0 * len(accepted) / attempts)
    return accepted
