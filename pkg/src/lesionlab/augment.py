"""Classic online augmentation for detector training: geometric transforms
with consistent box handling plus brightness/contrast jitter."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .masks import BoxTransform, apply_transform, sample_transform
from .phantom import ImageRecord


@dataclass(frozen=True)
class ClassicAugmentConfig:
    max_shift: float = 0.10
    max_zoom: float = 0.10
    allow_flips: bool = True
    max_brightness: float = 10.0   # gray levels
    max_contrast: float = 0.10     # relative


def _affine_image(img: np.ndarray, t: BoxTransform) -> np.ndarray:
    """Apply the box transform to pixels (bilinear, zero padding)."""
    out = img.astype(np.float32)
    if t.flip_h:
        out = out[:, ::-1]
    if t.flip_v:
        out = out[::-1, :]
    if t.zoom == 1.0 and t.dx == 0.0 and t.dy == 0.0:
        return np.ascontiguousarray(out)
    size = img.shape[0]
    c = size / 2.0
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    # inverse map of x_out = zoom * (x_in - c) + c + dx
    xin = (xs - c - t.dx) / t.zoom + c - 0.5
    yin = (ys - c - t.dy) / t.zoom + c - 0.5
    x0 = np.floor(xin).astype(int)
    y0 = np.floor(yin).astype(int)
    fx, fy = xin - x0, yin - y0

    def sample(yy, xx):
        valid = (yy >= 0) & (yy < size) & (xx >= 0) & (xx < size)
        vals = np.zeros(xx.shape, dtype=np.float64)
        vals[valid] = out[yy[valid], xx[valid]]
        return vals

    v = (sample(y0, x0) * (1 - fx) * (1 - fy) + sample(y0, x0 + 1) * fx * (1 - fy)
         + sample(y0 + 1, x0) * (1 - fx) * fy + sample(y0 + 1, x0 + 1) * fx * fy)
    return v.astype(np.float32)


def classic_augment(record: ImageRecord, rng: np.random.Generator,
                    cfg: ClassicAugmentConfig | None = None) -> ImageRecord:
    """Random flip/translate/scale with box-consistent coordinates, then
    brightness/contrast jitter; boxes clamped, fully-exited boxes dropped."""
    cfg = cfg or ClassicAugmentConfig()
    size = record.image.shape[0]
    t = sample_transform(rng, size, cfg.max_shift, cfg.max_zoom, cfg.allow_flips)
    brightness = rng.uniform(-cfg.max_brightness, cfg.max_brightness)
    contrast = 1.0 + rng.uniform(-cfg.max_contrast, cfg.max_contrast)

    img = _affine_image(record.image, t)
    img = (img - 128.0) * contrast + 128.0 + brightness
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    boxes = apply_transform(record.boxes, size, t)
    return ImageRecord(image=img, boxes=boxes, subject_id=record.subject_id,
                       provenance=record.provenance, record_id=record.record_id)
