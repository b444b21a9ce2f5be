"""Box-conditioning masks, their resolution pyramid and annotation augmentation.

Masks store 0/255 at full resolution; networks consume them normalized to
[0, 1]. Downsampling is repeated 2x2 average pooling on normalized values,
so the mask mean is preserved exactly at every pyramid level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox, clip_box


@dataclass(frozen=True)
class ConditioningMask:
    data: np.ndarray      # (H, W), uint8 {0,255} at full res, float in [0,1] below
    resolution: int

    def normalized(self) -> np.ndarray:
        if self.data.dtype == np.uint8:
            return self.data.astype(np.float32) / 255.0
        return self.data.astype(np.float32)


def build_mask(boxes: list[BoundingBox], size: int) -> ConditioningMask:
    """255 exactly on the union of box interiors, 0 elsewhere."""
    data = np.zeros((size, size), dtype=np.uint8)
    for b in boxes:
        if not b.inside(size):
            raise ValueError(f"box {b} outside a {size}x{size} mask")
        data[b.y_min:b.y_max, b.x_min:b.x_max] = 255
    return ConditioningMask(data=data, resolution=size)


def downsample_mask(mask: ConditioningMask, target_resolution: int) -> ConditioningMask:
    src = mask.resolution
    if target_resolution > src or target_resolution < 1:
        raise ValueError(f"cannot pool {src} -> {target_resolution}")
    ratio = src // target_resolution
    if ratio * target_resolution != src or ratio & (ratio - 1):
        raise ValueError(f"{src} -> {target_resolution} is not a power-of-two pooling")
    data = mask.normalized().astype(np.float64)
    res = src
    while res > target_resolution:
        data = data.reshape(res // 2, 2, res // 2, 2).mean(axis=(1, 3))
        res //= 2
    return ConditioningMask(data=data.astype(np.float32), resolution=target_resolution)


def mask_pyramid(mask: ConditioningMask, resolutions: list[int]) -> dict[int, np.ndarray]:
    """Normalized mask at each requested resolution (full res included as float)."""
    return {r: (mask.normalized() if r == mask.resolution
                else downsample_mask(mask, r).normalized())
            for r in resolutions}


@dataclass(frozen=True)
class BoxTransform:
    flip_h: bool = False
    flip_v: bool = False
    zoom: float = 1.0
    dx: float = 0.0
    dy: float = 0.0

    @property
    def is_identity(self) -> bool:
        return (not self.flip_h and not self.flip_v and self.zoom == 1.0
                and self.dx == 0.0 and self.dy == 0.0)


def sample_transform(rng: np.random.Generator, image_size: int,
                     max_shift: float = 0.10, max_zoom: float = 0.10,
                     allow_flips: bool = True) -> BoxTransform:
    return BoxTransform(
        flip_h=bool(allow_flips and rng.random() < 0.5),
        flip_v=bool(allow_flips and rng.random() < 0.5),
        zoom=1.0 + rng.uniform(-max_zoom, max_zoom),
        dx=rng.uniform(-max_shift, max_shift) * image_size,
        dy=rng.uniform(-max_shift, max_shift) * image_size)


def apply_transform(boxes: list[BoundingBox], image_size: int,
                    t: BoxTransform) -> list[BoundingBox]:
    if t.is_identity:
        return list(boxes)
    c = image_size / 2.0
    out = []
    for b in boxes:
        x0, y0, x1, y1 = float(b.x_min), float(b.y_min), float(b.x_max), float(b.y_max)
        if t.flip_h:
            x0, x1 = image_size - x1, image_size - x0
        if t.flip_v:
            y0, y1 = image_size - y1, image_size - y0
        x0, x1 = c + t.zoom * (x0 - c), c + t.zoom * (x1 - c)
        y0, y1 = c + t.zoom * (y0 - c), c + t.zoom * (y1 - c)
        clipped = clip_box(x0 + t.dx, y0 + t.dy, x1 + t.dx, y1 + t.dy, image_size)
        if clipped is not None:
            out.append(clipped)
    return out


def augment_annotation(boxes: list[BoundingBox], image_size: int,
                       rng: np.random.Generator,
                       max_shift: float = 0.10, max_zoom: float = 0.10,
                       allow_flips: bool = True) -> list[BoundingBox]:
    """One shared random flip/shift/zoom applied to the whole box set.

    Applies, in order: optional horizontal flip, optional vertical flip,
    isotropic zoom about the image center in [1-max_zoom, 1+max_zoom], and an
    x/y translation of at most max_shift * image_size. Results are clamped to
    the image; boxes pushed fully outside are dropped.
    """
    t = sample_transform(rng, image_size, max_shift, max_zoom, allow_flips)
    return apply_transform(boxes, image_size, t)
