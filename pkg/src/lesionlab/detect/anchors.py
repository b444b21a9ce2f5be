"""Anchor priors via k-cluster search over (w, h) with 1 - IoU distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import BoundingBox


@dataclass(frozen=True)
class AnchorSet:
    anchors: np.ndarray  # (B, 2) float, (width, height) in pixels, sorted by area

    def __post_init__(self):
        a = np.asarray(self.anchors, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 2 or a.shape[0] < 1:
            raise ValueError("anchors must be a (B, 2) array with B >= 1")
        if (a <= 0).any():
            raise ValueError("anchor sides must be positive")
        object.__setattr__(self, "anchors", a)

    def __len__(self) -> int:
        return self.anchors.shape[0]

    def scaled(self, factor: float) -> "AnchorSet":
        return AnchorSet(self.anchors * factor)


def wh_iou(wh: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """IoU of co-centered boxes; wh (N,2) against anchors (K,2) -> (N,K)."""
    wh = np.asarray(wh, dtype=np.float64).reshape(-1, 2)
    inter = (np.minimum(wh[:, None, 0], anchors[None, :, 0])
             * np.minimum(wh[:, None, 1], anchors[None, :, 1]))
    union = wh.prod(axis=1)[:, None] + anchors.prod(axis=1)[None, :] - inter
    return inter / union


def compute_anchors(train_boxes: list[BoundingBox], k: int, seed: int = 0,
                    max_iters: int = 300) -> AnchorSet:
    """Seeded k-means on box (w, h) under the 1 - IoU distance.

    Centers are updated as cluster means; an emptied cluster is reseeded with
    the box farthest from its current center. Output sorted by area.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(train_boxes) < k:
        raise ValueError(f"need at least {k} boxes, got {len(train_boxes)}")
    wh = np.array([[b.width, b.height] for b in train_boxes], dtype=np.float64)
    rng = np.random.default_rng(seed)

    unique = np.unique(wh, axis=0)
    if unique.shape[0] >= k:
        centers = unique[rng.choice(unique.shape[0], k, replace=False)].copy()
    else:
        centers = wh[rng.choice(wh.shape[0], k, replace=False)].copy()

    assignment = np.full(wh.shape[0], -1)
    for _ in range(max_iters):
        dist = 1.0 - wh_iou(wh, centers)
        new_assignment = dist.argmin(axis=1)
        if (new_assignment == assignment).all():
            break
        assignment = new_assignment
        for j in range(k):
            members = wh[assignment == j]
            if members.shape[0] == 0:
                worst = dist[np.arange(len(wh)), assignment].argmax()
                centers[j] = wh[worst]
            else:
                centers[j] = members.mean(axis=0)

    order = np.argsort(centers.prod(axis=1), kind="stable")
    return AnchorSet(centers[order])
