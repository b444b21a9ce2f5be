"""Grid target encoding, the five-term sum-squared detection loss, and
decoding with confidence thresholding plus greedy non-maximum suppression.

Parameterization (fixed so the loss is reproducible): x, y are
sigmoid-bounded offsets of the box center within its cell; w, h are predicted
in pixels (the head exponentiates anchor-relative raw values) and enter the
loss through their square roots.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from ..geometry import BoundingBox
from .anchors import AnchorSet, wh_iou

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetLossConfig:
    grid_size: int
    num_anchors: int
    lambda_coord: float = 5.0
    lambda_noobj: float = 0.5
    num_classes: int = 1

    def __post_init__(self):
        if self.lambda_coord <= 0 or self.lambda_noobj <= 0:
            raise ValueError("loss weights must be positive")


@dataclass
class GridTarget:
    obj: np.ndarray   # (S, S, B) responsibility indicator
    xy: np.ndarray    # (S, S, B, 2) cell offsets in [0, 1)
    wh: np.ndarray    # (S, S, B, 2) box size in pixels
    cls: np.ndarray   # (S, S, C) per-cell class probabilities
    cell_obj: np.ndarray  # (S, S) cell-level indicator for the class term


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    confidence: float
    class_prob: float = 1.0


def encode_targets(boxes: list[BoundingBox], image_size: int,
                   cfg: DetLossConfig, anchors: AnchorSet) -> GridTarget:
    """Assign each box to its center cell and best-IoU anchor (ties: lowest index)."""
    s, b = cfg.grid_size, cfg.num_anchors
    if len(anchors) != b:
        raise ValueError(f"anchor set size {len(anchors)} != configured {b}")
    t = GridTarget(obj=np.zeros((s, s, b)), xy=np.zeros((s, s, b, 2)),
                   wh=np.zeros((s, s, b, 2)), cls=np.zeros((s, s, cfg.num_classes)),
                   cell_obj=np.zeros((s, s)))
    cell = image_size / s
    for box in boxes:
        cx, cy = box.center
        col = min(int(cx / cell), s - 1)
        row = min(int(cy / cell), s - 1)
        ious = wh_iou(np.array([[box.width, box.height]]), anchors.anchors)[0]
        for j in np.argsort(-ious, kind="stable"):
            if t.obj[row, col, j] == 0:
                t.obj[row, col, j] = 1.0
                t.xy[row, col, j] = (cx / cell - col, cy / cell - row)
                t.wh[row, col, j] = (box.width, box.height)
                t.cls[row, col, 0] = 1.0
                t.cell_obj[row, col] = 1.0
                break
        else:
            log.warning("cell (%d,%d) has more boxes than anchors; dropped %s",
                        row, col, box)
    return t


def _as_tensor(x) -> torch.Tensor:
    return x if torch.is_tensor(x) else torch.as_tensor(x, dtype=torch.float64)


def stack_targets(targets: list[GridTarget]) -> GridTarget:
    """Stack per-image targets into one batched target (leading N axis)."""
    return GridTarget(obj=np.stack([t.obj for t in targets]),
                      xy=np.stack([t.xy for t in targets]),
                      wh=np.stack([t.wh for t in targets]),
                      cls=np.stack([t.cls for t in targets]),
                      cell_obj=np.stack([t.cell_obj for t in targets]))


def detection_loss(pred: dict, target: GridTarget, cfg: DetLossConfig) -> torch.Tensor:
    """Five-term sum-squared error.

    ``pred`` holds activated maps: xy (S,S,B,2) in [0,1], wh (S,S,B,2) in
    pixels, conf (S,S,B) in [0,1], cls (S,S,C) in [0,1]. A leading batch
    dimension is accepted on every map (with a correspondingly batched
    target); the loss is then averaged over the batch.
    """
    xy, wh = _as_tensor(pred["xy"]), _as_tensor(pred["wh"])
    conf, cls = _as_tensor(pred["conf"]), _as_tensor(pred["cls"])
    batched = xy.dim() == 5
    if not batched:
        xy, wh, conf, cls = xy[None], wh[None], conf[None], cls[None]

    obj = torch.as_tensor(target.obj, dtype=xy.dtype)
    t_xy = torch.as_tensor(target.xy, dtype=xy.dtype)
    t_wh = torch.as_tensor(target.wh, dtype=xy.dtype)
    t_cls = torch.as_tensor(target.cls, dtype=xy.dtype)
    cell_obj = torch.as_tensor(target.cell_obj, dtype=xy.dtype)
    if obj.dim() == 3:  # single-image target
        obj, t_xy, t_wh = obj[None], t_xy[None], t_wh[None]
        t_cls, cell_obj = t_cls[None], cell_obj[None]
    noobj = 1.0 - obj

    if (wh < 0).any():
        log.warning("negative predicted w/h clamped to 0 before sqrt")
    # tiny floor keeps sqrt differentiable where the obj mask zeroes the term
    wh_sqrt = wh.clamp(min=1e-12).sqrt()

    coord = (obj * ((xy - t_xy) ** 2).sum(-1)).sum((1, 2, 3))
    size = (obj * ((wh_sqrt - t_wh.sqrt()) ** 2).sum(-1)).sum((1, 2, 3))
    conf_obj = (obj * (conf - obj) ** 2).sum((1, 2, 3))
    conf_noobj = (noobj * (conf - obj) ** 2).sum((1, 2, 3))
    class_term = (cell_obj * ((cls - t_cls) ** 2).sum(-1)).sum((1, 2))
    total = (cfg.lambda_coord * coord + cfg.lambda_coord * size + conf_obj
             + cfg.lambda_noobj * conf_noobj + class_term)
    return total.mean()


def activate_raw(raw: torch.Tensor, anchors: AnchorSet, cell_pixels: float) -> dict:
    """Head output (N, B*5+C, S, S) -> activated prediction maps.

    Channel layout per anchor: [tx, ty, tw, th, tconf], then C class logits.
    """
    n, ch, s, _ = raw.shape
    b = len(anchors)
    per = raw[:, :b * 5].reshape(n, b, 5, s, s).permute(0, 3, 4, 1, 2)  # N,S,S,B,5
    xy = torch.sigmoid(per[..., 0:2])
    anc = torch.as_tensor(anchors.anchors, dtype=raw.dtype)  # (B,2) pixels
    wh = torch.exp(per[..., 2:4].clamp(max=8.0)) * anc
    conf = torch.sigmoid(per[..., 4])
    cls = torch.sigmoid(raw[:, b * 5:].permute(0, 2, 3, 1))  # N,S,S,C
    return {"xy": xy, "wh": wh, "conf": conf, "cls": cls, "cell_pixels": cell_pixels}


def target_to_raw(target: GridTarget, anchors: AnchorSet,
                  logit_scale: float = 14.0) -> torch.Tensor:
    """Inverse of activate_raw for an exact target (test/oracle helper)."""
    s, _, b = target.obj.shape
    c = target.cls.shape[-1]
    raw = np.full((b, 5, s, s), -logit_scale)
    eps = 1e-7
    xy = np.clip(target.xy, eps, 1 - eps)
    raw[:, 0] = np.log(xy[..., 0] / (1 - xy[..., 0])).transpose(2, 0, 1)
    raw[:, 1] = np.log(xy[..., 1] / (1 - xy[..., 1])).transpose(2, 0, 1)
    wh = np.maximum(target.wh, eps)
    anc = anchors.anchors[None, None]
    raw[:, 2] = np.log(wh[..., 0] / anc[..., 0]).transpose(2, 0, 1)
    raw[:, 3] = np.log(wh[..., 1] / anc[..., 1]).transpose(2, 0, 1)
    raw[:, 4] = np.where(target.obj.transpose(2, 0, 1) > 0, logit_scale, -logit_scale)
    cls_raw = np.where(target.cls > 0.5, logit_scale, -logit_scale).transpose(2, 0, 1)
    out = np.concatenate([raw.reshape(b * 5, s, s), cls_raw], axis=0)
    return torch.as_tensor(out[None], dtype=torch.float64)


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = max(0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def nms(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy suppression, highest confidence first; survivors never overlap
    above the threshold. Vectorized for large candidate sets."""
    if len(detections) > 32:
        return _nms_vectorized(detections, iou_threshold)
    pending = sorted(detections, key=lambda d: -d.confidence)
    kept: list[Detection] = []
    for det in pending:
        if all(box_iou(det.box, k.box) <= iou_threshold for k in kept):
            kept.append(det)
    return kept


def _nms_vectorized(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    boxes = np.array([detections[i].box.to_tuple() for i in order], dtype=np.float64)
    x0, y0, x1, y1 = boxes.T
    areas = (x1 - x0) * (y1 - y0)
    alive = np.ones(len(order), dtype=bool)
    kept_idx = []
    for i in range(len(order)):
        if not alive[i]:
            continue
        kept_idx.append(order[i])
        rest = np.nonzero(alive[i + 1:])[0] + i + 1
        if rest.size == 0:
            continue
        ix = np.maximum(0.0, np.minimum(x1[i], x1[rest]) - np.maximum(x0[i], x0[rest]))
        iy = np.maximum(0.0, np.minimum(y1[i], y1[rest]) - np.maximum(y0[i], y0[rest]))
        inter = ix * iy
        union = areas[i] + areas[rest] - inter
        overlap = np.where(union > 0, inter / union, 0.0)
        alive[rest[overlap > iou_threshold]] = False
    return [detections[i] for i in kept_idx]


def decode_predictions(raw: torch.Tensor, anchors: AnchorSet,
                       conf_threshold: float = 0.001, nms_iou: float = 0.45,
                       image_size: int | None = None) -> list[Detection]:
    """Raw head output for ONE image -> thresholded, suppressed detections."""
    if raw.dim() == 3:
        raw = raw[None]
    if raw.shape[0] != 1:
        raise ValueError("decode one image at a time")
    s = raw.shape[-1]
    if image_size is None:
        raise ValueError("image_size required to place boxes in pixels")
    cell = image_size / s
    maps = activate_raw(raw, anchors, cell)
    xy = maps["xy"][0].detach().numpy()
    wh = maps["wh"][0].detach().numpy()
    conf = maps["conf"][0].detach().numpy()
    cls = maps["cls"][0].detach().numpy()

    detections = []
    rows, cols, js = np.nonzero(conf >= conf_threshold)
    for r, c, j in zip(rows, cols, js):
        cx = (c + xy[r, c, j, 0]) * cell
        cy = (r + xy[r, c, j, 1]) * cell
        w, h = wh[r, c, j]
        x0, y0 = cx - w / 2, cy - h / 2
        x1, y1 = cx + w / 2, cy + h / 2
        xi0, yi0 = int(np.rint(x0)), int(np.rint(y0))
        xi1, yi1 = int(np.rint(x1)), int(np.rint(y1))
        xi0, yi0 = max(0, xi0), max(0, yi0)
        xi1, yi1 = min(image_size, xi1), min(image_size, yi1)
        if xi0 >= xi1 or yi0 >= yi1:
            continue
        detections.append(Detection(box=BoundingBox(xi0, yi0, xi1, yi1),
                                    confidence=float(conf[r, c, j]),
                                    class_prob=float(cls[r, c, 0])))
    return nms(detections, nms_iou)
