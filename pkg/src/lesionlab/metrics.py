"""Detection evaluation: IoU, greedy matching, sensitivity / FPs per slice at
dual IoU thresholds, model selection, and the results table."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .detect.grid import Detection
from .geometry import BoundingBox

THRESHOLDS = (0.5, 0.25)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union on pixel areas (half-open boxes)."""
    ix = max(0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def match_detections(detections: list[Detection], gt_boxes: list[BoundingBox],
                     iou_threshold: float) -> list[tuple[int, int]]:
    """Greedy one-to-one matching.

    Detections are visited in descending confidence (sorted here); each claims
    the still-unmatched ground-truth box of highest IoU >= threshold, ties
    broken by lowest ground-truth index. Returns (detection_idx, gt_idx) pairs
    indexed into the inputs as given.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    taken = [False] * len(gt_boxes)
    matches = []
    for di in order:
        best, best_iou = -1, iou_threshold
        for gi, gt in enumerate(gt_boxes):
            if taken[gi]:
                continue
            v = iou(detections[di].box, gt)
            if v > best_iou or (v == best_iou and v >= iou_threshold and best == -1):
                best, best_iou = gi, v
        if best >= 0:
            taken[best] = True
            matches.append((di, best))
    return matches


@dataclass(frozen=True)
class ThresholdCounts:
    matched_gt: int
    total_gt: int
    unmatched_detections: int
    slices: int

    @property
    def sensitivity(self) -> float:
        return self.matched_gt / self.total_gt

    @property
    def fps_per_slice(self) -> float:
        return self.unmatched_detections / self.slices


@dataclass(frozen=True)
class EvalResult:
    counts: dict[float, ThresholdCounts]

    def sensitivity(self, threshold: float) -> float:
        return self.counts[threshold].sensitivity

    def fps_per_slice(self, threshold: float) -> float:
        return self.counts[threshold].fps_per_slice

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.sensitivity(0.5), self.fps_per_slice(0.5),
                self.sensitivity(0.25), self.fps_per_slice(0.25))


def evaluate(per_image_detections: list[list[Detection]],
             per_image_gt: list[list[BoundingBox]],
             thresholds: tuple[float, ...] = THRESHOLDS) -> EvalResult:
    """Corpus-level sensitivity and FPs/slice, independently per threshold."""
    if len(per_image_detections) != len(per_image_gt):
        raise ValueError("detection and ground-truth image lists differ in length")
    n_slices = len(per_image_gt)
    total_gt = sum(len(g) for g in per_image_gt)
    if total_gt == 0:
        raise ValueError("sensitivity undefined: no ground-truth boxes")
    counts = {}
    for thr in thresholds:
        matched = 0
        unmatched_dets = 0
        for dets, gts in zip(per_image_detections, per_image_gt):
            m = match_detections(dets, gts, thr)
            matched += len(m)
            unmatched_dets += len(dets) - len(m)
        counts[thr] = ThresholdCounts(matched_gt=matched, total_gt=total_gt,
                                      unmatched_detections=unmatched_dets,
                                      slices=n_slices)
    return EvalResult(counts=counts)


def select_model(checkpoint_evals: list[tuple[int, EvalResult]],
                 window: tuple[int, int]) -> int:
    """Step id with the best validation sensitivity@0.5 inside [lo, hi].

    Ties broken by fewer FPs/slice@0.5, then by the earlier step.
    """
    lo, hi = window
    eligible = [(step, ev) for step, ev in checkpoint_evals if lo <= step <= hi]
    if not eligible:
        raise ValueError(f"no checkpoints inside selection window [{lo}, {hi}]")
    return min(eligible, key=lambda item: (-item[1].sensitivity(0.5),
                                           item[1].fps_per_slice(0.5), item[0]))[0]


@dataclass
class ResultsRow:
    setup: str
    sensitivity_50: float
    fps_50: float
    sensitivity_25: float
    fps_25: float

    @classmethod
    def from_eval(cls, setup: str, ev: EvalResult) -> "ResultsRow":
        s50, f50, s25, f25 = ev.as_row()
        return cls(setup, s50, f50, s25, f25)

    def csv_values(self) -> list[str]:
        return [self.setup] + [f"{v:.2f}" for v in
                               (self.sensitivity_50, self.fps_50,
                                self.sensitivity_25, self.fps_25)]


RESULTS_HEADER = ["setup", "sensitivity_iou50", "fps_per_slice_iou50",
                  "sensitivity_iou25", "fps_per_slice_iou25"]


def results_csv(rows: list[ResultsRow], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(RESULTS_HEADER)
    for row in rows:
        writer.writerow(row.csv_values())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
