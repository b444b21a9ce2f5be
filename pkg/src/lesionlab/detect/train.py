"""Detector training: anchors from this run's boxes, online classic
augmentation, periodic validation checkpoints for model selection."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from ..augment import ClassicAugmentConfig, classic_augment
from ..config import DetTrainConfig, config_to_dict
from ..geometry import BoundingBox
from ..metrics import EvalResult, evaluate, select_model
from ..phantom import ImageRecord
from .anchors import AnchorSet, compute_anchors
from .grid import (DetLossConfig, Detection, activate_raw, decode_predictions,
                   detection_loss, encode_targets, stack_targets)
from .model import DetectorNet

log = logging.getLogger(__name__)


@dataclass
class DetectorCheckpoint:
    config: dict
    anchors: np.ndarray          # native-resolution pixels
    native_resolution: int
    step: int
    state: dict
    checkpoint_states: dict = field(default_factory=dict)   # step -> state dict
    checkpoint_evals: list = field(default_factory=list)    # (step, EvalResult)
    selected_step: int | None = None
    trained_record_ids: list = field(default_factory=list)
    loss_history: list = field(default_factory=list)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save({"config": json.dumps(self.config), "anchors": torch.as_tensor(self.anchors),
                    "native_resolution": self.native_resolution, "step": self.step,
                    "state": self.state,
                    "trained_record_ids": list(self.trained_record_ids)}, path)
        return path


def _scale_boxes(boxes: list[BoundingBox], factor: float, size: int) -> list[BoundingBox]:
    out = []
    for b in boxes:
        x0 = int(np.clip(round(b.x_min * factor), 0, size - 1))
        y0 = int(np.clip(round(b.y_min * factor), 0, size - 1))
        x1 = int(np.clip(round(b.x_max * factor), x0 + 1, size))
        y1 = int(np.clip(round(b.y_max * factor), y0 + 1, size))
        out.append(BoundingBox(x0, y0, x1, y1))
    return out


def _resize_batch(images: np.ndarray, resolution: int) -> torch.Tensor:
    x = torch.from_numpy(images.astype(np.float32) / 127.5 - 1.0).unsqueeze(1)
    if x.shape[-1] != resolution:
        x = F.interpolate(x, size=(resolution, resolution), mode="bilinear",
                          align_corners=False)
    return x


def build_detector(config: DetTrainConfig) -> DetectorNet:
    return DetectorNet(num_anchors=config.num_anchors, num_classes=1,
                       base_channels=config.base_channels, num_blocks=config.num_blocks)


def _loss_config(config: DetTrainConfig) -> DetLossConfig:
    return DetLossConfig(grid_size=config.grid_size, num_anchors=config.num_anchors,
                         lambda_coord=config.lambda_coord, lambda_noobj=config.lambda_noobj)


def run_inference(net: DetectorNet, records: list[ImageRecord], anchors: AnchorSet,
                  config: DetTrainConfig, resolution: int | None = None,
                  ) -> tuple[list[list[Detection]], list[list[BoundingBox]]]:
    """Detections and (resolution-scaled) ground truth for each record."""
    resolution = resolution or config.eval_resolution
    native = records[0].image.shape[0]
    factor = resolution / native
    anchors_eval = anchors.scaled(factor)
    net.eval()
    dets, gts = [], []
    with torch.no_grad():
        for start in range(0, len(records), 32):
            chunk = records[start:start + 32]
            x = _resize_batch(np.stack([r.image for r in chunk]), resolution)
            raw = net(x)
            for i, rec in enumerate(chunk):
                dets.append(decode_predictions(raw[i], anchors_eval,
                                               conf_threshold=config.conf_threshold,
                                               nms_iou=config.nms_iou,
                                               image_size=resolution))
                gts.append(_scale_boxes(rec.boxes, factor, resolution))
    net.train()
    return dets, gts


def train_detector(config: DetTrainConfig, records: list[ImageRecord],
                   val_records: list[ImageRecord] | None = None,
                   augment_cfg: ClassicAugmentConfig | None = None,
                   out_dir: str | Path | None = None,
                   log_every: int = 0) -> DetectorCheckpoint:
    """Train at ``train_resolution``; validation checkpoints are evaluated at
    ``eval_resolution`` and the best model in the selection window is kept."""
    if not records:
        raise ValueError("empty training set")
    stride = config.train_resolution // config.grid_size
    if stride != DetectorNet.STRIDE:
        raise ValueError(f"train_resolution/grid_size stride {stride} must equal "
                         f"the backbone stride {DetectorNet.STRIDE}")
    native = records[0].image.shape[0]
    boxes = [b for r in records for b in r.boxes]
    anchors_native = compute_anchors(boxes, config.num_anchors, seed=config.seed)
    factor = config.train_resolution / native
    anchors_train = anchors_native.scaled(factor)
    loss_cfg = _loss_config(config)
    aug_cfg = augment_cfg or ClassicAugmentConfig()

    torch.manual_seed(config.seed)
    net = build_detector(config)
    opt = torch.optim.Adam(net.parameters(), lr=config.adam_lr)
    rng = np.random.default_rng(config.seed)
    n = len(records)

    def snapshot() -> dict:
        return {k: v.detach().clone() for k, v in net.state_dict().items()}

    ckpt = DetectorCheckpoint(
        config=config_to_dict(config), anchors=anchors_native.anchors,
        native_resolution=native, step=0, state=snapshot(),
        trained_record_ids=[r.record_id for r in records])

    t0 = time.time()
    losses = []
    for step in range(1, config.total_steps + 1):
        idx = rng.integers(0, n, config.batch_size)
        batch = [records[i] for i in idx]
        if config.augment:
            batch = [classic_augment(r, rng, aug_cfg) for r in batch]
        x = _resize_batch(np.stack([r.image for r in batch]), config.train_resolution)
        targets = [encode_targets(_scale_boxes(r.boxes, factor, config.train_resolution),
                                  config.train_resolution, loss_cfg, anchors_train)
                   for r in batch]
        raw = net(x)
        maps = activate_raw(raw, anchors_train, config.train_resolution / config.grid_size)
        loss = detection_loss(maps, stack_targets(targets), loss_cfg)
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        losses.append(float(loss.item()))

        if log_every and step % log_every == 0:
            log.info("det step %d/%d loss=%.4f (%.1f it/s)", step, config.total_steps,
                     loss.item(), step / (time.time() - t0))
        if config.checkpoint_every and step % config.checkpoint_every == 0:
            ckpt.checkpoint_states[step] = snapshot()
            if val_records:
                dets, gts = run_inference(net, val_records, anchors_native, config)
                ev = evaluate(dets, gts)
                ckpt.checkpoint_evals.append((step, ev))
                log.info("det ckpt %d: val sens@0.5=%.3f fps=%.2f", step,
                         ev.sensitivity(0.5), ev.fps_per_slice(0.5))

    ckpt.step = config.total_steps
    ckpt.state = snapshot()
    ckpt.loss_history = losses
    if ckpt.checkpoint_evals:
        lo = int(config.selection_window[0] * config.total_steps)
        hi = int(config.selection_window[1] * config.total_steps)
        ckpt.selected_step = select_model(ckpt.checkpoint_evals, (lo, hi))
        ckpt.state = ckpt.checkpoint_states[ckpt.selected_step]
    if out_dir:
        ckpt.save(Path(out_dir) / "detector.pt")
    return ckpt


def load_detector(path: str | Path, config: DetTrainConfig
                  ) -> tuple[DetectorNet, AnchorSet, int]:
    data = torch.load(path, weights_only=True)
    net = build_detector(config)
    net.load_state_dict(data["state"])
    return net, AnchorSet(data["anchors"].numpy()), data["native_resolution"]
