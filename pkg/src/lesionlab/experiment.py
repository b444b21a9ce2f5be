"""Augmentation ablation matrix: ten setups crossing three GAN variants with
three synthetic-pool sizes against the real-only baseline, each trained,
model-selected on validation and scored once on the untouched test split."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import ClassicAugmentConfig
from .config import DetTrainConfig, config_to_dict, save_yaml
from .detect.train import run_inference, train_detector
from .gan.checkpoint import GanCheckpoint
from .gan.sample import SampleRequest, sample_images
from .metrics import ResultsRow, evaluate, results_csv
from .phantom import DatasetSplits, ImageRecord

log = logging.getLogger(__name__)

# (variant checkpoint key, paper-scale synthetic count) per setup id
SETUPS: dict[str, tuple[str | None, int]] = {
    "real_only": (None, 0),
    "cpggan_4k": ("cpggan", 4000),
    "cpggan_8k": ("cpggan", 8000),
    "cpggan_12k": ("cpggan", 12000),
    "cpggan_normal_4k": ("cpggan_normal", 4000),
    "cpggan_normal_8k": ("cpggan_normal", 8000),
    "cpggan_normal_12k": ("cpggan_normal", 12000),
    "img2img_4k": ("img2img", 4000),
    "img2img_8k": ("img2img", 8000),
    "img2img_12k": ("img2img", 12000),
}

PAPER_REAL_COUNT = 2813  # real training images behind the published counts


@dataclass(frozen=True)
class MatrixConfig:
    setups: tuple[str, ...] = tuple(SETUPS)
    scale_counts_to_corpus: bool = True   # keep the synthetic/real ratio at desk scale
    sample_augment: bool = True
    quality_filter: float = 20.0
    master_seed: int = 0

    def __post_init__(self):
        unknown = [s for s in self.setups if s not in SETUPS]
        if unknown:
            raise ValueError(f"unknown setups: {unknown}")


@dataclass
class ExperimentRun:
    setup_id: str
    synthetic_count: int
    gan_variant: str | None
    seed: int
    detector_pool_ids: set = field(default_factory=set)
    gan_training_ids: set = field(default_factory=set)
    result: object = None


def synthetic_count_for(setup_id: str, n_real_train: int,
                        config: MatrixConfig) -> int:
    _, paper_count = SETUPS[setup_id]
    if paper_count == 0:
        return 0
    if not config.scale_counts_to_corpus:
        return paper_count
    return int(round(paper_count * n_real_train / PAPER_REAL_COUNT))


def row_label(setup_id: str, n_real: int, count: int) -> str:
    if setup_id == "real_only":
        return f"{n_real:,} real images"
    variant, _ = SETUPS[setup_id]
    if variant == "cpggan":
        return f"+ {count:,} CPGGAN-based DA"
    if variant == "cpggan_normal":
        return f"+ {count:,} CPGGAN-based DA (+ normal)"
    return f"+ {count:,} Image-to-Image GAN-based DA"


def _assert_fair(run: ExperimentRun, splits: DatasetSplits) -> None:
    test_ids = {r.record_id for r in splits.test}
    leaked = test_ids & (run.detector_pool_ids | run.gan_training_ids)
    if leaked:
        raise AssertionError(f"test records leaked into {run.setup_id}: {sorted(leaked)[:5]}")


def run_matrix(config: MatrixConfig, splits: DatasetSplits,
               checkpoints: dict[str, GanCheckpoint],
               det_config: DetTrainConfig,
               augment_cfg: ClassicAugmentConfig | None = None,
               out_dir: str | Path | None = None,
               train_fn=train_detector, sample_fn=sample_images,
               eval_fn=None) -> tuple[list[ResultsRow], list[ExperimentRun]]:
    """Execute every configured setup; a missing checkpoint skips that run."""
    n_real = len(splits.train)
    annotation_source = [r.boxes for r in splits.train if r.boxes]
    rows: list[ResultsRow] = []
    runs: list[ExperimentRun] = []

    for setup_id in config.setups:
        variant, _ = SETUPS[setup_id]
        count = synthetic_count_for(setup_id, n_real, config)
        run = ExperimentRun(setup_id=setup_id, synthetic_count=count,
                            gan_variant=variant, seed=config.master_seed)
        if variant is not None and variant not in checkpoints:
            log.warning("setup %s skipped: no %s checkpoint", setup_id, variant)
            continue

        pool = list(splits.train)
        if count > 0:
            ckpt = checkpoints[variant]
            run.gan_training_ids = set(ckpt.trained_record_ids)
            request = SampleRequest(count=count, annotation_source=annotation_source,
                                    augment=config.sample_augment,
                                    quality_filter=config.quality_filter)
            rng = np.random.default_rng([config.master_seed, zlib.crc32(setup_id.encode())])
            synthetic = sample_fn(ckpt, request, rng)
            pool += synthetic
        run.detector_pool_ids = {r.record_id for r in pool}
        _assert_fair(run, splits)

        det_ckpt = train_fn(det_config, pool, val_records=splits.val,
                            augment_cfg=augment_cfg)
        if eval_fn is None:
            from .detect.anchors import AnchorSet
            from .detect.train import build_detector
            net = build_detector(det_config)
            net.load_state_dict(det_ckpt.state)
            dets, gts = run_inference(net, splits.test, AnchorSet(det_ckpt.anchors),
                                      det_config)
            result = evaluate(dets, gts)
        else:
            result = eval_fn(det_ckpt, splits.test)
        run.result = result
        rows.append(ResultsRow.from_eval(row_label(setup_id, n_real, count), result))
        runs.append(run)
        log.info("setup %s: sens@0.5=%.3f fps@0.5=%.2f", setup_id,
                 result.sensitivity(0.5), result.fps_per_slice(0.5))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        results_csv(rows, out_dir / "results.csv")
        save_yaml({"matrix": config_to_dict(config),
                   "detector": config_to_dict(det_config),
                   "setups_run": [r.setup_id for r in runs]},
                  out_dir / "effective_config.yaml")
    return rows, runs


def collect_training_ids(config: MatrixConfig, splits: DatasetSplits,
                         checkpoints: dict[str, GanCheckpoint]) -> dict[str, set]:
    """Training-input id sets per setup (detector pool + GAN inputs), without
    training anything. Synthetic records are excluded: they carry no real id."""
    train_ids = {r.record_id for r in splits.train}
    out = {}
    for setup_id in config.setups:
        variant, _ = SETUPS[setup_id]
        ids = set(train_ids)
        if variant is not None and variant in checkpoints:
            ids |= set(checkpoints[variant].trained_record_ids)
        out[setup_id] = ids
    return out
