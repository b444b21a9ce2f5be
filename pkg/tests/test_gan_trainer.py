import numpy as np
import pytest
import torch

from lesionlab.config import GanTrainConfig, config_to_dict, gan_config_from_dict
from lesionlab.gan.checkpoint import GanCheckpoint, load_checkpoint, save_checkpoint
from lesionlab.gan.nets import GanNetConfig
from lesionlab.gan.sample import SampleRequest, contrast_pass, load_generator, sample_images
from lesionlab.gan.train import flip_schedule, train_gan, train_img2img
from lesionlab.gan.unet import UNetConfig
from lesionlab.geometry import BoundingBox
from lesionlab.phantom import ImageRecord


def _records(n=12, size=16, with_boxes=True, provenance="real", subject="s0"):
    rng = np.random.default_rng(42)
    recs = []
    for i in range(n):
        img = rng.integers(0, 180, (size, size), dtype=np.uint8).astype(np.uint8)
        boxes = []
        if with_boxes:
            img[4:9, 5:11] = 230
            boxes = [BoundingBox(5, 4, 11, 9)]
        recs.append(ImageRecord(image=img, boxes=boxes, subject_id=subject,
                                provenance=provenance, record_id=f"{subject}/r{i}"))
    return recs


def _tiny_config(**kw):
    defaults = dict(total_steps=6, batch_size=4, target_resolution=16,
                    fade_images=16, stable_images=16, checkpoint_every=0,
                    net=GanNetConfig(latent_dim=16, base_channels=16, min_channels=8),
                    seed=3)
    defaults.update(kw)
    return GanTrainConfig(**defaults)


class TestTrainGan:
    def test_zero_steps_returns_initialized_checkpoint(self):
        ckpt = train_gan(_tiny_config(total_steps=0), _records())
        assert ckpt.step == 0
        assert ckpt.loss_history == []
        assert ckpt.arch == "cpggan"

    def test_label_flips_on_every_third_step(self):
        ckpt = train_gan(_tiny_config(total_steps=9, label_flip_period=3), _records())
        flipped = [h["step"] for h in ckpt.loss_history if h["flipped"]]
        assert flipped == [3, 6, 9]

    def test_flip_count_floor_rule(self):
        assert flip_schedule(10, 3) == [3, 6, 9]
        assert len(flip_schedule(10, 3)) == 10 // 3
        assert flip_schedule(2, 5) == []

    def test_deterministic_loss_history(self):
        cfg = _tiny_config(total_steps=5)
        a = train_gan(cfg, _records())
        b = train_gan(cfg, _records())
        assert a.loss_history == b.loss_history

    def test_seed_changes_history(self):
        a = train_gan(_tiny_config(total_steps=3, seed=1), _records())
        b = train_gan(_tiny_config(total_steps=3, seed=2), _records())
        assert a.loss_history != b.loss_history

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_gan(_tiny_config(), [])

    def test_resolution_mismatch_rejected(self):
        with pytest.raises(ValueError, match="resolution"):
            train_gan(_tiny_config(target_resolution=32, fade_images=8, stable_images=8),
                      _records(size=16))

    def test_synthetic_records_rejected(self):
        recs = _records(provenance="synthetic")
        with pytest.raises(ValueError, match="synthetic"):
            train_gan(_tiny_config(), recs)

    def test_normals_excluded_unless_enabled(self):
        recs = _records(6) + _records(4, with_boxes=False, provenance="normal", subject="n0")
        ckpt = train_gan(_tiny_config(total_steps=1), recs)
        assert len(ckpt.trained_record_ids) == 6
        ckpt = train_gan(_tiny_config(total_steps=1, include_normals=True), recs)
        assert len(ckpt.trained_record_ids) == 10

    def test_trained_ids_recorded(self):
        ckpt = train_gan(_tiny_config(total_steps=1), _records(5))
        assert set(ckpt.trained_record_ids) == {f"s0/r{i}" for i in range(5)}


class TestCheckpointIO:
    def test_round_trip(self, tmp_path):
        ckpt = train_gan(_tiny_config(total_steps=2), _records())
        path = save_checkpoint(ckpt, tmp_path / "g.pt")
        loaded = load_checkpoint(path)
        assert loaded.step == 2
        assert loaded.arch == "cpggan"
        assert loaded.hash == ckpt.hash
        for k, v in ckpt.generator_state.items():
            assert torch.equal(loaded.generator_state[k], v)

    def test_config_mismatch_rejected(self, tmp_path):
        ckpt = train_gan(_tiny_config(total_steps=1), _records())
        path = save_checkpoint(ckpt, tmp_path / "g.pt")
        with pytest.raises(ValueError, match="different config"):
            load_checkpoint(path, expect_config={"trainer": {"other": 1}, "arch": "cpggan"})

    def test_periodic_checkpoints_written(self, tmp_path):
        cfg = _tiny_config(total_steps=4, checkpoint_every=2)
        train_gan(cfg, _records(), out_dir=tmp_path)
        names = sorted(p.name for p in tmp_path.glob("*.pt"))
        assert names == ["ckpt_00000002.pt", "ckpt_00000004.pt", "final.pt"]


@pytest.fixture(scope="module")
def trained():
    cfg = _tiny_config(total_steps=40, stable_images=40, fade_images=24)
    return train_gan(cfg, _records())


class TestSampler:
    def test_count_zero(self, trained):
        req = SampleRequest(count=0, annotation_source=[[BoundingBox(2, 2, 9, 8)]])
        assert sample_images(trained, req, np.random.default_rng(0)) == []

    def test_threshold_zero_accepts_everything(self, trained):
        req = SampleRequest(count=7, annotation_source=[[BoundingBox(2, 2, 9, 8)]],
                            quality_filter=0.0)
        recs = sample_images(trained, req, np.random.default_rng(0))
        assert len(recs) == 7
        for r in recs:
            assert r.provenance == "synthetic"
            assert r.image.shape == (16, 16)

    def test_requested_boxes_kept_exactly(self, trained):
        source = [[BoundingBox(3, 3, 10, 9)]]
        req = SampleRequest(count=4, annotation_source=source, augment=False,
                            quality_filter=0.0)
        recs = sample_images(trained, req, np.random.default_rng(1))
        for r in recs:
            assert r.boxes == source[0]

    def test_filter_predicate_holds_post_hoc(self, trained):
        req = SampleRequest(count=3, annotation_source=[[BoundingBox(4, 4, 11, 10)]],
                            quality_filter=5.0, max_attempts_factor=400)
        recs = sample_images(trained, req, np.random.default_rng(2))
        for r in recs:
            assert contrast_pass(r.image, r.boxes, 5.0)

    def test_impossible_threshold_raises_with_diagnostics(self, trained):
        req = SampleRequest(count=4, annotation_source=[[BoundingBox(2, 2, 9, 8)]],
                            quality_filter=500.0, max_attempts_factor=3)
        with pytest.raises(RuntimeError, match="acceptance rate"):
            sample_images(trained, req, np.random.default_rng(0))

    def test_mid_schedule_checkpoint_rejected(self):
        cfg = _tiny_config(total_steps=2, fade_images=400, stable_images=400)
        ckpt = train_gan(cfg, _records())
        with pytest.raises(ValueError, match="final stage"):
            load_generator(ckpt)

    def test_sampling_deterministic(self, trained):
        req = SampleRequest(count=3, annotation_source=[[BoundingBox(2, 2, 9, 8)]],
                            quality_filter=0.0)
        a = sample_images(trained, req, np.random.default_rng(5))
        b = sample_images(trained, req, np.random.default_rng(5))
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.image, rb.image)
            assert ra.boxes == rb.boxes


class TestImg2Img:
    def test_zero_steps(self):
        ckpt = train_img2img(_tiny_config(total_steps=0), _records())
        assert ckpt.step == 0
        assert ckpt.arch == "img2img"

    def test_deterministic(self):
        cfg = _tiny_config(total_steps=3)
        a = train_img2img(cfg, _records())
        b = train_img2img(cfg, _records())
        assert a.loss_history == b.loss_history

    def test_sampling_from_img2img_checkpoint(self):
        cfg = _tiny_config(total_steps=2)
        ckpt = train_img2img(cfg, _records())
        req = SampleRequest(count=2, annotation_source=[[BoundingBox(2, 2, 9, 8)]],
                            quality_filter=0.0)
        recs = sample_images(ckpt, req, np.random.default_rng(0))
        assert len(recs) == 2
        assert recs[0].image.shape == (16, 16)


def test_gan_config_round_trip():
    cfg = GanTrainConfig(total_steps=7, net=GanNetConfig(latent_dim=12),
                         fade_images=[0, 2, 3], adam_betas=(0.5, 0.9))
    d = config_to_dict(cfg)
    back = gan_config_from_dict(d)
    assert back == GanTrainConfig(total_steps=7, net=GanNetConfig(latent_dim=12),
                                  fade_images=[0, 2, 3], adam_betas=(0.5, 0.9))
