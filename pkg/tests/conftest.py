"""Shared fixtures; heavy acceptance artifacts are cached on disk keyed by
config hash so reruns skip retraining."""

from __future__ import annotations

import os
from pathlib import Path

import pytest
import torch

torch.set_num_threads(2)

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def reference_config() -> dict:
    from lesionlab.config import load_yaml
    return load_yaml(REPO_ROOT / "configs" / "reference.yaml")


@pytest.fixture(scope="session")
def acceptance_cache() -> Path:
    cache = Path(os.environ.get("LESIONLAB_ACCEPT_CACHE",
                                REPO_ROOT / ".acceptance_cache"))
    cache.mkdir(parents=True, exist_ok=True)
    return cache


@pytest.fixture(scope="session")
def reference_corpus(reference_config):
    """Deterministic phantom corpus + subject splits + normal pool."""
    from lesionlab.phantom import PhantomSpec, generate_corpus, split_dataset

    c = reference_config["corpus"]
    spec = PhantomSpec(image_size=c["image_size"], subjects=c["subjects"],
                       slices_per_subject=c["slices_per_subject"],
                       tumor_count_range=tuple(c["tumor_count_range"]),
                       tumor_intensity_boost=c["tumor_intensity_boost"],
                       texture_seed=c["texture_seed"],
                       box_jitter_fraction=c["box_jitter_fraction"])
    records = generate_corpus(spec, rng_seed=c["seed"])
    splits = split_dataset(records, ratios=tuple(c["split_ratios"]), seed=c["seed"])
    normal_spec = PhantomSpec(image_size=c["image_size"],
                              subjects=c["normal_subjects"],
                              slices_per_subject=c["slices_per_subject"],
                              tumor_count_range=(0, 0),
                              texture_seed=c["texture_seed"])
    normals = generate_corpus(normal_spec, rng_seed=c["seed"] + 1,
                              subject_prefix="normal")
    return splits, normals


@pytest.fixture(scope="session")
def reference_gan_config(reference_config):
    from lesionlab.config import gan_config_from_dict
    return gan_config_from_dict(reference_config["gan"])


@pytest.fixture(scope="session")
def reference_gan_checkpoint(reference_corpus, reference_gan_config, acceptance_cache):
    """The shipped-config CPGGAN checkpoint; trained once, then reused from cache."""
    from lesionlab.config import config_to_dict
    from lesionlab.gan.checkpoint import load_checkpoint
    from lesionlab.gan.train import train_gan

    splits, _normals = reference_corpus
    expect = {"trainer": config_to_dict(reference_gan_config), "arch": "cpggan"}
    ckpt_dir = acceptance_cache / "gan_cpggan"
    final = ckpt_dir / "final.pt"
    if final.exists():
        try:
            return load_checkpoint(final, expect_config=expect)
        except ValueError:
            pass  # stale config; retrain below
    ckpt = train_gan(reference_gan_config, splits.train, out_dir=ckpt_dir,
                     log_every=2000)
    return ckpt
