import numpy as np
from click.testing import CliRunner
from PIL import Image

from lesionlab.cli import main
from lesionlab.dataset import read_split


def test_phantom_gen_writes_layout(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, [
        "phantom-gen", "--out", str(tmp_path / "corpus"), "--size", "32",
        "--subjects", "4", "--slices", "2", "--normal-subjects", "2", "--seed", "1"])
    assert result.exit_code == 0, result.output
    for split in ("train", "val", "test", "normal"):
        assert (tmp_path / "corpus" / f"{split}.txt").exists()
    normals = read_split(tmp_path / "corpus", "normal")
    assert all(not r.boxes for r in normals)


def test_gan_and_sample_pipeline(tmp_path):
    runner = CliRunner()
    corpus = tmp_path / "corpus"
    runner.invoke(main, ["phantom-gen", "--out", str(corpus), "--size", "32",
                         "--subjects", "4", "--slices", "2", "--seed", "0"],
                  catch_exceptions=False)
    cfg = tmp_path / "gan.yaml"
    cfg.write_text("""
total_steps: 3
batch_size: 4
target_resolution: 32
fade_images: 0
stable_images: 4
checkpoint_every: 0
seed: 1
net: {latent_dim: 16, base_channels: 16}
""")
    result = runner.invoke(main, [
        "train-gan", "--config", str(cfg), "--data", str(corpus),
        "--out", str(tmp_path / "gan")], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "gan" / "final.pt").exists()

    result = runner.invoke(main, [
        "sample", "--ckpt", str(tmp_path / "gan" / "final.pt"), "--count", "3",
        "--data", str(corpus), "--filter-contrast", "0", "--out",
        str(tmp_path / "synth")], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    synth = read_split(tmp_path / "synth", "synthetic")
    assert len(synth) == 3
    assert all(r.provenance == "synthetic" for r in synth)


def test_train_detector_and_detect(tmp_path):
    runner = CliRunner()
    corpus = tmp_path / "corpus"
    runner.invoke(main, ["phantom-gen", "--out", str(corpus), "--size", "32",
                         "--subjects", "5", "--slices", "2", "--seed", "2"],
                  catch_exceptions=False)
    cfg = tmp_path / "det.yaml"
    cfg.write_text("""
total_steps: 3
batch_size: 4
train_resolution: 32
eval_resolution: 48
grid_size: 4
num_anchors: 2
base_channels: 8
num_blocks: 1
checkpoint_every: 2
""")
    result = runner.invoke(main, [
        "train-detector", "--data", str(corpus), "--out", str(tmp_path / "det"),
        "--config", str(cfg)], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "det" / "detector.pt").exists()

    result = runner.invoke(main, [
        "detect", "--ckpt-dir", str(tmp_path / "det"), "--data", str(corpus),
        "--split", "test", "--config", str(cfg),
        "--out", str(tmp_path / "dets.txt")], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    for line in (tmp_path / "dets.txt").read_text().splitlines():
        parts = line.split()
        assert len(parts) == 3
        assert 0.0 <= float(parts[1]) <= 1.0
        assert len(parts[2].split(",")) == 4


def test_mask_pyramid_dump(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, [
        "mask-pyramid", "--boxes", "8,8,24,24;40,40,56,60", "--size", "64",
        "--out", str(tmp_path / "pyr")], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    files = sorted(p.name for p in (tmp_path / "pyr").glob("*.png"))
    assert files == ["mask_004.png", "mask_008.png", "mask_016.png",
                     "mask_032.png", "mask_064.png"]
    full = np.asarray(Image.open(tmp_path / "pyr" / "mask_064.png"))
    assert set(np.unique(full)) <= {0, 255}


def test_tsne_cli(tmp_path):
    runner = CliRunner()
    corpus = tmp_path / "corpus"
    runner.invoke(main, ["phantom-gen", "--out", str(corpus), "--size", "32",
                         "--subjects", "6", "--slices", "3", "--seed", "3"],
                  catch_exceptions=False)
    result = runner.invoke(main, [
        "tsne", "--data", str(corpus), "--splits", "train", "--mode", "crops",
        "--per-category", "40", "--perplexity", "5", "--iterations", "60",
        "--out-prefix", str(tmp_path / "emb")], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "emb.png").exists()
    lines = (tmp_path / "emb.csv").read_text().splitlines()
    assert lines[0] == "x,y,label"
    assert len(lines) > 20
