"""Command-line entry points for the whole lab."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click
import numpy as np

from . import dataset as ds
from .config import (DetTrainConfig, config_to_dict, det_config_from_dict,
                     gan_config_from_dict, load_yaml, save_yaml)
from .geometry import BoundingBox
from .phantom import PhantomSpec, generate_corpus, split_dataset

log = logging.getLogger(__name__)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


@main.command("phantom-gen")
@click.option("--out", type=click.Path(), required=True)
@click.option("--size", default=64, show_default=True)
@click.option("--subjects", default=180, show_default=True)
@click.option("--slices", default=16, show_default=True)
@click.option("--normal-subjects", default=0, show_default=True,
              help="Extra lesion-free subjects written to the 'normal' split.")
@click.option("--jitter", default=0.25, show_default=True,
              help="Annotation roughness as a fraction of box side.")
@click.option("--seed", default=0, show_default=True)
@click.option("--ratios", nargs=3, type=float, default=(0.70, 0.10, 0.20),
              show_default=True)
def phantom_gen(out, size, subjects, slices, normal_subjects, jitter, seed, ratios):
    """Generate the phantom corpus and write the on-disk layout."""
    spec = PhantomSpec(image_size=size, subjects=subjects, slices_per_subject=slices,
                       box_jitter_fraction=jitter)
    records = generate_corpus(spec, rng_seed=seed)
    splits = split_dataset(records, ratios=tuple(ratios), seed=seed)
    payload = {"train": splits.train, "val": splits.val, "test": splits.test}
    if normal_subjects:
        normal_spec = PhantomSpec(image_size=size, subjects=normal_subjects,
                                  slices_per_subject=slices, tumor_count_range=(0, 0))
        payload["normal"] = generate_corpus(normal_spec, rng_seed=seed + 1,
                                            subject_prefix="normal")
    ds.write_corpus(payload, out)
    for split, recs in payload.items():
        click.echo(f"{split}: {len(recs)} images, "
                   f"{sum(len(r.boxes) for r in recs)} boxes")


@main.command("train-gan")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--arch", type=click.Choice(["cpggan", "img2img"]), default="cpggan",
              show_default=True)
@click.option("--include-normals", is_flag=True,
              help="Mix the 'normal' split into GAN training batches.")
@click.option("--log-every", default=500, show_default=True)
def train_gan_cmd(config_path, data, out, arch, include_normals, log_every):
    """Train a conditional GAN on the train split only."""
    from .gan.train import train_gan, train_img2img

    cfg_dict = load_yaml(config_path)
    if include_normals:
        cfg_dict["include_normals"] = True
    config = gan_config_from_dict(cfg_dict)
    records = ds.read_split(data, "train")
    if config.include_normals and (Path(data) / "normal.txt").exists():
        records += ds.read_split(data, "normal")
    trainer = train_img2img if arch == "img2img" else train_gan
    ckpt = trainer(config, records, out_dir=out, log_every=log_every)
    click.echo(f"trained {arch} for {ckpt.step} critic steps -> {out}/final.pt")


@main.command("sample")
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--count", type=int, required=True)
@click.option("--data", type=click.Path(exists=True), required=True,
              help="Corpus root; annotation box-sets come from its train split.")
@click.option("--augment/--no-augment", default=True, show_default=True)
@click.option("--filter-contrast", default=20.0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--seed", default=0, show_default=True)
def sample_cmd(ckpt, count, data, augment, filter_contrast, out, seed):
    """Sample synthetic records and write them in the corpus layout."""
    from .gan.checkpoint import load_checkpoint
    from .gan.sample import SampleRequest, sample_images

    checkpoint = load_checkpoint(ckpt)
    train = ds.read_split(data, "train")
    request = SampleRequest(count=count,
                            annotation_source=[r.boxes for r in train if r.boxes],
                            augment=augment, quality_filter=filter_contrast)
    records = sample_images(checkpoint, request, np.random.default_rng(seed))
    ds.write_split(records, out, "synthetic")
    click.echo(f"wrote {len(records)} synthetic records to {out}")


@main.command("train-detector")
@click.option("--data", type=click.Path(exists=True), multiple=True, required=True,
              help="First: corpus root (train/val). Extra: synthetic pool roots.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--anchors", default="auto", show_default=True,
              help="Only 'auto' (k-cluster from this run's boxes) is supported.")
@click.option("--train-res", default=None, type=int)
@click.option("--eval-res", default=None, type=int)
@click.option("--steps", default=None, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--log-every", default=200, show_default=True)
def train_detector_cmd(data, out, config_path, anchors, train_res, eval_res,
                       steps, seed, log_every):
    """Train the grid detector on real (+ optional synthetic) records."""
    from .detect.train import train_detector

    if anchors != "auto":
        raise click.UsageError("--anchors supports only 'auto'")
    cfg_dict = load_yaml(config_path) if config_path else {}
    for key, val in (("train_resolution", train_res), ("eval_resolution", eval_res),
                     ("total_steps", steps), ("seed", seed)):
        if val is not None:
            cfg_dict[key] = val
    config = det_config_from_dict(cfg_dict)
    records = ds.read_split(data[0], "train")
    for extra in data[1:]:
        records += ds.read_split(extra, "synthetic")
    val_path = Path(data[0]) / "val.txt"
    val = ds.read_split(data[0], "val") if val_path.exists() else None
    ckpt = train_detector(config, records, val_records=val, out_dir=out,
                          log_every=log_every)
    click.echo(f"detector trained ({ckpt.step} steps, selected "
               f"{ckpt.selected_step}) -> {out}/detector.pt")


@main.command("detect")
@click.option("--ckpt-dir", type=click.Path(exists=True), required=True)
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--split", default="test", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True)
def detect_cmd(ckpt_dir, data, split, config_path, out):
    """Run inference and dump `<image> <conf> <x_min,y_min,x_max,y_max>` lines."""
    from .detect.train import load_detector, run_inference

    config = det_config_from_dict(load_yaml(config_path) if config_path else {})
    net, anchors, _native = load_detector(Path(ckpt_dir) / "detector.pt", config)
    records = ds.read_split(data, split)
    dets, _ = run_inference(net, records, anchors, config)
    lines = []
    for rec, det_list in zip(records, dets):
        for d in det_list:
            b = d.box
            lines.append(f"{rec.record_id} {d.confidence:.6f} "
                         f"{b.x_min},{b.y_min},{b.x_max},{b.y_max}")
    Path(out).write_text("\n".join(lines) + ("\n" if lines else ""))
    click.echo(f"wrote {len(lines)} detections to {out}")


@main.command("experiment")
@click.option("--matrix", "matrix_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
def experiment_cmd(matrix_path, out):
    """Run the augmentation ablation matrix and write the results CSV."""
    from .experiment import MatrixConfig, run_matrix
    from .gan.checkpoint import load_checkpoint
    from .metrics import results_csv
    from .phantom import DatasetSplits

    spec = load_yaml(matrix_path)
    root = spec["data_root"]
    splits = DatasetSplits(train=ds.read_split(root, "train"),
                           val=ds.read_split(root, "val"),
                           test=ds.read_split(root, "test"))
    checkpoints = {name: load_checkpoint(path)
                   for name, path in spec.get("checkpoints", {}).items()}
    matrix_cfg = MatrixConfig(**{k: tuple(v) if k == "setups" else v
                                 for k, v in spec.get("matrix", {}).items()})
    det_cfg = det_config_from_dict(spec.get("detector", {}))
    rows, _runs = run_matrix(matrix_cfg, splits, checkpoints, det_cfg,
                             out_dir=Path(out).parent)
    results_csv(rows, out)
    click.echo(f"wrote {len(rows)} result rows to {out}")


@main.command("tsne")
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--splits", default="train", show_default=True,
              help="Comma-separated split names to embed.")
@click.option("--mode", type=click.Choice(["crops", "whole"]), default="crops",
              show_default=True)
@click.option("--per-category", default=500, show_default=True)
@click.option("--perplexity", default=100.0, show_default=True)
@click.option("--iterations", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-prefix", type=click.Path(), required=True)
def tsne_cmd(data, splits, mode, per_category, perplexity, iterations, seed,
             out_prefix):
    """Embed image vectors to 2-D; writes <prefix>.png and <prefix>.csv."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .embedding import EmbeddingInput, extract_crops, extract_whole, tsne_embed

    rng = np.random.default_rng(seed)
    vectors, labels = [], []
    for split in splits.split(","):
        records = ds.read_split(data, split.strip())
        rng.shuffle(records)
        emb = (extract_crops(records, label=split.strip()) if mode == "crops"
               else extract_whole(records, label=split.strip()))
        take = min(per_category, emb.vectors.shape[0])
        vectors.append(emb.vectors[:take])
        labels += emb.labels[:take]
    data_in = EmbeddingInput(vectors=np.vstack(vectors), labels=labels)
    points = tsne_embed(data_in, perplexity=perplexity, iterations=iterations,
                        seed=seed)

    csv_path = Path(f"{out_prefix}.csv")
    with open(csv_path, "w") as fh:
        fh.write("x,y,label\n")
        for (x, y), lab in zip(points, labels):
            fh.write(f"{x:.6f},{y:.6f},{lab}\n")
    fig, ax = plt.subplots(figsize=(7, 7))
    for lab in sorted(set(labels)):
        idx = [i for i, v in enumerate(labels) if v == lab]
        ax.scatter(points[idx, 0], points[idx, 1], s=6, label=lab, alpha=0.6)
    ax.legend()
    ax.set_title("2-D embedding of image vectors")
    fig.savefig(f"{out_prefix}.png", dpi=150)
    click.echo(f"wrote {out_prefix}.png and {csv_path}")


@main.command("mask-pyramid")
@click.option("--boxes", required=True,
              help="Semicolon-separated x0,y0,x1,y1 quadruples.")
@click.option("--size", default=64, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def mask_pyramid_cmd(boxes, size, out):
    """Debug dump: write the conditioning mask pyramid as image files."""
    from PIL import Image

    from .masks import build_mask, mask_pyramid

    parsed = [BoundingBox(*(int(v) for v in tok.split(","))) for tok in boxes.split(";")]
    mask = build_mask(parsed, size)
    resolutions = []
    r = size
    while r >= 4:
        resolutions.append(r)
        r //= 2
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for res, arr in mask_pyramid(mask, resolutions).items():
        img = np.clip(np.rint(arr * 255), 0, 255).astype(np.uint8)
        Image.fromarray(img, mode="L").save(out / f"mask_{res:03d}.png")
    click.echo(f"wrote {len(resolutions)} pyramid levels to {out}")


@main.command("vtt-serve")
@click.option("--real", type=click.Path(exists=True), required=True)
@click.option("--synt", type=click.Path(exists=True), required=True)
@click.option("--test-kind", default="crop32_plain", show_default=True)
@click.option("--journals", type=click.Path(), default="vtt_journals",
              show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def vtt_serve_cmd(real, synt, test_kind, journals, host, port):
    """Serve the rating-session API over HTTP."""
    import uvicorn

    from .vtt.service import ServiceState, create_app, pools_from_dirs

    pools = pools_from_dirs(real, synt, test_kind)
    n_real, n_synt = len(pools[test_kind][0]), len(pools[test_kind][1])
    click.echo(f"pools: {n_real} real / {n_synt} synthetic ({test_kind})")
    app = create_app(ServiceState(pools, journals))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
