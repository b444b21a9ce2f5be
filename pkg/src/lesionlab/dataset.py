"""On-disk corpus layout.

Root contains one PNG per slice under images/<provenance>/<subject_id>/,
plus one plain-text annotation file per split (<split>.txt). Each line is

    <relative_path> <x_min,y_min,x_max,y_max> [<box2> ...]

with no box tokens for normal (lesion-free) images.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import BoundingBox
from .phantom import ImageRecord


def _record_relpath(record: ImageRecord) -> str:
    name = record.record_id.replace("/", "_") if record.record_id else "anon"
    return f"images/{record.provenance}/{record.subject_id}/{name}.png"


def write_split(records: list[ImageRecord], root: str | Path, split: str) -> Path:
    """Write images (if absent) and the annotation file for one split."""
    root = Path(root)
    lines = []
    for rec in records:
        rel = _record_relpath(rec)
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if not path.exists():
            Image.fromarray(rec.image, mode="L").save(path)
        tokens = [rel] + [f"{b.x_min},{b.y_min},{b.x_max},{b.y_max}" for b in rec.boxes]
        lines.append(" ".join(tokens))
    ann = root / f"{split}.txt"
    ann.write_text("\n".join(lines) + ("\n" if lines else ""))
    return ann


def read_split(root: str | Path, split: str) -> list[ImageRecord]:
    root = Path(root)
    ann = root / f"{split}.txt"
    records = []
    for line in ann.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        rel = tokens[0]
        boxes = []
        for tok in tokens[1:]:
            x0, y0, x1, y1 = (int(v) for v in tok.split(","))
            boxes.append(BoundingBox(x0, y0, x1, y1))
        image = np.asarray(Image.open(root / rel).convert("L"))
        parts = Path(rel).parts  # images/<provenance>/<subject>/<file>.png
        provenance, subject_id = parts[1], parts[2]
        records.append(ImageRecord(image=image, boxes=boxes, subject_id=subject_id,
                                   provenance=provenance, record_id=os.path.splitext(rel)[0]))
    return records


def write_corpus(splits: dict[str, list[ImageRecord]], root: str | Path) -> None:
    for split, records in splits.items():
        write_split(records, root, split)
