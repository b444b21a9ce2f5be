import numpy as np

from lesionlab.dataset import read_split, write_corpus, write_split
from lesionlab.phantom import PhantomSpec, generate_phantom, split_dataset


def _corpus():
    spec = PhantomSpec(image_size=32, subjects=4, slices_per_subject=2,
                       tumor_count_range=(0, 2))
    recs = []
    for i in range(4):
        recs.extend(generate_phantom(spec, f"s{i}", rng_seed=1))
    return recs


class TestDiskLayout:
    def test_round_trip(self, tmp_path):
        records = _corpus()
        write_split(records, tmp_path, "train")
        loaded = read_split(tmp_path, "train")
        assert len(loaded) == len(records)
        for a, b in zip(records, loaded):
            assert np.array_equal(a.image, b.image)
            assert a.boxes == b.boxes
            assert a.subject_id == b.subject_id
            assert a.provenance == b.provenance

    def test_annotation_line_format(self, tmp_path):
        records = _corpus()
        ann = write_split(records, tmp_path, "train")
        for line, rec in zip(ann.read_text().splitlines(), records):
            tokens = line.split()
            assert tokens[0].startswith(f"images/{rec.provenance}/{rec.subject_id}/")
            assert len(tokens) == 1 + len(rec.boxes)
            for tok, box in zip(tokens[1:], rec.boxes):
                assert tok == f"{box.x_min},{box.y_min},{box.x_max},{box.y_max}"

    def test_normal_records_have_no_box_tokens(self, tmp_path):
        records = [r for r in _corpus() if not r.boxes]
        assert records, "fixture needs at least one normal record"
        ann = write_split(records, tmp_path, "normal")
        for line in ann.read_text().splitlines():
            assert len(line.split()) == 1

    def test_write_corpus_all_splits(self, tmp_path):
        records = _corpus()
        splits = split_dataset(records, seed=0)
        write_corpus({"train": splits.train, "val": splits.val, "test": splits.test},
                     tmp_path)
        for split in ("train", "val", "test"):
            assert (tmp_path / f"{split}.txt").exists()
            assert len(read_split(tmp_path, split)) > 0
