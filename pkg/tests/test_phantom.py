import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lesionlab.geometry import BoundingBox
from lesionlab.phantom import (
    DatasetSplits, ImageRecord, PhantomSpec, box_contrast, generate_phantom,
    jitter_box, render_slice, split_dataset, tight_box_from_support,
)


def _enumerate_circle_box(center, radius, size):
    """Independent oracle: bounding box of pixel centers strictly inside the circle."""
    ys, xs = np.mgrid[0:size, 0:size]
    inside = (xs + 0.5 - center[0]) ** 2 + (ys + 0.5 - center[1]) ** 2 < radius ** 2
    ys, xs = np.nonzero(inside)
    return BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


class TestGeneratePhantom:
    def test_normal_phantoms_have_no_boxes(self):
        spec = PhantomSpec(image_size=64, subjects=1, slices_per_subject=4,
                           tumor_count_range=(0, 0))
        records = generate_phantom(spec, "s0", rng_seed=1)
        assert len(records) == 4
        for r in records:
            assert r.boxes == []
            assert r.provenance == "normal"

    def test_deterministic_given_seed(self):
        spec = PhantomSpec(image_size=64, subjects=1, slices_per_subject=3)
        a = generate_phantom(spec, "s7", rng_seed=13)
        b = generate_phantom(spec, "s7", rng_seed=13)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.image, rb.image)
            assert ra.boxes == rb.boxes
            assert ra.record_id == rb.record_id

    def test_seed_changes_output(self):
        spec = PhantomSpec(image_size=64, subjects=1, slices_per_subject=1)
        a = generate_phantom(spec, "s7", rng_seed=13)
        b = generate_phantom(spec, "s7", rng_seed=14)
        assert not np.array_equal(a[0].image, b[0].image)

    def test_forced_center_tight_box_matches_enumeration_oracle(self):
        spec = PhantomSpec(image_size=256, tumor_radius_range=(8, 32))
        rng = np.random.default_rng(0)
        _, boxes = render_slice(spec, rng, placements=[((128.0, 128.0), (16.0, 16.0), 0.0)])
        expected = _enumerate_circle_box((128.0, 128.0), 16.0, 256)
        assert expected == BoundingBox(112, 112, 144, 144)
        assert boxes == [expected]

    def test_rejects_radius_exceeding_head(self):
        with pytest.raises(ValueError, match="head radius"):
            PhantomSpec(image_size=64, tumor_radius_range=(5, 30))

    def test_tumors_are_brightest_structures(self):
        spec = PhantomSpec(image_size=64, subjects=1, slices_per_subject=8)
        for rec in generate_phantom(spec, "bright", rng_seed=3):
            if not rec.boxes:
                continue
            mask = np.zeros(rec.image.shape, dtype=bool)
            for b in rec.boxes:
                mask[b.y_min:b.y_max, b.x_min:b.x_max] = True
            assert rec.image[mask].max() > rec.image[~mask].max()

    def test_interior_annulus_contrast_on_100_seeded_phantoms(self):
        spec = PhantomSpec(image_size=64)
        checked = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            image, boxes = render_slice(spec, rng)
            for b in boxes:
                margin = box_contrast(image.astype(np.float64), b, boxes)
                assert margin >= spec.tumor_intensity_boost / 2, (seed, b, margin)
                checked += 1
        assert checked >= 100


class TestJitterBox:
    def test_zero_fraction_identity(self):
        box = BoundingBox(10, 12, 30, 28)
        rng = np.random.default_rng(0)
        assert jitter_box(box, 0.0, rng, 64) == box

    def test_edges_within_fraction_over_1000_draws(self):
        box = BoundingBox(112, 112, 144, 144)
        for seed in range(1000):
            out = jitter_box(box, 0.25, np.random.default_rng(seed), 256)
            assert abs(out.x_min - box.x_min) <= 8
            assert abs(out.x_max - box.x_max) <= 8
            assert abs(out.y_min - box.y_min) <= 8
            assert abs(out.y_max - box.y_max) <= 8

    def test_border_box_clamped(self):
        box = BoundingBox(0, 0, 16, 16)
        for seed in range(200):
            out = jitter_box(box, 0.5, np.random.default_rng(seed), 64)
            assert out.inside(64)

    @given(x0=st.integers(0, 50), y0=st.integers(0, 50),
           w=st.integers(1, 13), h=st.integers(1, 13),
           frac=st.floats(0, 0.5), seed=st.integers(0, 2 ** 31))
    @settings(max_examples=300, deadline=None)
    def test_validity_closed_under_jitter(self, x0, y0, w, h, frac, seed):
        box = BoundingBox(x0, y0, x0 + w, y0 + h)
        out = jitter_box(box, frac, np.random.default_rng(seed), 64)
        assert out.inside(64)
        cx, cy = box.center
        assert out.x_min <= cx <= out.x_max
        assert out.y_min <= cy <= out.y_max


def _dummy_records(n_subjects, per_subject=2):
    img = np.zeros((32, 32), dtype=np.uint8)
    recs = []
    for s in range(n_subjects):
        for k in range(per_subject):
            recs.append(ImageRecord(image=img, boxes=[], subject_id=f"p{s:03d}",
                                    provenance="normal", record_id=f"p{s:03d}/{k}"))
    return recs


class TestSplitDataset:
    def test_paper_ratio_on_180_subjects(self):
        recs = _dummy_records(180, per_subject=1)
        splits = split_dataset(recs, ratios=(126 / 180, 18 / 180, 36 / 180), seed=0)
        tr, va, te = splits.subject_sets()
        assert (len(tr), len(va), len(te)) == (126, 18, 36)

    def test_10_subjects_default_ratios(self):
        splits = split_dataset(_dummy_records(10), seed=0)
        tr, va, te = splits.subject_sets()
        assert (len(tr), len(va), len(te)) == (7, 1, 2)

    def test_subject_disjointness(self):
        splits = split_dataset(_dummy_records(23), seed=5)
        tr, va, te = splits.subject_sets()
        assert not (tr & va) and not (tr & te) and not (va & te)

    def test_input_order_does_not_matter(self):
        recs = _dummy_records(12)
        a = split_dataset(recs, seed=3)
        shuffled = list(reversed(recs))
        b = split_dataset(shuffled, seed=3)
        assert a.subject_sets() == b.subject_sets()

    def test_too_few_subjects(self):
        with pytest.raises(ValueError):
            split_dataset(_dummy_records(2))

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split_dataset(_dummy_records(10), ratios=(0.5, 0.2, 0.2))
