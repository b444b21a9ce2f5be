import numpy as np
import pytest

from lesionlab.embedding import (
    ConfusionMatrix, EmbeddingInput, area_resize, conditional_affinities,
    confusion_stats, extract_crops, row_perplexities, tsne_embed,
)
from lesionlab.geometry import BoundingBox
from lesionlab.phantom import ImageRecord


def _rec(img, boxes, prov="real"):
    return ImageRecord(image=img.astype(np.uint8), boxes=boxes, subject_id="s",
                       provenance=prov, record_id="s/0")


class TestExtractCrops:
    def test_uniform_crop_constant_vector(self):
        img = np.full((64, 64), 90, dtype=np.uint8)
        out = extract_crops([_rec(img, [BoundingBox(4, 4, 20, 24)])])
        assert out.vectors.shape == (1, 1024)
        assert np.allclose(out.vectors, 90 / 255)

    def test_full_image_crop_resize_only(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 255, (64, 64), dtype=np.uint8)
        full = extract_crops([_rec(img, [BoundingBox(0, 0, 64, 64)])])
        direct = area_resize(img, (32, 32)).ravel() / 255.0
        assert np.allclose(full.vectors[0], direct)

    def test_checkerboard_mean_preserved(self):
        img = np.indices((64, 64)).sum(axis=0) % 2 * 255
        resized = area_resize(img, (32, 32))
        assert abs(resized.mean() - img.mean()) <= 1.0  # within 1/255 of full scale
        assert abs(resized.mean() / 255 - img.mean() / 255) <= 1 / 255

    def test_records_without_boxes_skipped(self):
        img = np.zeros((32, 32), dtype=np.uint8)
        out = extract_crops([
            ImageRecord(image=img, boxes=[], subject_id="n", provenance="normal",
                        record_id="n/0"),
            _rec(img, [BoundingBox(0, 0, 8, 8)]),
        ])
        assert out.vectors.shape[0] == 1

    def test_labels_follow_provenance(self):
        img = np.zeros((32, 32), dtype=np.uint8)
        out = extract_crops([_rec(img, [BoundingBox(0, 0, 8, 8)], prov="synthetic")])
        assert out.labels == ["synthetic"]


def _two_cluster_fixture(n=600, d=1024, seed=0):
    rng = np.random.default_rng(seed)
    a = np.clip(rng.normal(0.25, 0.03, (n // 2, d)), 0, 1)
    b = np.clip(rng.normal(0.75, 0.03, (n // 2, d)), 0, 1)
    labels = np.array([0] * (n // 2) + [1] * (n // 2))
    return np.vstack([a, b]), labels


def _cluster_purity(points, labels):
    """2-means on the embedding, then best label assignment."""
    rng = np.random.default_rng(0)
    centers = points[rng.choice(len(points), 2, replace=False)]
    assign = np.zeros(len(points), dtype=int)
    for _ in range(50):
        d = ((points[:, None] - centers[None]) ** 2).sum(-1)
        new = d.argmin(axis=1)
        if (new == assign).all():
            break
        assign = new
        for j in (0, 1):
            if (assign == j).any():
                centers[j] = points[assign == j].mean(axis=0)
    direct = (assign == labels).mean()
    return max(direct, 1 - direct)


class TestTsne:
    def test_two_clusters_recovered(self):
        x, labels = _two_cluster_fixture()
        y = tsne_embed(x, perplexity=30, iterations=300, seed=0)
        assert y.shape == (600, 2)
        assert np.isfinite(y).all()
        assert _cluster_purity(y, labels) >= 0.95

    def test_row_perplexity_within_one_percent(self):
        x, _ = _two_cluster_fixture(n=240)
        p = conditional_affinities(x, perplexity=30)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
        perp = row_perplexities(p)
        assert (np.abs(perp - 30) / 30 < 0.01).all()

    def test_duplicated_rows_land_together(self):
        x, _ = _two_cluster_fixture(n=200)
        x[11] = x[10]
        y = tsne_embed(x, perplexity=20, iterations=600, seed=1)
        d_dup = np.linalg.norm(y[10] - y[11])
        nn = np.linalg.norm(y[:, None] - y[None], axis=-1) + np.eye(len(y)) * 1e9
        median_nn = np.median(nn.min(axis=1))
        assert d_dup < median_nn / 2

    def test_seed_deterministic(self):
        x, _ = _two_cluster_fixture(n=150)
        a = tsne_embed(x, perplexity=15, iterations=120, seed=42)
        b = tsne_embed(x, perplexity=15, iterations=120, seed=42)
        assert np.array_equal(a, b)

    def test_too_small_n_rejected(self):
        x = np.zeros((50, 10))
        with pytest.raises(ValueError, match="perplexity"):
            tsne_embed(x, perplexity=30)


class TestConfusionStats:
    def _session(self, rr, rs, sr, ss):
        responses = []
        k = 0
        for n, truth, resp in [(rr, "real", "real"), (rs, "real", "synthetic"),
                               (sr, "synthetic", "real"), (ss, "synthetic", "synthetic")]:
            for _ in range(n):
                responses.append((f"item{k}", truth, resp))
                k += 1
        return responses

    def test_physician1_test1_fixture(self):
        cm = confusion_stats(self._session(40, 10, 2, 48))
        assert cm.accuracy == pytest.approx(0.88)
        assert (cm.real_as_real, cm.real_as_synt, cm.synt_as_real, cm.synt_as_synt) \
            == (40, 10, 2, 48)

    def test_all_correct(self):
        cm = confusion_stats(self._session(50, 0, 0, 50))
        assert cm.accuracy == 1.0

    def test_empty_session_error(self):
        with pytest.raises(ValueError, match="empty"):
            confusion_stats([])

    def test_duplicate_item_error(self):
        with pytest.raises(ValueError, match="duplicate"):
            confusion_stats([("a", "real", "real"), ("a", "real", "synthetic")])

    def test_relabeling_symmetry(self):
        cm = confusion_stats(self._session(40, 10, 2, 48))
        swapped = confusion_stats([
            (i, "synthetic" if t == "real" else "real",
             "synthetic" if r == "real" else "real")
            for i, t, r in self._session(40, 10, 2, 48)])
        assert swapped.accuracy == cm.accuracy
        assert (swapped.synt_as_synt, swapped.synt_as_real,
                swapped.real_as_synt, swapped.real_as_real) \
            == (cm.real_as_real, cm.real_as_synt, cm.synt_as_real, cm.synt_as_synt)

    def test_cells_sum(self):
        cm = confusion_stats(self._session(3, 2, 1, 4))
        assert cm.total == 10
