"""Real-vs-synthetic distribution views: pixel-space stochastic neighbor
embedding of lesion crops / whole images, plus rating confusion statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .phantom import ImageRecord

log = logging.getLogger(__name__)


@dataclass
class EmbeddingInput:
    vectors: np.ndarray      # (n, d), values in [0, 1]
    labels: list[str]

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.labels):
            raise ValueError("vectors/labels mismatch")
        if self.vectors.size and (self.vectors.min() < 0 or self.vectors.max() > 1):
            raise ValueError("vectors must be normalized to [0, 1]")


def area_resize(img: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Exact area-weighted resize (box overlap integration); preserves the
    mean under uniform scaling."""

    def axis_weights(n_in: int, n_out: int) -> np.ndarray:
        scale = n_in / n_out
        w = np.zeros((n_out, n_in))
        for i in range(n_out):
            lo, hi = i * scale, (i + 1) * scale
            j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
            for j in range(j0, min(j1, n_in)):
                w[i, j] = min(hi, j + 1) - max(lo, j)
        return w / scale

    ay = axis_weights(img.shape[0], out_shape[0])
    ax = axis_weights(img.shape[1], out_shape[1])
    return ay @ img.astype(np.float64) @ ax.T


def extract_crops(records: list[ImageRecord], crop_size: int = 32,
                  label: str | None = None) -> EmbeddingInput:
    """One vector per box: crop, area-resize to crop_size^2, flatten to [0,1].
    Records without boxes are skipped (count logged)."""
    vectors, labels, skipped = [], [], 0
    for rec in records:
        if not rec.boxes:
            skipped += 1
            continue
        for b in rec.boxes:
            crop = rec.image[b.y_min:b.y_max, b.x_min:b.x_max]
            resized = area_resize(crop, (crop_size, crop_size))
            vectors.append(np.clip(resized, 0, 255).ravel() / 255.0)
            labels.append(label or rec.provenance)
    if skipped:
        log.info("extract_crops skipped %d records without boxes", skipped)
    arr = np.array(vectors) if vectors else np.zeros((0, crop_size * crop_size))
    return EmbeddingInput(vectors=arr, labels=labels)


def extract_whole(records: list[ImageRecord], label: str | None = None,
                  out_size: int | None = None) -> EmbeddingInput:
    vectors, labels = [], []
    for rec in records:
        img = rec.image if out_size is None else area_resize(rec.image, (out_size, out_size))
        vectors.append(np.asarray(img, dtype=np.float64).ravel() / 255.0)
        labels.append(label or rec.provenance)
    return EmbeddingInput(vectors=np.array(vectors), labels=labels)


def conditional_affinities(vectors: np.ndarray, perplexity: float,
                           bisection_iters: int = 50, tol: float = 1e-5) -> np.ndarray:
    """Row-stochastic conditional P with per-row bandwidth matched to the
    target perplexity by bisection."""
    n = vectors.shape[0]
    sq = (vectors ** 2).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * vectors @ vectors.T, 0.0)
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        di = np.delete(d2[i], i)
        di = di - di.min()  # shift-invariant after normalization; avoids underflow
        beta, beta_min, beta_max = 1.0, 0.0, np.inf
        pi = None
        for _ in range(bisection_iters):
            w = np.exp(-di * beta)
            s = w.sum()
            pi = w / s
            entropy = np.log(s) + beta * (di * pi).sum()
            diff = entropy - target
            if abs(diff) < tol:
                break
            if diff > 0:   # entropy too high -> sharpen
                beta_min = beta
                beta = beta * 2.0 if np.isinf(beta_max) else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
        p[i] = np.insert(pi, i, 0.0)
    return p


def row_perplexities(p_cond: np.ndarray) -> np.ndarray:
    """2^H per row of a conditional affinity matrix."""
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p_cond > 0, p_cond * np.log2(p_cond), 0.0).sum(axis=1)
    return 2.0 ** h


def tsne_embed(data: EmbeddingInput | np.ndarray, perplexity: float = 100.0,
               iterations: int = 1000, seed: int = 0,
               early_exaggeration: float = 12.0, exaggeration_iters: int = 250,
               learning_rate: float = 200.0) -> np.ndarray:
    """2-D stochastic neighbor embedding with heavy-tailed low-dimensional
    affinities, early exaggeration, momentum and adaptive gains."""
    x = data.vectors if isinstance(data, EmbeddingInput) else np.asarray(data, dtype=np.float64)
    n = x.shape[0]
    if n <= 3 * perplexity:
        raise ValueError(f"n={n} too small for perplexity {perplexity}; "
                         f"reduce perplexity below {n / 3:.0f}")
    p_cond = conditional_affinities(x, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, (n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    for it in range(iterations):
        factor = early_exaggeration if it < exaggeration_iters else 1.0
        momentum = 0.5 if it < exaggeration_iters else 0.8
        sq = (y ** 2).sum(axis=1)
        num = 1.0 / (1.0 + np.maximum(sq[:, None] + sq[None, :] - 2.0 * y @ y.T, 0.0))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        pq = (factor * p - q) * num
        grad = 4.0 * (np.diag(pq.sum(axis=1)) - pq) @ y
        gains = np.where(np.sign(grad) != np.sign(velocity),
                         gains + 0.2, gains * 0.8).clip(min=0.01)
        velocity = momentum * velocity - learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
    return y


@dataclass(frozen=True)
class ConfusionMatrix:
    real_as_real: int
    real_as_synt: int
    synt_as_real: int
    synt_as_synt: int

    @property
    def total(self) -> int:
        return self.real_as_real + self.real_as_synt + self.synt_as_real + self.synt_as_synt

    @property
    def accuracy(self) -> float:
        return (self.real_as_real + self.synt_as_synt) / self.total

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "real_as_real": self.real_as_real,
                "real_as_synt": self.real_as_synt, "synt_as_real": self.synt_as_real,
                "synt_as_synt": self.synt_as_synt}


def confusion_stats(responses: list[tuple[str, str, str]]) -> ConfusionMatrix:
    """Tally (item_id, ground_truth, response) triples; labels are
    'real'/'synthetic'. Duplicate item ids and empty sessions are errors."""
    if not responses:
        raise ValueError("empty session: no responses to tally")
    seen = set()
    cells = {("real", "real"): 0, ("real", "synthetic"): 0,
             ("synthetic", "real"): 0, ("synthetic", "synthetic"): 0}
    for item_id, truth, resp in responses:
        if item_id in seen:
            raise ValueError(f"duplicate response for item {item_id}")
        seen.add(item_id)
        if truth not in ("real", "synthetic") or resp not in ("real", "synthetic"):
            raise ValueError(f"labels must be real/synthetic, got {truth!r}/{resp!r}")
        cells[(truth, resp)] += 1
    return ConfusionMatrix(real_as_real=cells[("real", "real")],
                           real_as_synt=cells[("real", "synthetic")],
                           synt_as_real=cells[("synthetic", "real")],
                           synt_as_synt=cells[("synthetic", "synthetic")])
