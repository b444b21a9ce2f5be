"""Procedural brain-like phantom corpus with bright elliptical lesions.

Each slice is an elliptical "head" with low-frequency texture, a few small
hyper-intense distractor dots (unannotated, vessel-like) and zero or more
bright flat-top lesions. Lesions are the brightest structures in the image;
their tight boxes are computed from the rendered support and then roughened
with an edge jitter to simulate lazy annotation.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import BoundingBox

PROVENANCE_REAL = "real"
PROVENANCE_SYNTHETIC = "synthetic"
PROVENANCE_NORMAL = "normal"

_ALLOWED_SIZES = (32, 64, 128, 256)


@dataclass(frozen=True)
class PhantomSpec:
    image_size: int = 64
    subjects: int = 180
    slices_per_subject: int = 16
    tumor_count_range: tuple[int, int] = (1, 3)
    tumor_radius_range: tuple[int, int] | None = None
    tumor_intensity_boost: int = 96
    texture_seed: int = 7
    # roughness of the shipped annotations; 0 disables jitter
    box_jitter_fraction: float = 0.25
    # unannotated bright distractors, intensity relative to the lesion boost
    vessel_count_range: tuple[int, int] = (2, 5)
    vessel_intensity_fraction: float = 0.55
    base_intensity: float = 110.0
    texture_amplitude: float = 14.0

    def __post_init__(self):
        if self.image_size not in _ALLOWED_SIZES:
            raise ValueError(f"image_size must be one of {_ALLOWED_SIZES}")
        if self.tumor_radius_range is None:
            lo = max(3, self.image_size // 16)
            hi = max(lo + 1, self.image_size // 7)
            object.__setattr__(self, "tumor_radius_range", (lo, hi))
        lo, hi = self.tumor_count_range
        if not (0 <= lo <= hi):
            raise ValueError("invalid tumor_count_range")
        rlo, rhi = self.tumor_radius_range
        if not (0 < rlo <= rhi):
            raise ValueError("invalid tumor_radius_range")
        # lesions must fit inside the head with room for placement
        if rhi > 0.30 * self.image_size:
            raise ValueError(
                f"max tumor radius {rhi} exceeds the head radius budget "
                f"({0.30 * self.image_size:.0f} px at image_size {self.image_size})")
        if not (0.0 <= self.box_jitter_fraction <= 0.5):
            raise ValueError("box_jitter_fraction must be in [0, 0.5]")


@dataclass
class ImageRecord:
    image: np.ndarray  # uint8, shape (H, W)
    boxes: list[BoundingBox]
    subject_id: str
    provenance: str = PROVENANCE_REAL
    record_id: str = ""

    def __post_init__(self):
        if self.image.dtype != np.uint8 or self.image.ndim != 2:
            raise ValueError("image must be a 2-D uint8 array")
        size = self.image.shape[0]
        for b in self.boxes:
            if not b.inside(size):
                raise ValueError(f"box {b} outside image bounds {size}")
        if self.provenance == PROVENANCE_NORMAL and self.boxes:
            raise ValueError("normal records must have an empty box list")


@dataclass
class DatasetSplits:
    train: list[ImageRecord]
    val: list[ImageRecord]
    test: list[ImageRecord]

    def subject_sets(self) -> tuple[set, set, set]:
        return ({r.subject_id for r in self.train},
                {r.subject_id for r in self.val},
                {r.subject_id for r in self.test})


def _subject_rng(seed: int, subject_id: str, salt: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(subject_id.encode()), salt])


def _head_params(spec: PhantomSpec, rng: np.random.Generator):
    s = spec.image_size
    cx = s / 2 + rng.uniform(-0.02, 0.02) * s
    cy = s / 2 + rng.uniform(-0.02, 0.02) * s
    ax = s * rng.uniform(0.40, 0.45)
    ay = s * rng.uniform(0.34, 0.40)
    return cx, cy, ax, ay


def _pixel_centers(size: int):
    ys, xs = np.mgrid[0:size, 0:size]
    return xs + 0.5, ys + 0.5


def _smooth_noise(size: int, rng: np.random.Generator, cells: int = 8) -> np.ndarray:
    """Low-frequency texture: coarse Gaussian noise bilinearly upsampled."""
    coarse = rng.normal(0.0, 1.0, (cells + 1, cells + 1))
    t = np.linspace(0, cells, size)
    i0 = np.clip(t.astype(int), 0, cells - 1)
    frac = t - i0
    rows = coarse[i0] * (1 - frac)[:, None] + coarse[i0 + 1] * frac[:, None]
    cols = rows[:, i0] * (1 - frac)[None, :] + rows[:, i0 + 1] * frac[None, :]
    return cols


def render_tumor(canvas: np.ndarray, center: tuple[float, float],
                 radii: tuple[float, float], angle: float, boost: float) -> np.ndarray:
    """Add one flat-top elliptical bump to ``canvas`` in place.

    The profile is boost * exp(-u^10) for elliptical norm u, truncated at the
    ellipse edge (u < 1, evaluated at pixel centers). Returns the boolean
    support mask.
    """
    size = canvas.shape[0]
    px, py = _pixel_centers(size)
    dx, dy = px - center[0], py - center[1]
    ca, sa = np.cos(angle), np.sin(angle)
    u2 = ((dx * ca + dy * sa) / radii[0]) ** 2 + ((-dx * sa + dy * ca) / radii[1]) ** 2
    support = u2 < 1.0
    canvas[support] += boost * np.exp(-u2[support] ** 5)
    return support


def tight_box_from_support(support: np.ndarray) -> BoundingBox:
    ys, xs = np.nonzero(support)
    if xs.size == 0:
        raise ValueError("empty support")
    return BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def render_slice(spec: PhantomSpec, rng: np.random.Generator,
                 texture_rng: np.random.Generator | None = None,
                 placements: list[tuple[tuple[float, float], tuple[float, float], float]] | None = None,
                 ) -> tuple[np.ndarray, list[BoundingBox]]:
    """Render one phantom slice; returns (uint8 image, tight lesion boxes).

    ``placements`` forces explicit (center, radii, angle) lesions instead of
    random placement: used by oracle tests and kept out of generate_phantom.
    """
    size = spec.image_size
    if texture_rng is None:
        texture_rng = rng
    cx, cy, ax, ay = _head_params(spec, rng)
    px, py = _pixel_centers(size)
    head_u2 = ((px - cx) / ax) ** 2 + ((py - cy) / ay) ** 2

    canvas = np.full((size, size), 6.0)
    inside = head_u2 < 1.0
    falloff = 1.0 - 0.12 * np.clip(head_u2, 0, 1)
    canvas[inside] = spec.base_intensity * falloff[inside]
    canvas += spec.texture_amplitude * _smooth_noise(size, texture_rng) * inside
    canvas += texture_rng.normal(0.0, 2.0, canvas.shape)

    if placements is None:
        count = int(rng.integers(spec.tumor_count_range[0], spec.tumor_count_range[1] + 1))
        placements = _sample_placements(spec, rng, count, (cx, cy, ax, ay))

    # distractor dots, kept clear of lesion boxes and their contrast annuli
    vessel_boost = spec.vessel_intensity_fraction * spec.tumor_intensity_boost
    lesion_zones = [_placement_box(size, c, r) for c, r, _ in placements]
    n_vessels = int(rng.integers(spec.vessel_count_range[0], spec.vessel_count_range[1] + 1))
    for _ in range(n_vessels):
        for _attempt in range(20):
            vc = _point_in_ellipse(rng, cx, cy, 0.85 * ax, 0.85 * ay)
            if not any(b.x_min - (b.width // 2 + 4) <= vc[0] <= b.x_max + (b.width // 2 + 4)
                       and b.y_min - (b.height // 2 + 4) <= vc[1] <= b.y_max + (b.height // 2 + 4)
                       for b in lesion_zones):
                break
        vr = rng.uniform(1.0, 1.8)
        render_tumor(canvas, vc, (vr, vr), 0.0, vessel_boost)

    boxes = []
    for center, radii, angle in placements:
        support = render_tumor(canvas, center, radii, angle, spec.tumor_intensity_boost)
        boxes.append(tight_box_from_support(support))

    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8), boxes


def _placement_box(size: int, center: tuple[float, float], radii: tuple[float, float]) -> BoundingBox:
    r = max(radii)
    return BoundingBox(max(0, int(center[0] - r) - 1), max(0, int(center[1] - r) - 1),
                       min(size, int(center[0] + r) + 2), min(size, int(center[1] + r) + 2))


def _point_in_ellipse(rng, cx, cy, ax, ay):
    t = rng.uniform(0, 2 * np.pi)
    rho = np.sqrt(rng.uniform(0, 1))
    return cx + rho * ax * np.cos(t), cy + rho * ay * np.sin(t)


def _sample_placements(spec: PhantomSpec, rng: np.random.Generator, count: int, head):
    cx, cy, ax, ay = head
    placements = []
    for _ in range(count):
        for _attempt in range(50):
            r = rng.uniform(*spec.tumor_radius_range)
            radii = (r * rng.uniform(0.85, 1.15), r * rng.uniform(0.85, 1.15))
            angle = rng.uniform(0, np.pi)
            rmax = max(radii)
            shrink_x = max(0.0, 1.0 - (rmax + 2) / ax)
            shrink_y = max(0.0, 1.0 - (rmax + 2) / ay)
            center = _point_in_ellipse(rng, cx, cy, ax * shrink_x, ay * shrink_y)
            if _box_inside_head(center, rmax, (cx, cy, ax, ay)):
                placements.append((center, radii, angle))
                break
    return placements


def _box_inside_head(center, rmax, head) -> bool:
    cx, cy, ax, ay = head
    for sx in (-1, 1):
        for sy in (-1, 1):
            x = center[0] + sx * rmax
            y = center[1] + sy * rmax
            if ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 >= 1.0:
                return False
    return True


def jitter_box(box: BoundingBox, max_side_fraction: float, rng: np.random.Generator,
               image_size: int) -> BoundingBox:
    """Displace each edge independently by up to ``max_side_fraction`` of the
    box side, clamp to image bounds and keep the original box center inside."""
    if not (0.0 <= max_side_fraction <= 0.5):
        raise ValueError("max_side_fraction must be in [0, 0.5]")
    if max_side_fraction == 0.0:
        return box
    w, h = box.width, box.height
    cx, cy = box.center
    dx = max_side_fraction * w
    dy = max_side_fraction * h
    x_min = box.x_min + rng.uniform(-dx, dx)
    x_max = box.x_max + rng.uniform(-dx, dx)
    y_min = box.y_min + rng.uniform(-dy, dy)
    y_max = box.y_max + rng.uniform(-dy, dy)
    # clamp to bounds, then force the original center to stay interior
    x_min = int(np.clip(round(x_min), 0, image_size - 1))
    y_min = int(np.clip(round(y_min), 0, image_size - 1))
    x_max = int(np.clip(round(x_max), 1, image_size))
    y_max = int(np.clip(round(y_max), 1, image_size))
    x_min = min(x_min, int(np.floor(cx)))
    y_min = min(y_min, int(np.floor(cy)))
    x_max = max(x_max, int(np.floor(cx)) + 1)
    y_max = max(y_max, int(np.floor(cy)) + 1)
    return BoundingBox(x_min, y_min, x_max, y_max)


def generate_phantom(spec: PhantomSpec, subject_id: str, rng_seed: int) -> list[ImageRecord]:
    """Generate all slices for one subject, deterministic in (spec, subject, seed)."""
    rng = _subject_rng(rng_seed, subject_id)
    records = []
    for slice_idx in range(spec.slices_per_subject):
        texture_rng = _subject_rng(spec.texture_seed, subject_id, salt=slice_idx + 1)
        image, tight_boxes = render_slice(spec, rng, texture_rng)
        boxes = [jitter_box(b, spec.box_jitter_fraction, rng, spec.image_size)
                 for b in tight_boxes]
        provenance = PROVENANCE_REAL if boxes else PROVENANCE_NORMAL
        records.append(ImageRecord(
            image=image, boxes=boxes, subject_id=subject_id, provenance=provenance,
            record_id=f"{subject_id}/slice_{slice_idx:03d}"))
    return records


def generate_corpus(spec: PhantomSpec, rng_seed: int = 0,
                    subject_prefix: str = "subj") -> list[ImageRecord]:
    records = []
    for i in range(spec.subjects):
        records.extend(generate_phantom(spec, f"{subject_prefix}_{i:04d}", rng_seed))
    return records


def split_dataset(records: list[ImageRecord],
                  ratios: tuple[float, float, float] = (0.70, 0.10, 0.20),
                  seed: int = 0) -> DatasetSplits:
    """Partition by subject_id; split sizes follow largest-remainder rounding."""
    if abs(sum(ratios) - 1.0) > 1e-6:
        raise ValueError("ratios must sum to 1")
    subjects = sorted({r.subject_id for r in records})
    n_splits = sum(1 for r in ratios if r > 0)
    if len(subjects) < n_splits:
        raise ValueError(f"{len(subjects)} subjects cannot fill {n_splits} splits")
    order = list(subjects)
    np.random.default_rng(seed).shuffle(order)

    n = len(order)
    exact = [r * n for r in ratios]
    counts = [int(np.floor(e)) for e in exact]
    # hand out the remainder by largest fractional part, earlier split wins ties
    remainder = n - sum(counts)
    fracs = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in fracs[:remainder]:
        counts[i] += 1
    for i, r in enumerate(ratios):
        if r > 0 and counts[i] == 0:
            donor = int(np.argmax(counts))
            counts[donor] -= 1
            counts[i] += 1

    bounds = np.cumsum([0] + counts)
    groups = [set(order[bounds[i]:bounds[i + 1]]) for i in range(3)]
    by_subject = lambda grp: [r for r in records if r.subject_id in grp]
    return DatasetSplits(train=by_subject(groups[0]), val=by_subject(groups[1]),
                         test=by_subject(groups[2]))


def box_contrast(image: np.ndarray, box: BoundingBox,
                 other_boxes: list[BoundingBox] = (), margin: int | None = None) -> float:
    """Mean intensity inside ``box`` minus the mean over a surrounding annulus.

    The annulus is the box dilated by ``margin`` (default: half the short
    side, at least 2 px) minus the box itself and any ``other_boxes``.
    """
    size_y, size_x = image.shape
    if margin is None:
        margin = max(2, round(0.5 * min(box.width, box.height)))
    interior = image[box.y_min:box.y_max, box.x_min:box.x_max]
    mask = np.zeros(image.shape, dtype=bool)
    y0, y1 = max(0, box.y_min - margin), min(size_y, box.y_max + margin)
    x0, x1 = max(0, box.x_min - margin), min(size_x, box.x_max + margin)
    mask[y0:y1, x0:x1] = True
    mask[box.y_min:box.y_max, box.x_min:box.x_max] = False
    for b in other_boxes:
        if b is not box:
            mask[b.y_min:b.y_max, b.x_min:b.x_max] = False
    annulus = image[mask]
    if annulus.size == 0:
        return 0.0
    return float(interior.mean()) - float(annulus.mean())
