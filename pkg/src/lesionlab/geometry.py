"""Axis-aligned boxes in pixel coordinates.

Convention used across the whole package: (x_min, y_min, x_max, y_max),
half-open intervals, origin at the top-left corner. A pixel (ix, iy) has
its center at (ix + 0.5, iy + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class BoundingBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {self!r}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def inside(self, image_size: int) -> bool:
        return 0 <= self.x_min and 0 <= self.y_min and self.x_max <= image_size and self.y_max <= image_size

    def to_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def clip_box(x_min: float, y_min: float, x_max: float, y_max: float,
             image_size: int) -> BoundingBox | None:
    """Round to integers, clamp to [0, image_size] and drop empty results."""
    xa = int(max(0, min(image_size, round(x_min))))
    ya = int(max(0, min(image_size, round(y_min))))
    xb = int(max(0, min(image_size, round(x_max))))
    yb = int(max(0, min(image_size, round(y_max))))
    if xa >= xb or ya >= yb:
        return None
    return BoundingBox(xa, ya, xb, yb)
