"""Progressive growth schedule: resolution ladder and fade-in bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

_MIN_TARGET, _MAX_TARGET = 8, 256


def _per_stage(value, n_stages: int, name: str) -> list[int]:
    if isinstance(value, int):
        counts = [value] * n_stages
    else:
        counts = [int(v) for v in value]
        if len(counts) != n_stages:
            raise ValueError(f"{name} needs one entry per stage ({n_stages})")
    if any(c < 0 for c in counts):
        raise ValueError(f"{name} must be non-negative")
    return counts


@dataclass(frozen=True)
class ProgressiveSchedule:
    stages: tuple[int, ...]           # resolutions, 4 doubling up to target
    fade_images: tuple[int, ...]      # per stage; stage 0 has no fade
    stable_images: tuple[int, ...]

    def __post_init__(self):
        if self.stages[0] != 4 or any(b != 2 * a for a, b in zip(self.stages, self.stages[1:])):
            raise ValueError("stages must double from 4")

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def final_resolution(self) -> int:
        return self.stages[-1]

    def stage_images(self, stage: int) -> int:
        return self.fade_images[stage] + self.stable_images[stage]

    @property
    def total_images(self) -> int:
        return sum(self.stage_images(s) for s in range(self.n_stages))

    def state_at(self, images_seen: int) -> tuple[int, float]:
        """(stage index, fade-in alpha) after ``images_seen`` training images.

        Alpha ramps linearly 0 -> 1 over the stage's fade phase, then holds 1.
        Beyond the schedule the final stage stays at alpha 1.
        """
        if images_seen < 0:
            raise ValueError("images_seen must be >= 0")
        offset = images_seen
        for s in range(self.n_stages):
            span = self.stage_images(s)
            if offset < span or s == self.n_stages - 1:
                fade = self.fade_images[s]
                alpha = 1.0 if fade == 0 else min(1.0, offset / fade)
                return s, alpha
            offset -= span
        raise AssertionError("unreachable")


def build_schedule(target_resolution: int,
                   fade_images: int | list[int],
                   stable_images: int | list[int]) -> ProgressiveSchedule:
    """Ladder [4, 8, ..., target]; counts may be scalars or per-stage lists."""
    if (target_resolution < _MIN_TARGET or target_resolution > _MAX_TARGET
            or target_resolution & (target_resolution - 1)):
        raise ValueError(f"target resolution must be a power of two in "
                         f"[{_MIN_TARGET}, {_MAX_TARGET}], got {target_resolution}")
    stages = []
    r = 4
    while r <= target_resolution:
        stages.append(r)
        r *= 2
    n = len(stages)
    fades = _per_stage(fade_images, n, "fade_images")
    fades[0] = 0  # nothing to fade from at 4x4
    stables = _per_stage(stable_images, n, "stable_images")
    return ProgressiveSchedule(stages=tuple(stages), fade_images=tuple(fades),
                               stable_images=tuple(stables))
