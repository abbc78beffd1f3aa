"""2-D pose model for the proximity service: the FOV is a circular sector."""
from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_FOV = math.pi / 3
DEFAULT_RANGE = 15.0
_EPS = 1e-9


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float]
    heading: float = 0.0
    fov_angle: float = DEFAULT_FOV
    range: float = DEFAULT_RANGE

    def __post_init__(self):
        if not 0 < self.fov_angle < 2 * math.pi:
            raise ValueError("fov_angle must lie in (0, 2*pi)")
        if not self.range > 0:
            raise ValueError("range must be positive")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


def in_fov(pose: Pose, point: tuple[float, float]) -> bool:
    """Boundary-inclusive sector test; the camera position itself counts as out."""
    dx = point[0] - pose.position[0]
    dy = point[1] - pose.position[1]
    dist = math.hypot(dx, dy)
    if dist == 0 or dist > pose.range * (1 + _EPS):
        return False
    off = math.atan2(dy, dx) - pose.heading
    off = math.atan2(math.sin(off), math.cos(off))
    return abs(off) <= pose.fov_angle / 2 + _EPS
