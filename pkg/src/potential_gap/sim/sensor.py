"""Simulated planar range sensor and contact bumper."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from potential_gap import _kernels as K
from potential_gap.core import Pose2, Scan
from potential_gap.sim.world import World


@dataclass(frozen=True)
class SensorModel:
    fov: float = 2.0 * math.pi
    n_beams: int = 720
    d_max: float = 5.0
    sigma_r: float = 0.0

    def __post_init__(self):
        if not 0 < self.fov <= 2.0 * math.pi + 1e-12:
            raise ValueError("fov must lie in (0, 2*pi]")
        if self.n_beams < 3 or self.d_max <= 0 or self.sigma_r < 0:
            raise ValueError("invalid sensor parameters")

    @classmethod
    def with_fov(cls, fov: float, increment: float = 2.0 * math.pi / 720, **kw) -> SensorModel:
        """Sensor with the given field of view at a fixed angular increment."""
        return cls(fov, max(3, int(round(fov / increment))), **kw)

    @property
    def angle_increment(self) -> float:
        return self.fov / self.n_beams

    @property
    def angle_min(self) -> float:
        return -math.pi if self.fov >= 2.0 * math.pi - 1e-12 else -0.5 * self.fov


def raycast_with_flag(world: World, pose: Pose2, sensor: SensorModel, r_ins: float = 0.2,
                      rng: np.random.Generator | None = None) -> tuple[Scan, bool]:
    """Scan from ``pose`` and whether the sensor sits inside an obstacle.

    Rays march cell by cell; a ray's range is its distance to the first
    occupied cell boundary it crosses, or ``d_max``. Gaussian jitter of
    ``sigma_r`` is added to hits only, drawn from ``rng``.
    """
    angles = pose.theta + sensor.angle_min + sensor.angle_increment * np.arange(sensor.n_beams)
    ranges, inside = K.raycast(world.grid, world.resolution, pose.x, pose.y, angles, sensor.d_max)
    if sensor.sigma_r > 0 and not inside:
        rng = np.random.default_rng() if rng is None else rng
        hit = ranges < sensor.d_max
        noise = rng.normal(0.0, sensor.sigma_r, sensor.n_beams)
        ranges = np.where(hit, np.clip(ranges + noise, 1e-3, sensor.d_max), ranges)
    scan = Scan(ranges, sensor.angle_min, sensor.angle_increment, sensor.d_max, r_ins)
    return scan, bool(inside)


def raycast(world: World, pose: Pose2, sensor: SensorModel, r_ins: float = 0.2,
            rng: np.random.Generator | None = None) -> Scan:
    return raycast_with_flag(world, pose, sensor, r_ins, rng)[0]


def obstacle_distance(world: World, pose: Pose2, radius: float) -> float:
    """Distance to the nearest occupied cell, or inf if none is within ``radius``."""
    return float(K.nearest_occupied(world.grid, world.resolution, pose.x, pose.y, radius))


def bumper_check(world: World, pose: Pose2, r_ins: float) -> bool:
    """True when an occupied cell is within ``r_ins`` of the robot centre."""
    return obstacle_distance(world, pose, r_ins) <= r_ins
