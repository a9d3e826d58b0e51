"""Corrections for non-ideal robots: nonholonomic folding, radial extension of
gap regions and the projection-operator velocity governor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from potential_gap.core import Egocircle, Pose2, Twist2
from potential_gap.field import ConvexGapRegion, place_local_goal


class InCollision(ValueError):
    """The robot body already overlaps a sensed obstacle."""


@dataclass(frozen=True)
class NHParams:
    lambda_y: float = 1.0

    def __post_init__(self):
        if self.lambda_y <= 0:
            raise ValueError("lambda_y must be positive")


@dataclass(frozen=True)
class SafetySetParams:
    r_min: float = 0.3
    r_nom: float = 0.6

    def __post_init__(self):
        if not 0 < self.r_min < self.r_nom:
            raise ValueError("need 0 < r_min < r_nom")

    @classmethod
    def for_robot(cls, r_ins: float, r_min: float | None = None,
                  r_nom: float | None = None) -> SafetySetParams:
        return cls(1.5 * r_ins if r_min is None else r_min, 3.0 * r_ins if r_nom is None else r_nom)


@dataclass(frozen=True, eq=False)
class CollisionCurves:
    """Obstacle points (robot frame) bounding the active gap on either side."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


def extract_collision_curves(ego: Egocircle, region: ConvexGapRegion | None = None,
                             half_width: float = math.pi / 2) -> CollisionCurves:
    """Readings within ``half_width`` of the gap bisector, minus the gap's own beams.

    The gap's beams are those between the bearings of its two endpoints as
    seen from the robot. Without a region, every reading is returned.
    """
    r = ego.ranges
    a = ego.scan.angles
    keep = r < ego.d_max
    if region is not None:
        ar = math.atan2(region.p_r[1], region.p_r[0])
        span = (math.atan2(region.p_l[1], region.p_l[0]) - ar) % (2.0 * math.pi)
        mid = ar + 0.5 * span
        rel = np.abs(np.remainder(a - mid + math.pi, 2.0 * math.pi) - math.pi)
        keep &= np.remainder(a - ar, 2.0 * math.pi) > span
        keep &= rel <= half_width
    return CollisionCurves(np.column_stack((r[keep] * np.cos(a[keep]), r[keep] * np.sin(a[keep]))))


def nh_map(u: Twist2, params: NHParams = NHParams()) -> Twist2:
    """Fold a planar command into unicycle form: nu = u1, omega = lambda_y * u2 + u3."""
    return Twist2(u.v_x, 0.0, params.lambda_y * u.v_y + u.omega)


def nearest(x, curves: CollisionCurves) -> tuple[float, np.ndarray, bool]:
    """(distance, unit vector from nearest point to x, degenerate) for point ``x``.

    ``degenerate`` marks a zero distance or a tie between nearest points;
    ties resolve to the first index.
    """
    x = np.asarray(x, dtype=float)
    diff = x - curves.points
    d = np.hypot(diff[:, 0], diff[:, 1])
    i = int(np.argmin(d))
    di = float(d[i])
    if di == 0.0:
        return 0.0, np.zeros(2), True
    tie = int(np.count_nonzero(d <= di * (1.0 + 1e-12))) > 1
    return di, diff[i] / di, tie


def psi_of_distance(d: float, params: SafetySetParams) -> float:
    k = params.r_min / params.r_nom
    return (params.r_min / d - k) / (1.0 - k)


def psi(x, curves: CollisionCurves, params: SafetySetParams) -> float:
    """Level-set value: 0 at distance r_nom, 1 at r_min, -inf with no obstacles."""
    if len(curves) == 0:
        return -math.inf
    d, _, _ = nearest(x, curves)
    if d <= 0.0:
        return math.inf
    return psi_of_distance(d, params)


@dataclass(frozen=True)
class Projection:
    command: Twist2
    psi: float
    modified: bool
    degenerate: bool


def project(u: Twist2, x, curves: CollisionCurves, params: SafetySetParams,
            return_info: bool = False):
    """Governor on the planar velocity (v_x, v_y); yaw rate passes through.

    With n the unit vector from the nearest obstacle point to ``x``: the
    command is untouched while psi < 0 or while it moves away (<n, u> > 0);
    otherwise it loses psi times its approaching component, which removes
    that component completely at psi = 1.
    """
    if len(curves) == 0:
        out = Projection(u, -math.inf, False, False)
        return out if return_info else out.command
    d, n, degenerate = nearest(x, curves)
    p = psi_of_distance(d, params) if d > 0 else math.inf
    if degenerate and d == 0.0:
        out = Projection(u, p, False, True)
        return out if return_info else out.command
    v = np.array([u.v_x, u.v_y])
    dot = float(n @ v)
    if p < 0.0 or dot > 0.0:
        out = Projection(u, p, False, degenerate)
    else:
        w = v - p * dot * n
        out = Projection(Twist2(float(w[0]), float(w[1]), u.omega), p, True, degenerate)
    return out if return_info else out.command


def radial_extension(region: ConvexGapRegion, ego: Egocircle, robot: Pose2 | None = None,
                     eps1: float | None = None, eps2: float | None = None) -> ConvexGapRegion:
    """Move the region vertex back along the bisector so the robot sits inside.

    The largest obstacle-free disc about the robot has radius (nearest
    reading - r_ins), floored at 0.05 r_ins. The new vertex is the point of
    that circle straight behind the robot along the bisector; the new gap
    lines pass through where the circle meets the old gap lines, so the new
    extent is the inscribed angle, half the old one. The new curve is the arc
    about the new vertex through the nearer of the points where those lines
    meet the old curve. The construction needs the robot at (or near) the
    old vertex; ``ValueError`` is raised when the circle misses a gap line or
    the result would not contain the robot.
    """
    robot = Pose2() if robot is None else robot
    eps1 = ego.r_ins if eps1 is None else eps1
    eps2 = ego.r_ins if eps2 is None else eps2
    c = robot.xy
    nearest_reading = float(np.min(ego.ranges))
    if nearest_reading <= ego.r_ins:
        raise InCollision("in-collision")
    rc = max(nearest_reading - ego.r_ins, 0.05 * ego.r_ins)
    if not region.contains(c):
        raise ValueError("robot must lie in the region")
    o = region.origin
    b = region.bisector
    ub = np.array([math.cos(b), math.sin(b)])
    new_o = c - rc * ub

    def circle_hit(endpoint):
        # forward intersection of the circle about the robot with the line o -> endpoint
        d = endpoint - o
        d = d / np.hypot(*d)
        f = o - c
        bq = float(f @ d)
        disc = bq * bq - (float(f @ f) - rc * rc)
        if disc <= 0.0:
            raise ValueError("free circle does not reach the gap lines")
        t = -bq + math.sqrt(disc)
        return o + t * d

    q_r = circle_hit(region.p_r)
    q_l = circle_hit(region.p_l)
    if np.hypot(*(c - o)) <= 1e-12 * max(1.0, rc):
        # robot on the vertex: the inscribed angle is exactly half the old extent
        extent = 0.5 * region.angular_extent
        ar = b - 0.5 * extent
    else:
        ar = math.atan2(*(q_r - new_o)[::-1])
        al = math.atan2(*(q_l - new_o)[::-1])
        extent = (al - ar) % (2.0 * math.pi)

    def arc_hit(q):
        # distance from new_o along new_o -> q to the old curve
        d = (q - new_o) / np.hypot(*(q - new_o))
        f = new_o - o
        bq = float(f @ d)
        disc = bq * bq - (float(f @ f) - region.radius ** 2)
        return -bq + math.sqrt(max(disc, 0.0))

    if not 0.0 < extent <= math.pi:
        raise ValueError("robot too far from the vertex to extend the region")
    radius = min(arc_hit(q_r), arc_hit(q_l))
    tmp = ConvexGapRegion.from_bearings(new_o, ar, extent, radius, new_o, region.gap_id)
    goal = place_local_goal(new_o, tmp.p_r, tmp.p_l, region.local_goal, eps1, eps2)
    out = ConvexGapRegion(new_o, tmp.p_r, tmp.p_l, goal, extent, region.gap_id)
    if not out.contains(c):
        raise ValueError("robot too far from the vertex to extend the region")
    return out

