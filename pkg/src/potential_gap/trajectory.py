"""Candidate trajectory synthesis, scoring, selection and collision checking."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from potential_gap import _kernels as K
from potential_gap.core import Egocircle, Pose2, Trajectory
from potential_gap.field import GapField, integrate_field

__all__ = [
    "Trajectory", "ScoreParams", "NoPath", "synthesize_all", "cost", "pose_clearance",
    "score", "select", "collision_check", "reexpress", "evaluate", "obstacle_index", "ObstacleIndex",
]


class NoPath(RuntimeError):
    """No feasible trajectory is available; the caller should replan globally."""


@dataclass(frozen=True)
class ScoreParams:
    w1: float = 1.0
    w2: float = 5.0
    c_obs: float = 20.0
    r_max: float = 0.8
    r_ins: float = 0.2

    def __post_init__(self):
        if min(self.w1, self.w2, self.c_obs, self.r_max, self.r_ins) <= 0:
            raise ValueError("score parameters must be positive")
        if not self.r_ins < self.r_max:
            raise ValueError("r_ins must be smaller than r_max")

    @classmethod
    def for_robot(cls, r_ins: float, **kw) -> ScoreParams:
        """Defaults scaled to the robot: w2 = 1/r_ins, r_max = 4 r_ins."""
        kw.setdefault("w2", 1.0 / r_ins)
        kw.setdefault("r_max", 4.0 * r_ins)
        return cls(r_ins=r_ins, **kw)

    @property
    def oscillation_cost(self) -> float:
        return 0.2 * self.c_obs


def cost(d, params: ScoreParams):
    """Per-pose obstacle cost: infinite at contact, exponential decay up to r_max, then 0."""
    d = np.asarray(d, dtype=float)
    out = params.c_obs * np.exp(-params.w2 * (d - params.r_ins))
    out = np.where(d > params.r_max, 0.0, out)
    out = np.where(d <= params.r_ins, np.inf, out)
    return out if out.ndim else float(out)


class ObstacleIndex:
    """Egocircle readings bucketed on a square grid for range-limited nearest queries."""

    def __init__(self, points: np.ndarray, cell: float):
        if cell <= 0:
            raise ValueError("cell size must be positive")
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        self.px = np.ascontiguousarray(pts[:, 0])
        self.py = np.ascontiguousarray(pts[:, 1])
        self.cell = float(cell)
        if len(pts):
            self._grid = K.bucket_points(self.px, self.py, self.cell)

    def __len__(self) -> int:
        return self.px.size

    def query(self, xy: np.ndarray) -> np.ndarray:
        """Nearest-point distance per row of ``xy``; inf when farther than ``cell``."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if len(self) == 0:
            return np.full(len(xy), math.inf)
        return K.bucket_min_distances(np.ascontiguousarray(xy[:, 0]), np.ascontiguousarray(xy[:, 1]),
                                      self.px, self.py, *self._grid, self.cell)


def obstacle_index(ego: Egocircle, cutoff: float) -> ObstacleIndex:
    return ObstacleIndex(ego.points(), cutoff)


def pose_clearance(traj: Trajectory, ego: Egocircle, cutoff: float = math.inf,
                   index: ObstacleIndex | None = None) -> np.ndarray:
    """Distance from every pose to the nearest egocircle reading.

    Distances beyond a finite ``cutoff`` (and all distances when there are
    no readings) come back as inf. A prebuilt ``index`` must use ``cutoff``
    as its cell size.
    """
    if not math.isfinite(cutoff):
        pts = ego.points()
        if len(pts) == 0 or len(traj) == 0:
            return np.full(len(traj), math.inf)
        diff = traj.xy[:, None, :] - pts[None, :, :]
        return np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1))
    if index is None:
        index = obstacle_index(ego, cutoff)
    elif index.cell != cutoff:
        raise ValueError("index cell size must equal the cutoff")
    return index.query(traj.xy)


def collision_check(traj: Trajectory, ego: Egocircle, r_ins: float | None = None,
                    index: ObstacleIndex | None = None) -> bool:
    """True when no pose's body disc reaches an egocircle reading.

    A pose is in collision when a reading lies within ``r_ins`` of its
    centre, which is exactly when that reading falls inside the simulated
    body circle along its beam.
    """
    r_ins = ego.r_ins if r_ins is None else r_ins
    if len(traj) == 0:
        return True
    cutoff = r_ins if index is None else index.cell
    if cutoff < r_ins:
        raise ValueError("index cell size must be at least r_ins")
    return bool(np.all(pose_clearance(traj, ego, cutoff, index) > r_ins))


def score(traj: Trajectory, ego: Egocircle, goal, params: ScoreParams,
          index: ObstacleIndex | None = None) -> float:
    """Summed per-pose obstacle cost plus ``w1`` times the end-to-goal distance."""
    if len(traj) == 0:
        raise ValueError("cannot score an empty trajectory")
    c = cost(pose_clearance(traj, ego, params.r_max, index), params)
    total = float(np.sum(c))
    if math.isinf(total):
        return math.inf
    goal = np.asarray(goal, dtype=float)
    return total + params.w1 * float(np.hypot(*(traj.end - goal)))


def synthesize_all(fields: list[GapField], start: Pose2 | None = None, dt: float = 0.05,
                   t_max: float = 10.0) -> list[Trajectory]:
    """Integrate every gap field from ``start`` (default: the robot, at the frame origin)."""
    start = Pose2() if start is None else start
    out = []
    for f in fields:
        out.append(integrate_field(f, start.xy, dt=dt, t_max=t_max))
    return out


def evaluate(trajs: list[Trajectory], ego: Egocircle, goal, params: ScoreParams,
             index: ObstacleIndex | None = None) -> list[Trajectory]:
    """Collision-check and score trajectories in place; returns them for chaining.

    ``index`` may be shared across calls within one tick; its cell size must
    be ``params.r_max``.
    """
    index = obstacle_index(ego, params.r_max) if index is None else index
    goal = np.asarray(goal, dtype=float)
    for t in trajs:
        if len(t) == 0:
            t.feasible, t.score = True, math.inf
            continue
        d = pose_clearance(t, ego, params.r_max, index)
        t.feasible = bool(np.all(d > params.r_ins))
        if t.feasible:
            end = t.poses[-1]
            t.score = float(np.sum(cost(d, params))) + params.w1 * math.hypot(
                end[0] - goal[0], end[1] - goal[1])
        else:
            t.score = math.inf
    return trajs


def select(candidates: list[Trajectory], current: Trajectory | None = None,
           oscillation_cost: float = 4.0) -> Trajectory:
    """Lowest score wins; every candidate pays ``oscillation_cost`` to replace ``current``.

    Ties go to ``current``, then to the lowest source gap id. Raises
    ``NoPath`` when nothing feasible is available.
    """
    options = []
    if current is not None and current.feasible and math.isfinite(current.score):
        options.append((current.score, 0, current.source_gap, current))
    penalty = oscillation_cost if options else 0.0
    for c in candidates:
        if c.feasible and math.isfinite(c.score):
            options.append((c.score + penalty, 1, c.source_gap, c))
    if not options:
        raise NoPath("no feasible trajectory")
    return min(options, key=lambda o: o[:3])[3]


def reexpress(traj: Trajectory, delta: Pose2, trim: bool = True) -> Trajectory:
    """Express ``traj`` in the frame reached by moving ``delta`` and drop passed poses."""
    xy = delta.inverse_transform_points(traj.xy)
    th = np.array([math.remainder(t - delta.theta, 2.0 * math.pi) for t in traj.poses[:, 2]])
    poses = np.column_stack((xy, th))
    times = traj.times
    if trim and len(poses) > 1:
        k = int(np.argmin(np.hypot(xy[:, 0], xy[:, 1])))
        poses, times = poses[k:], times[k:] - times[k]
    return replace(traj, poses=poses, times=times)
