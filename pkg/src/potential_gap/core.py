"""Shared geometric and scan primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from potential_gap import _kernels

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError(f"non-finite pose {self.x, self.y, self.theta}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def compose(self, other: Pose2) -> Pose2:
        """Return self * other (other expressed in self's frame)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> Pose2:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-c * self.x - s * self.y, s * self.x - c * self.y, -self.theta)

    def relative_to(self, origin: Pose2) -> Pose2:
        """This pose expressed in the frame of ``origin``."""
        return origin.inverse().compose(self)

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        """Map (N, 2) points from this pose's frame into the parent frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return np.asarray(pts, dtype=float) @ rot.T + np.array([self.x, self.y])

    def inverse_transform_points(self, pts: np.ndarray) -> np.ndarray:
        """Map (N, 2) parent-frame points into this pose's frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return (np.asarray(pts, dtype=float) - np.array([self.x, self.y])) @ rot


@dataclass(frozen=True)
class Twist2:
    """Planar velocity: body-frame linear components and yaw rate."""

    v_x: float = 0.0
    v_y: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.v_x, self.v_y, self.omega)):
            raise ValueError(f"non-finite twist {self.v_x, self.v_y, self.omega}")

    def as_array(self) -> np.ndarray:
        return np.array([self.v_x, self.v_y, self.omega])

    def __add__(self, other: Twist2) -> Twist2:
        return Twist2(self.v_x + other.v_x, self.v_y + other.v_y, self.omega + other.omega)

    def __mul__(self, k: float) -> Twist2:
        return Twist2(k * self.v_x, k * self.v_y, k * self.omega)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Scan:
    """A planar range scan.

    Beam ``i`` points at ``angle_min + i * angle_increment`` in the robot
    frame. A reading equal to ``d_max`` means nothing was hit. A zero reading
    is only produced by the simulator when the sensor sits inside an obstacle.
    """

    ranges: np.ndarray
    angle_min: float
    angle_increment: float
    d_max: float
    r_ins: float = 0.2

    def __post_init__(self):
        r = np.ascontiguousarray(self.ranges, dtype=np.float64)
        object.__setattr__(self, "ranges", r)
        r.setflags(write=False)
        if r.ndim != 1 or r.size < 3:
            raise ValueError("a scan needs at least 3 beams")
        if self.angle_increment <= 0 or r.size * self.angle_increment > TWO_PI + 1e-9:
            raise ValueError("scan angular span must lie in (0, 2*pi]")
        if np.any(r < 0) or np.any(r > self.d_max):
            raise ValueError("ranges must lie in [0, d_max]")

    @property
    def n(self) -> int:
        return self.ranges.size

    @property
    def fov(self) -> float:
        return self.n * self.angle_increment

    def angle(self, index: int) -> float:
        return self.angle_min + index * self.angle_increment

    @property
    def angles(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.n)

    def points(self, hits_only: bool = True) -> np.ndarray:
        """Cartesian beam endpoints, (N, 2); by default only beams below d_max."""
        a = self.angles
        r = self.ranges
        if hits_only:
            keep = r < self.d_max
            a, r = a[keep], r[keep]
        return np.column_stack((r * np.cos(a), r * np.sin(a)))

    def __eq__(self, other):
        if not isinstance(other, Scan):
            return NotImplemented
        return (
            np.array_equal(self.ranges, other.ranges)
            and self.angle_min == other.angle_min
            and self.angle_increment == other.angle_increment
            and self.d_max == other.d_max
            and self.r_ins == other.r_ins
        )


@dataclass(frozen=True, eq=False)
class Egocircle:
    """Robot-centred 360 degree range buffer with per-beam staleness."""

    scan: Scan
    staleness: np.ndarray = field(default=None)

    def __post_init__(self):
        if abs(self.scan.fov - TWO_PI) > 1e-9:
            raise ValueError("an egocircle must span exactly 2*pi")
        st = self.staleness
        st = np.zeros(self.scan.n, dtype=np.int64) if st is None else np.asarray(st, dtype=np.int64)
        if st.shape != (self.scan.n,):
            raise ValueError("staleness must have one entry per beam")
        st.setflags(write=False)
        object.__setattr__(self, "staleness", st)

    @classmethod
    def empty(cls, n: int, d_max: float, r_ins: float = 0.2, staleness: int = 0) -> Egocircle:
        scan = Scan(np.full(n, d_max), -math.pi, TWO_PI / n, d_max, r_ins)
        return cls(scan, np.full(n, staleness, dtype=np.int64))

    @property
    def ranges(self) -> np.ndarray:
        return self.scan.ranges

    @property
    def n(self) -> int:
        return self.scan.n

    @property
    def d_max(self) -> float:
        return self.scan.d_max

    @property
    def r_ins(self) -> float:
        return self.scan.r_ins

    def angle(self, index: int) -> float:
        return self.scan.angle(index % self.n)

    def index_of(self, angle: float) -> int:
        """Bin containing ``angle``."""
        return int(round(wrap_angle(angle - self.scan.angle_min) / self.scan.angle_increment)) % self.n

    def points(self) -> np.ndarray:
        return self.scan.points()

    def __eq__(self, other):
        if not isinstance(other, Egocircle):
            return NotImplemented
        return self.scan == other.scan and np.array_equal(self.staleness, other.staleness)


def polar_to_cart(index: int, range_: float, scan: Scan) -> np.ndarray:
    """Cartesian point of beam ``index`` at distance ``range_`` in the robot frame."""
    if not 0 <= index < scan.n:
        raise IndexError(f"beam index {index} outside [0, {scan.n})")
    a = scan.angle(index)
    return np.array([range_ * math.cos(a), range_ * math.sin(a)])


def cart_to_polar(point, scan: Scan) -> tuple[int, float]:
    """Nearest beam index and range of a robot-frame point.

    Raises ``ValueError`` when the bearing falls outside the scan's field of view.
    """
    x, y = float(point[0]), float(point[1])
    a = math.atan2(y, x)
    rel = (a - scan.angle_min + 0.5 * scan.angle_increment) % TWO_PI
    idx = int(math.floor(rel / scan.angle_increment))
    if idx >= scan.n:
        if scan.fov >= TWO_PI - 1e-9:
            idx %= scan.n
        else:
            raise ValueError("point lies outside the scan field of view")
    return idx, math.hypot(x, y)


def egocircle_update(prev: Egocircle | None, odom_delta: Pose2, new_scan: Scan | None,
                     n: int | None = None) -> Egocircle:
    """Propagate ``prev`` through ``odom_delta`` and overwrite with ``new_scan``.

    ``odom_delta`` is the new robot pose expressed in the previous robot frame.
    Propagated readings are re-binned with a keep-minimum rule; bins left empty
    between two neighbouring readings of the same surface (closer than
    ``2 * r_ins``) are filled by intersecting the bin ray with that surface
    segment. Bins with no information hold ``d_max``.
    """
    if prev is None:
        if new_scan is None:
            raise ValueError("need a previous egocircle or a scan")
        prev = Egocircle.empty(n or int(round(TWO_PI / new_scan.angle_increment)),
                               new_scan.d_max, new_scan.r_ins, staleness=1)
    ego_n = prev.n
    d_max = prev.d_max
    r_ins = prev.r_ins
    ranges, stale = _kernels.propagate_egocircle(
        prev.ranges, prev.staleness, prev.scan.angle_min, prev.scan.angle_increment,
        d_max, 2.0 * r_ins, odom_delta.x, odom_delta.y, odom_delta.theta,
    )
    if new_scan is not None:
        if new_scan.d_max != d_max:
            raise ValueError("scan and egocircle disagree on d_max")
        bin_angles = prev.scan.angle_min + prev.scan.angle_increment * np.arange(ego_n)
        rel = np.mod(bin_angles - new_scan.angle_min + 0.5 * new_scan.angle_increment, TWO_PI)
        beam = np.floor(rel / new_scan.angle_increment).astype(np.int64)
        covered = beam < new_scan.n
        ranges[covered] = new_scan.ranges[beam[covered]]
        stale[covered] = 0
    scan = Scan(ranges, prev.scan.angle_min, prev.scan.angle_increment, d_max, r_ins)
    return Egocircle(scan, stale)


@dataclass(eq=False)
class Trajectory:
    """Discretised robot-frame path: rows of (x, y, theta) with timestamps."""

    poses: np.ndarray
    times: np.ndarray
    source_gap: int = -1
    score: float = math.inf
    feasible: bool = True
    complete: bool = False
    exit_code: int = 0

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=float).reshape(-1, 3)
        self.times = np.asarray(self.times, dtype=float)
        if self.times.shape != (len(self.poses),):
            raise ValueError("one timestamp per pose")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def xy(self) -> np.ndarray:
        return self.poses[:, :2]

    @property
    def end(self) -> np.ndarray:
        return self.poses[-1, :2]

    def length(self) -> float:
        if len(self.poses) < 2:
            return 0.0
        return float(np.sum(np.hypot(*np.diff(self.xy, axis=0).T)))
