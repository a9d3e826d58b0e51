"""Convex gap regions and their attractive-plus-circulation vector fields.

A region is the circular sector about a vertex (normally the robot) spanned
by the two gap lines and closed by the gap curve, the arc through both
endpoints at equal distance R from the vertex. The flow combines the unit
descent direction of

    phi(x) = |x - goal| + max(0, R - |x - vertex|)

with two rotational terms anchored at the endpoints whose strength decays
with angular distance (about the vertex) from each endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from potential_gap import _kernels as K
from potential_gap.core import Egocircle, Trajectory, wrap_angle
from potential_gap.gaps import Gap

TAU_GA = math.pi / 2


class GapRejected(ValueError):
    """The gap cannot host a local goal after shrinking."""


def _as_point(p) -> np.ndarray:
    if type(p) is np.ndarray and p.shape == (2,) and p.dtype == np.float64:
        return p
    return np.asarray(p, dtype=float).reshape(2)


def _inside(o, r, l, x, tol: float = 0.0) -> bool:
    c, lv, rv = K.boundary_values(x[0], x[1], o[0], o[1], r[0], r[1], l[0], l[1])
    return c >= -tol and lv >= -tol and rv >= -tol


def _bearing(v) -> float:
    return math.atan2(v[1], v[0])


@dataclass(frozen=True, eq=False)
class ConvexGapRegion:
    """Sector ``origin -> p_r -> arc -> p_l`` with its local goal.

    ``p_r`` and ``p_l`` lie at the same distance from ``origin``; ``p_l`` is
    reached from ``p_r`` by turning counter-clockwise by ``angular_extent``.
    """

    origin: np.ndarray
    p_r: np.ndarray
    p_l: np.ndarray
    local_goal: np.ndarray
    angular_extent: float
    gap_id: int = -1

    def __post_init__(self):
        for name in ("origin", "p_r", "p_l", "local_goal"):
            object.__setattr__(self, name, _as_point(getattr(self, name)))
        if not 0.0 < self.angular_extent <= math.pi:
            raise ValueError("region angular extent must lie in (0, pi]")
        o, pr, pl = self.origin, self.p_r, self.p_l
        rr = math.hypot(pr[0] - o[0], pr[1] - o[1])
        rl = math.hypot(pl[0] - o[0], pl[1] - o[1])
        if rr <= 0 or abs(rr - rl) > 1e-9 * max(1.0, rr):
            raise ValueError("gap endpoints must be equidistant from the vertex")
        object.__setattr__(self, "_radius", rr)

    @classmethod
    def from_bearings(cls, origin, right_bearing: float, extent: float, radius: float,
                      local_goal, gap_id: int = -1) -> ConvexGapRegion:
        o = _as_point(origin)
        p_r = o + radius * np.array([math.cos(right_bearing), math.sin(right_bearing)])
        left = right_bearing + extent
        p_l = o + radius * np.array([math.cos(left), math.sin(left)])
        return cls(o, p_r, p_l, local_goal, extent, gap_id)

    @property
    def radius(self) -> float:
        return self._radius

    @property
    def right_bearing(self) -> float:
        return _bearing(self.p_r - self.origin)

    @property
    def bisector(self) -> float:
        """Bearing of the angular bisector seen from the vertex."""
        return wrap_angle(self.right_bearing + 0.5 * self.angular_extent)

    @property
    def curve_active(self) -> bool:
        """Whether the local goal lies beyond the gap curve."""
        return self.side_of_curve(self.local_goal) < 0.0

    def side_of_curve(self, x) -> float:
        """Positive inside the arc radius, negative beyond it."""
        x = _as_point(x)
        return self._radius - math.hypot(x[0] - self.origin[0], x[1] - self.origin[1])

    def contains(self, x, tol: float = 0.0) -> bool:
        return _inside(self.origin, self.p_r, self.p_l, _as_point(x), tol)

    def curve_length(self) -> float:
        return self.radius * self.angular_extent


@dataclass(frozen=True)
class GapField:
    region: ConvexGapRegion
    sigma: float = field(default=None)

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma", self.region.angular_extent / 4.0)
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def _args(self):
        g = self.region
        return (g.origin[0], g.origin[1], g.p_r[0], g.p_r[1], g.p_l[0], g.p_l[1])


def place_local_goal(origin, p_r, p_l, target=None, eps1: float = 0.2, eps2: float = 0.2) -> np.ndarray:
    """Local goal ``eps2`` beyond the gap curve, on the target bearing if it passes through.

    When the target bearing (seen from the vertex) misses the gap, or meets
    the curve within arc length ``eps1`` of an endpoint, it is clamped to
    ``eps1`` inside the nearer endpoint. A target already inside the region
    is returned unchanged. Without a target the goal sits on the bisector.
    """
    if eps2 <= 0:
        raise ValueError("eps2 must be positive")
    if eps1 < 0:
        raise ValueError("eps1 must be non-negative")
    o, pr, pl = _as_point(origin), _as_point(p_r), _as_point(p_l)
    radius = math.hypot(*(pr - o))
    if radius == 0.0:
        raise GapRejected("degenerate gap curve")
    ar = _bearing(pr - o)
    extent = (_bearing(pl - o) - ar) % (2.0 * math.pi)
    if extent == 0.0:
        raise GapRejected("degenerate gap curve")
    if target is None:
        off = 0.5 * extent
    else:
        target = _as_point(target)
        if _inside(o, pr, pl, target):
            return target.copy()
        rel = (_bearing(target - o) - ar) % (2.0 * math.pi)
        if rel <= extent:
            off = rel
        else:
            # outside the wedge: snap to the angularly nearer endpoint
            off = extent if rel - extent < 2.0 * math.pi - rel else 0.0
    margin = eps1 / radius
    if extent < 2.0 * margin:
        off = 0.5 * extent
    else:
        off = min(max(off, margin), extent - margin)
    b = ar + off
    return o + (radius + eps2) * np.array([math.cos(b), math.sin(b)])


def convexify(gap: Gap, ego: Egocircle, tau_GA: float = TAU_GA, target=None,
              eps1: float | None = None, eps2: float | None = None,
              inflation: float = 0.0, gap_id: int = -1, min_width: float = 0.0) -> ConvexGapRegion:
    """Shrink a swept gap to at most ``tau_GA`` and build its region and local goal.

    The region is the sector about the robot at the nearer endpoint range,
    which every reading inside the gap reaches. The shrunken window is
    centred on the gap unless that would leave the target bearing outside
    it, in which case it slides the least amount needed to contain the
    target. ``inflation`` first trims each side by the angle a disc of that
    radius subtends at the corresponding endpoint. The gap is rejected when
    nothing is left, or when the final chord is shorter than ``min_width``.
    """
    eps1 = ego.r_ins if eps1 is None else eps1
    eps2 = ego.r_ins if eps2 is None else eps2
    if not 0.0 < tau_GA <= math.pi:
        raise ValueError("tau_GA must lie in (0, pi]")
    ar, al = gap.bearings(ego)
    radius = gap.near_range

    a0, a1 = ar, al
    if inflation > 0.0:
        a0 += math.asin(min(1.0, inflation / gap.right_range))
        a1 -= math.asin(min(1.0, inflation / gap.left_range))
        if a1 - a0 <= 1e-9:
            raise GapRejected("gap narrower than the robot")
    if a1 - a0 > tau_GA:
        mid = 0.5 * (a0 + a1)
        s = mid - 0.5 * tau_GA
        if target is not None:
            tb = mid + wrap_angle(math.atan2(target[1], target[0]) - mid)
            if tb < s:
                s = max(a0, tb)
            elif tb > s + tau_GA:
                s = min(a1 - tau_GA, tb - tau_GA)
        a0, a1 = s, s + tau_GA
    extent = min(a1 - a0, tau_GA)
    if 2.0 * radius * math.sin(0.5 * extent) < min_width:
        raise GapRejected("gap too small to contain its local goal")
    origin = np.zeros(2)
    tmp = ConvexGapRegion.from_bearings(origin, a0, extent, radius, origin, gap_id)
    goal = place_local_goal(origin, tmp.p_r, tmp.p_l, target, eps1, eps2)
    return ConvexGapRegion(origin, tmp.p_r, tmp.p_l, goal, extent, gap_id)


def potential(fld: GapField, x) -> float:
    x = _as_point(x)
    g = fld.region
    return K.potential(x[0], x[1], *fld._args(), g.local_goal[0], g.local_goal[1], g.curve_active)


def potential_grad(fld: GapField, x) -> np.ndarray:
    """Gradient of the attractive potential (points uphill)."""
    x = _as_point(x)
    g = fld.region
    return np.array(K.potential_grad(x[0], x[1], *fld._args(), g.local_goal[0], g.local_goal[1],
                                     g.curve_active, g.bisector))


def attractive_grad(fld: GapField, x) -> np.ndarray:
    """Unit-length attractive direction (normalised negative gradient); zero at the goal."""
    x = _as_point(x)
    g = fld.region
    return np.array(K.attractive_dir(x[0], x[1], *fld._args(), g.local_goal[0], g.local_goal[1],
                                     g.curve_active, g.bisector))


def circulation(fld: GapField, x) -> np.ndarray:
    x = _as_point(x)
    g = fld.region
    if np.array_equal(x, g.p_l) or np.array_equal(x, g.p_r):
        raise ValueError("singular circulation at a gap endpoint")
    return np.array(K.circulation(x[0], x[1], *fld._args(), fld.sigma, g.bisector))


def combined_field(fld: GapField, x) -> np.ndarray:
    """Attraction plus circulation; past the gap curve only attraction remains."""
    x = _as_point(x)
    a = attractive_grad(fld, x)
    if fld.region.side_of_curve(x) < 0.0:
        return a
    return a + circulation(fld, x)


def integrate_field(fld: GapField, start=None, dt: float = 0.05, t_max: float = 10.0,
                    speed: float = 1.0) -> Trajectory:
    """Euler-integrate the normalised combined field from ``start``.

    Each step covers ``dt * speed`` metres, halved when it would cut across
    a gap line; timestamps follow arc length at ``speed``. Stops on reaching
    the local goal or after ``t_max / dt`` steps; headings follow the
    direction of travel. ``exit_code`` records how the path first left the
    region (1 through the gap curve, 2/3 through the left/right gap line).
    """
    g = fld.region
    start = g.origin if start is None else _as_point(start)
    max_steps = int(math.ceil(t_max / dt))
    xs, ys, ss, count, exit_code, reached = K.integrate_field(
        *fld._args(), g.local_goal[0], g.local_goal[1], g.curve_active, fld.sigma, g.bisector,
        float(start[0]), float(start[1]), dt * speed, max_steps)
    return _trajectory(xs[:count], ys[:count], ss[:count] / speed, g.gap_id, reached, exit_code)


def _trajectory(xs, ys, times, gap_id, complete, exit_code, theta0: float = 0.0) -> Trajectory:
    if len(xs) > 1:
        heading = np.arctan2(np.diff(ys), np.diff(xs))
        heading = np.append(heading, heading[-1])
    else:
        heading = np.array([theta0])
    poses = np.column_stack((xs, ys, heading))
    return Trajectory(poses, times, gap_id, complete=bool(complete),
                      exit_code=int(exit_code))


def sample_field(fld: GapField, spacing: float = 0.1) -> str:
    """Grid of field vectors over the region's bounding box as ``x y u v`` lines."""
    g = fld.region
    lo = np.minimum(g.origin - g.radius, g.local_goal)
    hi = np.maximum(g.origin + g.radius, g.local_goal)
    lines = []
    for x in np.arange(lo[0], hi[0] + 1e-9, spacing):
        for y in np.arange(lo[1], hi[1] + 1e-9, spacing):
            p = np.array([x, y])
            if not g.contains(p) or np.array_equal(p, g.p_l) or np.array_equal(p, g.p_r):
                continue
            u, v = combined_field(fld, p)
            lines.append(f"{x:.4f} {y:.4f} {u:.6f} {v:.6f}")
    return "\n".join(lines) + "\n"
