"""Occupancy-grid worlds: procedural generation and the plain-text world format.

World files::

    width height resolution
    <height rows of width characters, '#' occupied, '.' free, top row first>
    start x y theta        (optional)
    goal x y               (optional)
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from potential_gap.core import Pose2

KINDS = ("dense", "campus", "office", "sector")


class WorldGenerationError(RuntimeError):
    pass


@dataclass(eq=False)
class World:
    """Occupancy grid with ``grid[iy, ix]`` True for occupied; row 0 is y = 0.

    ``obstacle_count`` is the number of shapes the generator drew (``None``
    for worlds loaded from a file).
    """

    grid: np.ndarray
    resolution: float = 0.05
    name: str = ""
    seed: int | None = None
    start: Pose2 | None = None
    goal: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    obstacle_count: int | None = None

    def __post_init__(self):
        self.grid = np.ascontiguousarray(self.grid, dtype=bool)
        if self.grid.ndim != 2:
            raise ValueError("grid must be 2-D")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.goal is not None:
            self.goal = np.asarray(self.goal, dtype=float).reshape(2)

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def size(self) -> tuple[float, float]:
        return self.width * self.resolution, self.height * self.resolution

    def cell(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def occupied(self, x: float, y: float) -> bool:
        ix, iy = self.cell(x, y)
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            return True
        return bool(self.grid[iy, ix])

    def clearance(self) -> np.ndarray:
        """Per-cell distance (m) from the cell centre to the nearest occupied cell centre."""
        return ndimage.distance_transform_edt(~self.grid) * self.resolution

    def __eq__(self, other):
        if not isinstance(other, World):
            return NotImplemented
        return (np.array_equal(self.grid, other.grid) and self.resolution == other.resolution
                and self.start == other.start
                and ((self.goal is None and other.goal is None)
                     or (self.goal is not None and other.goal is not None
                         and np.array_equal(self.goal, other.goal))))


def dumps(world: World) -> str:
    lines = [f"{world.width} {world.height} {world.resolution!r}"]
    for row in world.grid[::-1]:
        lines.append("".join("#" if c else "." for c in row))
    if world.start is not None:
        s = world.start
        lines.append(f"start {float(s.x)!r} {float(s.y)!r} {float(s.theta)!r}")
    if world.goal is not None:
        lines.append(f"goal {float(world.goal[0])!r} {float(world.goal[1])!r}")
    return "\n".join(lines) + "\n"


def loads(text: str, name: str = "") -> World:
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty world file")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError("header must be 'width height resolution'")
    w, h, res = int(head[0]), int(head[1]), float(head[2])
    rows = lines[1:1 + h]
    if len(rows) != h or any(len(r) != w or set(r) - {"#", "."} for r in rows):
        raise ValueError("grid rows do not match the header")
    grid = np.array([[c == "#" for c in r] for r in rows], dtype=bool)[::-1]
    start = goal = None
    for line in lines[1 + h:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "start" and len(parts) == 4:
            start = Pose2(float(parts[1]), float(parts[2]), float(parts[3]))
        elif parts[0] == "goal" and len(parts) == 3:
            goal = np.array([float(parts[1]), float(parts[2])])
        else:
            raise ValueError(f"unrecognised line: {line!r}")
    return World(grid, res, name, None, start, goal)


def save(world: World, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(dumps(world))


def load(path) -> World:
    with open(path, encoding="ascii") as f:
        return loads(f.read())


# ---------------------------------------------------------------------------
# procedural generation

# min_gap: free space kept between clutter and existing geometry in the campus,
# office and sector worlds; dense-world obstacles are placed independently.
DEFAULTS = {
    "size": 20.0,
    "resolution": 0.05,
    "r_ins": 0.2,
    "min_start_goal": 10.0,
    "obstacles": 40,
    "min_gap": 1.0,
}


class _Canvas:
    def __init__(self, size: float, res: float):
        n = int(round(size / res))
        self.res = res
        self.grid = np.zeros((n, n), dtype=bool)
        self.shapes = 0
        yy, xx = np.mgrid[0:n, 0:n]
        self.cx = (xx + 0.5) * res
        self.cy = (yy + 0.5) * res

    def rect_mask(self, x0, y0, x1, y1):
        r = self.res
        m = np.zeros_like(self.grid)
        i0, i1 = int(round(min(x0, x1) / r)), int(round(max(x0, x1) / r))
        j0, j1 = int(round(min(y0, y1) / r)), int(round(max(y0, y1) / r))
        m[max(j0, 0):max(j1, 0), max(i0, 0):max(i1, 0)] = True
        return m

    def disc_mask(self, x, y, radius):
        return (self.cx - x) ** 2 + (self.cy - y) ** 2 <= radius ** 2

    def polygon_mask(self, pts):
        """Convex polygon given counter-clockwise vertices."""
        inside = np.ones_like(self.grid)
        m = len(pts)
        for i in range(m):
            (ax, ay), (bx, by) = pts[i], pts[(i + 1) % m]
            inside &= (bx - ax) * (self.cy - ay) - (by - ay) * (self.cx - ax) >= 0
        return inside

    def rect(self, x0, y0, x1, y1, value=True):
        m = self.rect_mask(x0, y0, x1, y1)
        if value:
            self.grid |= m
            self.shapes += 1
        else:
            self.grid &= ~m

    def disc(self, x, y, radius):
        self.grid |= self.disc_mask(x, y, radius)
        self.shapes += 1

    def polygon(self, pts):
        self.grid |= self.polygon_mask(pts)
        self.shapes += 1

    def place(self, make_mask, rng, min_gap: float, tries: int = 100) -> bool:
        """Add the first sampled shape that keeps ``min_gap`` free to everything drawn so far."""
        near = ndimage.distance_transform_edt(~self.grid) * self.res < min_gap
        for _ in range(tries):
            m = make_mask(rng)
            if not np.any(m & near):
                self.grid |= m
                self.shapes += 1
                return True
        return False

    def border(self, thickness):
        self.rect(0, 0, self.grid.shape[1] * self.res, thickness)
        self.rect(0, 0, thickness, self.grid.shape[0] * self.res)
        size_x = self.grid.shape[1] * self.res
        size_y = self.grid.shape[0] * self.res
        self.rect(0, size_y - thickness, size_x, size_y)
        self.rect(size_x - thickness, 0, size_x, size_y)


def _convex_blob(rng, x, y, radius):
    k = int(rng.integers(3, 8))
    ang = np.sort(rng.uniform(0, 2 * math.pi, k))
    rad = radius * rng.uniform(0.6, 1.0, k)
    return [(x + r * math.cos(a), y + r * math.sin(a)) for a, r in zip(ang, rad)]


def _dense(c: _Canvas, rng, p):
    size = p["size"]
    for _ in range(int(p["obstacles"])):
        x, y = rng.uniform(1.0, size - 1.0, 2)
        radius = rng.uniform(0.2, 0.6)
        if rng.uniform() < 0.5:
            c.polygon(_convex_blob(rng, x, y, radius))
        else:
            c.disc(x, y, radius)


def _campus(c: _Canvas, rng, p):
    size = p["size"]
    cells = 3
    pitch = size / cells
    for i in range(cells):
        for j in range(cells):
            if rng.uniform() < 0.3:
                continue  # open quad
            margin_x = rng.uniform(1.0, 1.6)
            margin_y = rng.uniform(1.0, 1.6)
            x0, y0 = i * pitch + margin_x, j * pitch + margin_y
            x1, y1 = (i + 1) * pitch - margin_x, (j + 1) * pitch - margin_y
            if x1 - x0 > 0.5 and y1 - y0 > 0.5:
                c.rect(x0, y0, x1, y1)
    def post(rng):
        x, y = rng.uniform(0.5, size - 0.5, 2)
        return c.disc_mask(x, y, rng.uniform(0.15, 0.35))

    for _ in range(int(p["obstacles"]) // 4):
        c.place(post, rng, p["min_gap"])


def _office(c: _Canvas, rng, p):
    size = p["size"]
    wall = 0.1
    rooms = 4
    pitch = size / rooms
    door = 1.0
    for k in range(1, rooms):
        pos = k * pitch
        c.rect(pos - wall / 2, 0, pos + wall / 2, size)
        c.rect(0, pos - wall / 2, size, pos + wall / 2)
    # doors through every interior wall segment
    for k in range(1, rooms):
        pos = k * pitch
        for m in range(rooms):
            lo = m * pitch + 0.6
            hi = (m + 1) * pitch - 0.6 - door
            if rng.uniform() < 0.85 or m == 0:
                d = rng.uniform(lo, hi)
                c.rect(pos - wall, d, pos + wall, d + door, value=False)
            if rng.uniform() < 0.85 or m == 0:
                d = rng.uniform(lo, hi)
                c.rect(d, pos - wall, d + door, pos + wall, value=False)
    def furniture(rng):
        x, y = rng.uniform(0.5, size - 0.5, 2)
        return c.rect_mask(x, y, x + rng.uniform(0.3, 0.8), y + rng.uniform(0.3, 0.8))

    for _ in range(int(p["obstacles"]) // 4):
        c.place(furniture, rng, p["min_gap"])


def _sector(c: _Canvas, rng, p):
    size = p["size"]
    def post(rng):
        x, y = rng.uniform(1.5, size - 1.5, 2)
        return c.disc_mask(x, y, rng.uniform(0.1, 0.3))

    for _ in range(int(p["obstacles"]) // 2):
        c.place(post, rng, p["min_gap"])


_BUILDERS = {"dense": _dense, "campus": _campus, "office": _office, "sector": _sector}


def _components(free: np.ndarray) -> np.ndarray:
    labels, _ = ndimage.label(free, structure=np.ones((3, 3), dtype=bool))
    return labels


def generate_world(kind: str, seed: int, params: dict | None = None, retries: int = 50) -> World:
    """Deterministic procedural world with a connected start/goal pair.

    Start and goal are cell centres with at least ``2 * r_ins`` clearance,
    at least ``min_start_goal`` apart, and joined through cells whose
    clearance exceeds ``r_ins``.
    """
    if kind not in _BUILDERS:
        raise ValueError(f"unknown world kind {kind!r}; expected one of {KINDS}")
    p = dict(DEFAULTS)
    p.update(params or {})
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    res = p["resolution"]
    r_ins = p["r_ins"]
    for _ in range(retries):
        c = _Canvas(p["size"], res)
        _BUILDERS[kind](c, rng, p)
        shapes = c.shapes
        c.border(2 * res)
        grid = c.grid
        clear = ndimage.distance_transform_edt(~grid) * res
        passable = clear > r_ins + res
        labels = _components(passable)
        ok = np.argwhere(clear >= 2 * r_ins + res)
        if len(ok) < 2:
            continue
        for _ in range(100):
            a, b = ok[rng.integers(len(ok), size=2)]
            sa = (float((a[1] + 0.5) * res), float((a[0] + 0.5) * res))
            sb = (float((b[1] + 0.5) * res), float((b[0] + 0.5) * res))
            if math.dist(sa, sb) < p["min_start_goal"]:
                continue
            if labels[a[0], a[1]] == 0 or labels[a[0], a[1]] != labels[b[0], b[1]]:
                continue
            heading = math.atan2(sb[1] - sa[1], sb[0] - sa[0]) + rng.uniform(-math.pi, math.pi)
            start = Pose2(sa[0], sa[1], heading)
            return World(grid, res, f"{kind}-{seed}", seed, start, np.array(sb), p, shapes)
    raise WorldGenerationError(f"could not generate a connected {kind} world for seed {seed}")


def flood_fill(world: World, cell: tuple[int, int]) -> np.ndarray:
    """Free cells 4-connected to ``cell`` (breadth-first)."""
    free = ~world.grid
    seen = np.zeros_like(free)
    ix, iy = cell
    if not free[iy, ix]:
        return seen
    q = deque([(iy, ix)])
    seen[iy, ix] = True
    h, w = free.shape
    while q:
        y, x = q.popleft()
        for ny, nx in ((y + 1, x), (y - 1, x), (y, x + 1), (y, x - 1)):
            if 0 <= ny < h and 0 <= nx < w and free[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                q.append((ny, nx))
    return seen
