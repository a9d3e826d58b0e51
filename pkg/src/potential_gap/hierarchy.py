"""Navigation stack: belief map, global A* planner, local-goal extraction and the
per-tick local planning/control loop, plus a closed-loop simulation runner."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from potential_gap import _kernels as K
from potential_gap.core import Egocircle, Pose2, Trajectory, Twist2, egocircle_update
from potential_gap.field import ConvexGapRegion, GapField, GapRejected, convexify, integrate_field
from potential_gap.gaps import simplify
from potential_gap.safety import (NHParams, SafetySetParams, extract_collision_curves,
                                  nh_map, project, radial_extension)
from potential_gap.sim.dynamics import RobotModel, RobotState, clamp, step
from potential_gap.sim.sensor import SensorModel, raycast_with_flag
from potential_gap.sim.world import World
from potential_gap.trajectory import (NoPath, ScoreParams, evaluate, obstacle_index, reexpress,
                                      select)

RUNNING = "running"
SUCCESS = "success"
COLLISION = "collision"
ABORT = "abort"
TIMEOUT = "timeout"
OUTCOMES = (SUCCESS, COLLISION, ABORT, TIMEOUT)


@dataclass(frozen=True)
class NavConfig:
    """Planner, safety, scoring and control parameters.

    ``None`` fields resolve to values scaled by ``r_ins`` (see ``resolved``).
    The flags ``projection``, ``radial_extension`` and ``conversion`` switch
    the corresponding stages independently.
    """

    r_ins: float = 0.2
    n_ego: int = 720
    projection: bool = True
    radial_extension: bool = True
    conversion: bool = True
    tau_GA: float | None = None
    c_a: float | None = None
    c_d: float | None = None
    eps1: float | None = None
    eps2: float | None = None
    gap_inflation: float | None = None
    sigma: float | None = None
    integration_step: float = 0.05
    trajectory_horizon: float = 10.0
    w1: float = 100.0
    w2: float | None = None
    c_obs: float = 20.0
    r_max: float | None = None
    oscillation_cost: float | None = None
    r_min: float | None = None
    r_nom: float | None = None
    lambda_y: float = 1.0
    heading_gain: float = 1.5
    lookahead: float | None = None
    belief_resolution: float = 0.1
    replan_interval: float = 1.0
    max_failed_replans: int = 5
    timeout: float = 120.0
    goal_tolerance: float = 0.3
    control_rate: float = 20.0
    dynamics_substeps: int = 5

    def resolved(self) -> NavConfig:
        r = self.r_ins
        tau = self.tau_GA if self.tau_GA is not None else (math.pi if self.radial_extension
                                                           else math.pi / 2)
        return replace(
            self,
            tau_GA=tau,
            c_a=4 * r if self.c_a is None else self.c_a,
            c_d=2 * r if self.c_d is None else self.c_d,
            eps1=r if self.eps1 is None else self.eps1,
            eps2=r if self.eps2 is None else self.eps2,
            gap_inflation=r if self.gap_inflation is None else self.gap_inflation,
            w2=1.0 / r if self.w2 is None else self.w2,
            r_max=4 * r if self.r_max is None else self.r_max,
            oscillation_cost=self.c_obs if self.oscillation_cost is None
            else self.oscillation_cost,
            r_min=1.5 * r if self.r_min is None else self.r_min,
            r_nom=3 * r if self.r_nom is None else self.r_nom,
            lookahead=2 * r if self.lookahead is None else self.lookahead,
        )

    @property
    def score_params(self) -> ScoreParams:
        c = self.resolved()
        return ScoreParams(c.w1, c.w2, c.c_obs, c.r_max, c.r_ins)

    @property
    def safety_params(self) -> SafetySetParams:
        c = self.resolved()
        return SafetySetParams(c.r_min, c.r_nom)


@dataclass
class NavStatus:
    outcome: str = RUNNING
    elapsed: float = 0.0
    path_length: float = 0.0
    reason: str = ""

    @property
    def terminal(self) -> bool:
        return self.outcome != RUNNING

    def finish(self, outcome: str, reason: str = "") -> None:
        """Enter a terminal outcome; later calls leave the first one in place."""
        if not self.terminal:
            self.outcome = outcome
            self.reason = reason


# ---------------------------------------------------------------------------
# global planning


class BeliefMap:
    """Binary occupancy accumulated from range hits, with an r_ins-inflated copy."""

    def __init__(self, width_m: float, height_m: float, resolution: float, inflate: float):
        self.resolution = resolution
        self.inflate = inflate
        w = int(math.ceil(width_m / resolution))
        h = int(math.ceil(height_m / resolution))
        self.grid = np.zeros((h, w), dtype=bool)
        self.blocked = np.zeros((h, w), dtype=bool)

    @classmethod
    def from_grid(cls, grid: np.ndarray, resolution: float, inflate: float) -> BeliefMap:
        b = cls(grid.shape[1] * resolution, grid.shape[0] * resolution, resolution, inflate)
        iy, ix = np.nonzero(grid)
        b._mark_cells(ix.astype(np.int64), iy.astype(np.int64))
        return b

    def cell(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def inside(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.grid.shape[1] and 0 <= iy < self.grid.shape[0]

    def _mark_cells(self, ix: np.ndarray, iy: np.ndarray) -> int:
        h, w = self.grid.shape
        ok = (ix >= 0) & (iy >= 0) & (ix < w) & (iy < h)
        ix, iy = ix[ok], iy[ok]
        new = ~self.grid[iy, ix]
        if not new.any():
            return 0
        ix, iy = ix[new], iy[new]
        self.grid[iy, ix] = True
        radius = self.inflate / self.resolution + 0.5
        K.stamp_discs(self.blocked, ix, iy, radius)
        return int(new.sum())

    def mark_points(self, pts: np.ndarray) -> int:
        """Mark world-frame hit points occupied; returns the number of new cells."""
        if len(pts) == 0:
            return 0
        ix = np.floor(pts[:, 0] / self.resolution).astype(np.int64)
        iy = np.floor(pts[:, 1] / self.resolution).astype(np.int64)
        return self._mark_cells(ix, iy)

    def centre(self, ix, iy) -> np.ndarray:
        return (np.column_stack((ix, iy)) + 0.5) * self.resolution

    def path_blocked(self, path: np.ndarray) -> bool:
        if len(path) == 0:
            return True
        ix = np.floor(path[:, 0] / self.resolution).astype(np.int64)
        iy = np.floor(path[:, 1] / self.resolution).astype(np.int64)
        return bool(self.blocked[iy, ix].any())


def _nearest_unblocked(blocked: np.ndarray, ix: int, iy: int, max_r: int = 10):
    if not blocked[iy, ix]:
        return ix, iy
    h, w = blocked.shape
    best = None
    for r in range(1, max_r + 1):
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if max(abs(dx), abs(dy)) != r:
                    continue
                x, y = ix + dx, iy + dy
                if 0 <= x < w and 0 <= y < h and not blocked[y, x]:
                    d = dx * dx + dy * dy
                    if best is None or d < best[0]:
                        best = (d, x, y)
        if best is not None:
            return best[1], best[2]
    return None


def global_plan_points(belief: BeliefMap, start, goal) -> np.ndarray:
    """World-frame (N, 2) path of cell centres from ``start`` to ``goal``; empty if unreachable.

    If the start cell is blocked by inflation (robot close to a wall) the
    search starts from the nearest unblocked cell.
    """
    sx, sy = belief.cell(float(start[0]), float(start[1]))
    gx, gy = belief.cell(float(goal[0]), float(goal[1]))
    if not (belief.inside(sx, sy) and belief.inside(gx, gy)):
        return np.empty((0, 2))
    if belief.blocked[gy, gx]:
        return np.empty((0, 2))
    s = _nearest_unblocked(belief.blocked, sx, sy)
    if s is None:
        return np.empty((0, 2))
    cells, _ = K.astar(belief.blocked, s[0], s[1], gx, gy)
    if len(cells) == 0:
        return np.empty((0, 2))
    pts = belief.centre(cells[:, 0], cells[:, 1])
    pts[-1] = np.asarray(goal, dtype=float)
    return pts


def global_plan(belief: BeliefMap, start: Pose2, goal) -> list[Pose2]:
    """Grid A* (8-connected) over the inflated belief; poses head along the path."""
    pts = global_plan_points(belief, start.xy, goal)
    out = []
    for i, p in enumerate(pts):
        q = pts[min(i + 1, len(pts) - 1)]
        th = math.atan2(q[1] - p[1], q[0] - p[0]) if i + 1 < len(pts) else (
            out[-1].theta if out else start.theta)
        out.append(Pose2(float(p[0]), float(p[1]), th))
    return out


def local_goal(path: np.ndarray, ego: Egocircle, pose: Pose2) -> np.ndarray:
    """Farthest point along the path, from the point nearest the robot, that stays sensed-free.

    A path point qualifies while it is within ``d_max`` and closer than the
    egocircle reading at its bearing. Returned in the robot frame.
    """
    path = np.asarray(path, dtype=float).reshape(-1, 2)
    if len(path) == 0:
        raise ValueError("empty path")
    rel = pose.inverse_transform_points(path)
    dist = np.hypot(rel[:, 0], rel[:, 1])
    k0 = int(np.argmin(dist))
    best = rel[k0]
    inc = ego.scan.angle_increment
    for k in range(k0, len(rel)):
        d = dist[k]
        if d > ego.d_max:
            break
        if d > 0:
            b = math.atan2(rel[k, 1], rel[k, 0])
            i = int(round((b - ego.scan.angle_min) / inc)) % ego.n
            if d >= ego.ranges[i]:
                break
        best = rel[k]
    return best.copy()


def goal_region(ego: Egocircle, goal_rf: np.ndarray, tau: float, r_ins: float,
                gap_id: int) -> ConvexGapRegion | None:
    """Sector straight at a visible final goal, or None when it is not visible.

    The sector widens symmetrically from the goal bearing (up to ``tau``)
    over beams whose readings clear the goal distance by ``r_ins``; its
    radius is the nearest of those readings, so the goal lies inside.
    """
    dg = float(np.hypot(*goal_rf))
    if dg >= ego.d_max - r_ins or dg == 0.0:
        return None
    inc = ego.scan.angle_increment
    b = math.atan2(goal_rf[1], goal_rf[0])
    i0 = ego.index_of(b)
    r = ego.ranges
    need = dg + r_ins
    if r[i0] <= need:
        return None
    half = int(tau / (2 * inc))
    lo = hi = 0
    while lo < half and r[(i0 - lo - 1) % ego.n] > need:
        lo += 1
    while hi < half and r[(i0 + hi + 1) % ego.n] > need:
        hi += 1
    k = min(lo, hi)
    if k == 0:
        return None
    idx = (i0 + np.arange(-k, k + 1)) % ego.n
    radius = float(min(r[idx].min(), ego.d_max))
    extent = 2 * k * inc
    if 2 * dg * math.sin(0.5 * extent) < 2 * r_ins:
        return None
    right = ego.angle(i0) - k * inc
    return ConvexGapRegion.from_bearings(np.zeros(2), right, extent, radius, goal_rf, gap_id)


# ---------------------------------------------------------------------------
# local planning and control


@dataclass
class TickResult:
    command: Twist2
    status: NavStatus
    log: dict
    planning_time: float = 0.0
    trajectory_times: list = field(default_factory=list)


class Navigator:
    """Stateful planning loop for one robot; call ``tick`` once per control period."""

    def __init__(self, config: NavConfig, model: RobotModel, goal, world_size: tuple[float, float]):
        self.config = config.resolved()
        self.model = model
        self.goal = np.asarray(goal, dtype=float).reshape(2)
        c = self.config
        self.belief = BeliefMap(world_size[0], world_size[1], c.belief_resolution, c.r_ins)
        self.score_params = ScoreParams(c.w1, c.w2, c.c_obs, c.r_max, c.r_ins)
        self.safety_params = SafetySetParams(c.r_min, c.r_nom)
        self.nh_params = NHParams(c.lambda_y)
        self.ego: Egocircle | None = None
        self.prev_pose: Pose2 | None = None
        self.path = np.empty((0, 2))
        self.last_replan = -math.inf
        self.failed_replans = 0
        self.current: Trajectory | None = None
        self.tick_index = 0
        self.status = NavStatus()

    # -- global layer --------------------------------------------------------

    def _replan(self, pose: Pose2, now: float) -> bool:
        self.path = global_plan_points(self.belief, pose.xy, self.goal)
        self.last_replan = now
        return len(self.path) > 0

    # -- local layer ---------------------------------------------------------

    def _candidates(self, ego: Egocircle, target: np.ndarray, goal_rf: np.ndarray):
        c = self.config
        raw, final = simplify(ego, c.r_ins, convert=c.conversion, c_a=c.c_a, c_d=c.c_d,
                              eps1=c.eps1, eps2=c.eps2)
        regions = []
        for i, g in enumerate(final):
            try:
                reg = convexify(g, ego, c.tau_GA, target, c.eps1, c.eps2, c.gap_inflation, i)
            except GapRejected:
                continue
            if c.radial_extension:
                try:
                    reg = radial_extension(reg, ego, eps1=c.eps1, eps2=c.eps2)
                except ValueError:
                    pass
            regions.append(reg)
        gr = goal_region(ego, goal_rf, c.tau_GA if not c.radial_extension else math.pi / 2,
                         c.r_ins, len(final))
        if gr is not None:
            regions.append(gr)
        return raw, final, regions

    def _track(self, traj: Trajectory) -> Twist2:
        """Pure pursuit toward the trajectory point one lookahead ahead of the robot."""
        c = self.config
        xy = traj.xy
        d = np.hypot(xy[:, 0], xy[:, 1])
        k0 = int(np.argmin(d))
        ahead = np.nonzero(d[k0:] >= c.lookahead)[0]
        target = xy[k0 + ahead[0]] if len(ahead) else xy[-1]
        dist = float(np.hypot(*target))
        if dist < 1e-9:
            return Twist2()
        speed = self.model.v_max
        goal_rf = self._goal_rf
        gd = float(np.hypot(*goal_rf))
        if gd < c.lookahead:
            speed *= max(gd / c.lookahead, 0.2)
        heading = math.atan2(target[1], target[0])
        return Twist2(speed * target[0] / dist, speed * target[1] / dist, c.heading_gain * heading)

    def tick(self, pose: Pose2, scan, now: float) -> TickResult:
        """One planning cycle from a ground-truth pose and a fresh scan."""
        t0 = time.perf_counter()
        c = self.config
        log = {"tick": self.tick_index, "t": round(now, 6)}
        self.tick_index += 1
        status = self.status
        status.elapsed = now
        if status.terminal:
            return TickResult(Twist2(), status, log)

        delta = Pose2() if self.prev_pose is None else pose.relative_to(self.prev_pose)
        self.ego = egocircle_update(self.ego, delta, scan, c.n_ego)
        if self.current is not None:
            self.current = reexpress(self.current, delta)
            if self.current.length() < c.lookahead:
                self.current = None
        self.prev_pose = pose
        ego = self.ego

        hits = scan.points()
        if len(hits):
            new_cells = self.belief.mark_points(pose.transform_points(hits))
        else:
            new_cells = 0
        self._goal_rf = pose.inverse_transform_points(self.goal[None, :])[0]

        if np.hypot(*(pose.xy - self.goal)) <= c.goal_tolerance:
            status.finish(SUCCESS)
            return TickResult(Twist2(), status, log, time.perf_counter() - t0)

        replanned = False
        if len(self.path) == 0 or (new_cells and self.belief.path_blocked(self._remaining(pose))):
            if now - self.last_replan >= c.replan_interval or len(self.path) > 0:
                replanned = True
                if not self._replan(pose, now):
                    self.failed_replans += 1
        log["replan"] = replanned

        if len(self.path) == 0:
            log.update(raw=0, merged=0, trajectories=0, selected=None, score=None, psi=None)
            return self._fail(log, t0, "global planner found no path")

        target = local_goal(self._remaining(pose), ego, pose)
        raw, final, regions = self._candidates(ego, target, self._goal_rf)
        log["raw"] = len(raw)
        log["merged"] = len(final)
        obstacles = obstacle_index(ego, self.score_params.r_max)
        traj_times = []
        trajs = []
        for reg in regions:
            ts = time.perf_counter()
            f = GapField(reg, c.sigma)
            tr = integrate_field(f, np.zeros(2), c.integration_step, c.trajectory_horizon)
            evaluate([tr], ego, target, self.score_params, obstacles)
            traj_times.append(time.perf_counter() - ts)
            trajs.append((tr, reg))
        candidates = [t for t, _ in trajs]
        if self.current is not None:
            evaluate([self.current], ego, target, self.score_params, obstacles)
        log["trajectories"] = len(candidates)
        try:
            chosen = select(candidates, self.current, c.oscillation_cost)
        except NoPath:
            log.update(selected=None, score=None, psi=None, feasible=0)
            self.current = None
            if now - self.last_replan >= c.replan_interval:
                log["replan"] = True
                self._replan(pose, now)
                self.failed_replans += 1
            return self._fail(log, t0, "no feasible trajectory", traj_times)
        self.failed_replans = 0
        self.current = chosen
        region = next((r for t, r in trajs if t is chosen), None)
        log["feasible"] = sum(1 for t in candidates if t.feasible)
        log["selected"] = chosen.source_gap
        log["score"] = round(float(chosen.score), 6)

        u = self._track(chosen)
        psi_val = None
        if c.projection:
            curves = extract_collision_curves(ego, region)
            res = project(u, np.zeros(2), curves, self.safety_params, return_info=True)
            u = res.command
            psi_val = res.psi
        if not self.model.holonomic:
            u = nh_map(u, self.nh_params)
            if u.v_x < 0.0:
                # never back into space the sensor has not covered; turn instead
                u = Twist2(0.0, 0.0, u.omega)
        cmd = clamp(self.model, u)
        log["psi"] = None if psi_val is None or not math.isfinite(psi_val) else round(float(psi_val), 6)
        log["cmd"] = [round(float(cmd.v_x), 6), round(float(cmd.v_y), 6), round(float(cmd.omega), 6)]
        return TickResult(cmd, status, log, time.perf_counter() - t0, traj_times)

    def _remaining(self, pose: Pose2) -> np.ndarray:
        if len(self.path) < 2:
            return self.path
        d = np.hypot(*(self.path - pose.xy).T)
        return self.path[int(np.argmin(d)):]

    def _fail(self, log, t0, reason, traj_times=()) -> TickResult:
        """No usable trajectory: turn in place toward the goal while waiting to replan."""
        c = self.config
        log["failed_replans"] = self.failed_replans
        if self.failed_replans >= c.max_failed_replans:
            self.status.finish(ABORT, reason)
            return TickResult(Twist2(), self.status, log, time.perf_counter() - t0, list(traj_times))
        b = math.atan2(self._goal_rf[1], self._goal_rf[0])
        cmd = clamp(self.model, Twist2(0.0, 0.0, c.heading_gain * b))
        log["cmd"] = [0.0, 0.0, round(float(cmd.omega), 6)]
        return TickResult(cmd, self.status, log, time.perf_counter() - t0, list(traj_times))


# ---------------------------------------------------------------------------
# closed loop


@dataclass
class EpisodeResult:
    status: NavStatus
    poses: list
    logs: list
    planning_times: list
    trajectory_times: list
    min_clearance: float
    max_psi: float


def run_episode(world: World, model: RobotModel, sensor: SensorModel, config: NavConfig,
                seed: int = 0, keep_logs: bool = False) -> EpisodeResult:
    """Simulate one trial from ``world.start`` to ``world.goal``.

    The planner runs at ``control_rate``; each command is held for
    ``dynamics_substeps`` integration substeps, with the bumper checked
    after every substep. Contact is judged with the body radius of
    ``model``, so a planner configured with a smaller ``r_ins`` can collide.
    """
    cfg = config.resolved()
    rng = np.random.default_rng(seed)
    nav = Navigator(cfg, model, world.goal, world.size)
    state = RobotState(world.start)
    dt = 1.0 / cfg.control_rate
    sub = dt / cfg.dynamics_substeps
    t = 0.0
    poses = [state.pose]
    logs = []
    plan_t = []
    traj_t = []
    min_clear = math.inf
    max_psi = -math.inf
    status = nav.status
    while True:
        scan, inside = raycast_with_flag(world, state.pose, sensor, model.r_ins, rng)
        if inside:
            status.finish(COLLISION, "sensor inside obstacle")
            break
        res = nav.tick(state.pose, scan, t)
        plan_t.append(res.planning_time)
        traj_t.extend(res.trajectory_times)
        if res.log.get("psi") is not None:
            max_psi = max(max_psi, res.log["psi"])
        if keep_logs:
            logs.append(res.log)
        if status.terminal:
            break
        if t >= cfg.timeout:
            status.finish(TIMEOUT)
            break
        for _ in range(cfg.dynamics_substeps):
            prev = state.pose
            state = step(model, state, res.command, sub)
            status.path_length += math.hypot(state.pose.x - prev.x, state.pose.y - prev.y)
            clear = K.nearest_occupied(world.grid, world.resolution, state.pose.x, state.pose.y,
                                       4 * model.r_ins)
            min_clear = min(min_clear, clear)
            if clear <= model.r_ins:
                status.finish(COLLISION, "bumper")
                break
        t += dt
        status.elapsed = t
        poses.append(state.pose)
        if status.terminal:
            break
    return EpisodeResult(status, poses, logs, plan_t, traj_t, min_clear, max_psi)

