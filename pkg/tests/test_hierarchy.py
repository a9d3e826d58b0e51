import math

import numpy as np
import pytest
from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import dijkstra

from potential_gap import _kernels as K
from potential_gap.core import Egocircle, Pose2, Scan
from potential_gap.hierarchy import (ABORT, COLLISION, SUCCESS, BeliefMap, NavConfig, Navigator,
                                     global_plan, global_plan_points, goal_region, local_goal,
                                     run_episode)
from potential_gap.sim import RobotModel, SensorModel, World, raycast


def boxed(w=8.0, h=4.0, res=0.05):
    g = np.zeros((int(round(h / res)), int(round(w / res))), dtype=bool)
    g[0, :] = g[-1, :] = g[:, 0] = g[:, -1] = True
    return g


def ego_with(ranges, d_max=5.0):
    n = len(ranges)
    return Egocircle(Scan(np.asarray(ranges, float), -math.pi, 2 * math.pi / n, d_max, 0.2))


def dijkstra_cost(blocked, s, g):
    """Independent 8-connected shortest path cost with the no-corner-cutting rule."""
    h, w = blocked.shape
    a = lil_matrix((h * w, h * w))
    for y in range(h):
        for x in range(w):
            if blocked[y, x]:
                continue
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    vx, vy = x + dx, y + dy
                    if (dx, dy) == (0, 0) or not (0 <= vx < w and 0 <= vy < h):
                        continue
                    if blocked[vy, vx]:
                        continue
                    if dx and dy and (blocked[y, vx] or blocked[vy, x]):
                        continue
                    a[y * w + x, vy * w + vx] = math.hypot(dx, dy)
    d = dijkstra(a.tocsr(), indices=s[1] * w + s[0])
    return d[g[1] * w + g[0]]


def path_cost(cells):
    return float(np.sum(np.hypot(*np.diff(cells, axis=0).T)))


# ---- global planner ----

def test_straight_corridor_gives_straight_path():
    b = BeliefMap(6.0, 1.0, 0.1, 0.1)
    pts = global_plan_points(b, (0.55, 0.55), (5.55, 0.55))
    assert len(pts) == 51
    assert np.allclose(pts[:, 1], 0.55)
    assert np.all(np.diff(pts[:, 0]) > 0)


def test_global_plan_poses_head_along_path():
    b = BeliefMap(6.0, 1.0, 0.1, 0.1)
    poses = global_plan(b, Pose2(0.55, 0.55, 1.0), (5.55, 0.55))
    assert all(p.theta == pytest.approx(0.0) for p in poses)


def test_blocked_goal_gives_empty_path():
    g = np.zeros((20, 20), dtype=bool)
    g[10, 10] = True
    b = BeliefMap.from_grid(g, 0.1, 0.1)
    assert len(global_plan_points(b, (0.25, 0.25), (1.05, 1.05))) == 0


def test_unreachable_goal_gives_empty_path():
    g = np.zeros((20, 20), dtype=bool)
    g[:, 10] = True
    b = BeliefMap.from_grid(g, 0.1, 0.0)
    assert len(global_plan_points(b, (0.25, 0.25), (1.75, 0.25))) == 0


def test_astar_matches_dijkstra_on_l_corridor():
    blocked = np.ones((12, 12), dtype=bool)
    blocked[1:3, 1:11] = False
    blocked[1:11, 9:11] = False
    cells, c = K.astar(blocked, 1, 1, 10, 10)
    assert c == pytest.approx(dijkstra_cost(blocked, (1, 1), (10, 10)))
    assert path_cost(cells) == pytest.approx(c)
    assert c >= 9.0
    assert c < 18.0


@pytest.mark.parametrize("seed", range(8))
def test_astar_matches_dijkstra_on_random_grids(seed):
    rng = np.random.default_rng(seed)
    blocked = rng.random((15, 15)) < 0.3
    blocked[0, 0] = blocked[14, 14] = False
    cells, c = K.astar(blocked, 0, 0, 14, 14)
    ref = dijkstra_cost(blocked, (0, 0), (14, 14))
    if math.isinf(ref):
        assert len(cells) == 0 and math.isinf(c)
    else:
        assert c == pytest.approx(ref)
        assert path_cost(cells) == pytest.approx(c)
        assert not blocked[cells[:, 1], cells[:, 0]].any()


def test_belief_inflation_blocks_neighbours():
    b = BeliefMap(2.0, 2.0, 0.1, 0.2)
    assert b.mark_points(np.array([[1.05, 1.05]])) == 1
    assert b.mark_points(np.array([[1.05, 1.05]])) == 0
    assert b.blocked[10, 12] and not b.blocked[10, 13]


# ---- local goal ----

def test_local_goal_open_space_reaches_horizon():
    ego = ego_with(np.full(720, 5.0))
    path = np.column_stack((np.linspace(0, 8, 81), np.zeros(81)))
    lg = local_goal(path, ego, Pose2())
    assert lg[0] == pytest.approx(4.9) and lg[1] == pytest.approx(0.0)


def test_local_goal_stops_before_a_reading():
    r = np.full(720, 5.0)
    r[355:366] = 2.0
    ego = ego_with(r)
    path = np.column_stack((np.linspace(0, 8, 81), np.zeros(81)))
    lg = local_goal(path, ego, Pose2())
    assert lg[0] == pytest.approx(1.9)


def test_local_goal_in_robot_frame():
    ego = ego_with(np.full(720, 5.0))
    path = np.column_stack((np.full(31, 1.0), np.linspace(0, 3, 31)))
    lg = local_goal(path, ego, Pose2(1.0, 0.0, math.pi / 2))
    assert lg == pytest.approx([3.0, 0.0])


def test_local_goal_starts_from_nearest_point():
    ego = ego_with(np.full(720, 5.0))
    path = np.column_stack((np.linspace(-3, 3, 61), np.zeros(61)))
    lg = local_goal(path, ego, Pose2(2.0, 0.0, 0.0))
    assert lg == pytest.approx([1.0, 0.0])


def test_goal_region_contains_visible_goal():
    ego = ego_with(np.full(720, 5.0))
    reg = goal_region(ego, np.array([2.0, 1.0]), math.pi / 2, 0.2, 3)
    assert reg is not None and reg.gap_id == 3
    assert reg.contains(np.array([2.0, 1.0]))


def test_goal_region_absent_when_goal_hidden():
    r = np.full(720, 5.0)
    r[340:381] = 1.0
    assert goal_region(ego_with(r), np.array([2.0, 0.0]), math.pi / 2, 0.2, 0) is None
    assert goal_region(ego_with(np.full(720, 5.0)), np.array([6.0, 0.0]), math.pi / 2, 0.2, 0) is None


# ---- configuration ----

def test_nav_config_resolves_robot_scaled_values():
    c = NavConfig(r_ins=0.25).resolved()
    assert c.c_a == pytest.approx(1.0) and c.c_d == pytest.approx(0.5)
    assert c.r_max == pytest.approx(1.0) and c.w2 == pytest.approx(4.0)
    assert c.r_min == pytest.approx(0.375) and c.r_nom == pytest.approx(0.75)
    assert c.tau_GA == pytest.approx(math.pi)
    assert NavConfig(radial_extension=False).resolved().tau_GA == pytest.approx(math.pi / 2)
    assert c.oscillation_cost == c.c_obs
    assert NavConfig(oscillation_cost=3.0).resolved().oscillation_cost == 3.0


# ---- closed loop ----

def open_world():
    return World(boxed(), 0.05, "open", 0, Pose2(1.0, 2.0, 0.0), np.array([7.0, 2.0]))


def test_tick_is_deterministic():
    w = open_world()
    sensor = SensorModel()
    outs = []
    for _ in range(2):
        nav = Navigator(NavConfig(), RobotModel(), w.goal, w.size)
        cmds = []
        pose = w.start
        for k in range(5):
            scan = raycast(w, pose, sensor, 0.2, np.random.default_rng(k))
            res = nav.tick(pose, scan, 0.05 * k)
            cmds.append(res.command.as_array())
            pose = Pose2(pose.x + 0.02, pose.y, pose.theta)
        outs.append(np.array(cmds))
    assert np.array_equal(outs[0], outs[1])


def test_open_world_reaches_goal_monotonically():
    w = open_world()
    res = run_episode(w, RobotModel(), SensorModel(), NavConfig(), seed=0, keep_logs=True)
    assert res.status.outcome == SUCCESS
    d = np.array([math.hypot(p.x - 7.0, p.y - 2.0) for p in res.poses])
    assert np.all(np.diff(d) <= 1e-9)
    assert res.status.path_length == pytest.approx(6.0 - NavConfig().goal_tolerance, abs=0.1)
    assert res.logs[0]["replan"] and res.max_psi < 0


def test_walled_off_goal_aborts_after_failed_replans():
    g = boxed()
    g[:, 100:104] = True
    w = World(g, 0.05, "wall", 0, Pose2(1.0, 2.0, 0.0), np.array([7.0, 2.0]))
    res = run_episode(w, RobotModel(), SensorModel(), NavConfig(), seed=0, keep_logs=True)
    assert res.status.outcome == ABORT
    assert res.logs[-1]["failed_replans"] == NavConfig().max_failed_replans
    assert res.status.path_length == pytest.approx(0.0)


def test_undersized_planner_without_projection_hits_the_bumper():
    g = boxed()
    g[:, 100:104] = True
    g[36:44, 100:104] = False
    w = World(g, 0.05, "slot", 0, Pose2(1.0, 2.0, 0.0), np.array([7.0, 2.0]))
    cfg = NavConfig(r_ins=0.05, projection=False)
    res = run_episode(w, RobotModel(), SensorModel(), cfg, seed=0)
    assert res.status.outcome == COLLISION
    assert res.status.reason == "bumper"
    assert res.min_clearance <= RobotModel().r_ins


def test_unicycle_turns_instead_of_reversing():
    w = World(boxed(), 0.05, "open", 0, Pose2(4.0, 2.0, math.pi), np.array([7.0, 2.0]))
    nav = Navigator(NavConfig(), RobotModel("nonholonomic_1st"), w.goal, w.size)
    scan = raycast(w, w.start, SensorModel.with_fov(math.radians(120)), 0.2, np.random.default_rng(0))
    cmd = nav.tick(w.start, scan, 0.0).command
    assert cmd.v_x == 0.0 and cmd.v_y == 0.0 and abs(cmd.omega) > 0
