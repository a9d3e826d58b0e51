import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_clearance, random_scan
from potential_gap.core import Egocircle, Pose2, Scan, Trajectory
from potential_gap.field import ConvexGapRegion, GapField, GapRejected, convexify
from potential_gap.gaps import simplify
from potential_gap.trajectory import (NoPath, ObstacleIndex, ScoreParams, collision_check, cost,
                                      evaluate, obstacle_index, pose_clearance, reexpress, score,
                                      select, synthesize_all)

P = ScoreParams.for_robot(0.2)


def ego_with(ranges, d_max=5.0):
    n = len(ranges)
    return Egocircle(Scan(np.asarray(ranges, float), -math.pi, 2 * math.pi / n, d_max, 0.2))


def traj(xy, gap=-1):
    xy = np.asarray(xy, float).reshape(-1, 2)
    poses = np.column_stack((xy, np.zeros(len(xy))))
    return Trajectory(poses, np.arange(len(xy), dtype=float), gap)


def point_ego(points, n=720, d_max=5.0):
    """Egocircle whose only readings are the given robot-frame points."""
    r = np.full(n, d_max)
    inc = 2 * math.pi / n
    for p in points:
        i = int(round((math.atan2(p[1], p[0]) + math.pi) / inc)) % n
        r[i] = min(r[i], math.hypot(*p))
    return ego_with(r, d_max)


# ---- parameters and cost ----

def test_robot_scaled_defaults():
    assert P.w1 == 1.0 and P.w2 == pytest.approx(5.0) and P.c_obs == 20.0
    assert P.r_max == pytest.approx(0.8) and P.oscillation_cost == pytest.approx(4.0)
    with pytest.raises(ValueError):
        ScoreParams(r_ins=0.5, r_max=0.4)


def test_cost_pieces():
    assert cost(P.r_max + 1e-9, P) == 0.0
    assert cost(P.r_ins, P) == math.inf
    assert cost(P.r_ins + 1 / P.w2, P) == pytest.approx(P.c_obs / math.e)


@given(st.floats(0.0, 5.0), st.floats(0.0, 1.0))
def test_cost_non_increasing(d, delta):
    assert cost(d + delta, P) <= cost(d, P)


# ---- score ----

def test_score_open_space_on_goal_is_zero():
    ego = ego_with(np.full(360, 5.0))
    t = traj([[0, 0], [0.5, 0], [1.0, 0]])
    assert score(t, ego, [1.0, 0.0], P) == 0.0


def test_score_single_pose_example():
    d = P.r_ins + 1 / P.w2
    ego = point_ego([[d, 0.0]])
    t = traj([[0.0, 0.0]])
    assert score(t, ego, [0.0, 0.0], P) == pytest.approx(P.c_obs / math.e, rel=1e-9)


def test_score_terminal_distance_term():
    ego = ego_with(np.full(360, 5.0))
    t = traj([[0, 0], [1.0, 0]])
    assert score(t, ego, [1.0, 2.0], ScoreParams(w1=3.0)) == pytest.approx(6.0)


def test_score_infeasible_pose():
    ego = point_ego([[0.5, 0.0]])
    t = traj([[0, 0], [0.35, 0.0]])
    assert score(t, ego, [0, 0], P) == math.inf
    with pytest.raises(ValueError):
        score(traj(np.empty((0, 2))), ego, [0, 0], P)


@given(st.floats(1.0, 3.0))
def test_score_monotone_in_obstacle_distance(scale):
    # pushing every reading radially away from a pose at the origin raises its clearance
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.0, 1.0, size=(10, 2))
    t = traj([[0.0, 0.0]])
    assert score(t, point_ego(pts * scale), [0, 0], P) <= score(t, point_ego(pts), [0, 0], P)


# ---- obstacle index and collision checks ----

@pytest.mark.parametrize("cell", [0.2, 0.8, 3.0])
def test_obstacle_index_matches_brute_force(cell):
    rng = np.random.default_rng(int(cell * 10))
    for _ in range(50):
        pts = rng.uniform(-4, 4, size=(int(rng.integers(0, 300)), 2))
        q = rng.uniform(-5, 5, size=(100, 2))
        got = ObstacleIndex(pts, cell).query(q)
        ref = brute_clearance(q, pts)
        ref[ref > cell] = math.inf
        assert np.array_equal(np.isinf(got), np.isinf(ref))
        fin = np.isfinite(ref)
        assert np.allclose(got[fin], ref[fin], rtol=0, atol=1e-12)


def test_pose_clearance_exact_and_cutoff_agree():
    rng = np.random.default_rng(1)
    ego = ego_with(random_scan(rng, 720))
    t = traj(rng.uniform(-2, 2, size=(50, 2)))
    full = pose_clearance(t, ego)
    assert np.allclose(full, brute_clearance(t.xy, ego.points()))
    cut = pose_clearance(t, ego, 0.8)
    near = full <= 0.8
    assert np.allclose(cut[near], full[near])
    assert np.all(np.isinf(cut[~near]))
    with pytest.raises(ValueError):
        pose_clearance(t, ego, 0.8, obstacle_index(ego, 0.5))


def test_collision_open_space():
    ego = ego_with(np.full(360, 5.0))
    assert collision_check(traj([[0, 0], [2, 0]]), ego)


def test_collision_within_r_ins():
    ego = point_ego([[1.0, 0.0]])
    assert not collision_check(traj([[0, 0], [0.81, 0.0]]), ego, 0.2)
    assert collision_check(traj([[0, 0], [1.0 - 0.2 - 1e-3, 0.0]]), ego, 0.2)


def test_collision_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(200):
        ego = ego_with(random_scan(rng, int(rng.choice([180, 360, 720]))))
        t = traj(rng.uniform(-1.5, 1.5, size=(int(rng.integers(1, 40)), 2)))
        r_ins = float(rng.uniform(0.05, 0.4))
        expected = bool(np.all(brute_clearance(t.xy, ego.points()) > r_ins))
        assert collision_check(t, ego, r_ins) == expected


def test_evaluate_agrees_with_score_and_check():
    rng = np.random.default_rng(3)
    ego = ego_with(random_scan(rng, 720))
    trajs = [traj(rng.uniform(-1.5, 1.5, size=(20, 2)), gap=i) for i in range(30)]
    evaluate(trajs, ego, [1.0, 1.0], P)
    for t in trajs:
        assert t.feasible == collision_check(t, ego, P.r_ins)
        assert t.score == (score(t, ego, [1.0, 1.0], P) if t.feasible else math.inf)


# ---- selection ----

def scored(s, gap, feasible=True):
    t = traj([[0, 0]], gap)
    t.score, t.feasible = s, feasible
    return t


def test_select_single():
    c = scored(3.0, 0)
    assert select([c]) is c


def test_select_oscillation_damping():
    cur = scored(10.0, 5)
    assert select([scored(7.0, 1)], cur, oscillation_cost=4.0) is cur
    better = scored(5.0, 1)
    assert select([better], cur, oscillation_cost=4.0) is better


def test_select_tie_breaks():
    cur = scored(10.0, 5)
    assert select([scored(6.0, 1)], cur, 4.0) is cur
    a, b = scored(2.0, 3), scored(2.0, 1)
    assert select([a, b]) is b


def test_select_no_path():
    with pytest.raises(NoPath):
        select([scored(1.0, 0, feasible=False)])
    with pytest.raises(NoPath):
        select([])


def test_select_permutation_invariant_and_feasible():
    rng = np.random.default_rng(4)
    for _ in range(50):
        cands = [scored(float(rng.integers(0, 5)), i, bool(rng.random() < 0.7)) for i in range(5)]
        cur = scored(float(rng.integers(0, 8)), 99, bool(rng.random() < 0.5))
        if not any(c.feasible for c in cands) and not cur.feasible:
            continue
        picks = {id(select(list(p), cur, 1.0)) for p in itertools.permutations(cands)}
        assert len(picks) == 1
        chosen = select(cands, cur, 1.0)
        assert chosen.feasible


# ---- synthesis ----

def _regions(ego, target):
    _, final = simplify(ego)
    out, rejected = [], 0
    for i, g in enumerate(final):
        try:
            out.append(convexify(g, ego, math.pi / 2, target, gap_id=i, inflation=0.2))
        except GapRejected:
            rejected += 1
    return final, out, rejected


def test_synthesize_one_per_region_with_sources():
    n = 720
    r = np.full(n, 1.5)
    for c in (0, 240, 480):
        r[c:c + 60] = 5.0
    ego = ego_with(r)
    final, regions, rejected = _regions(ego, np.array([3.0, 0.0]))
    trajs = synthesize_all([GapField(g) for g in regions])
    assert len(final) == 3 and rejected == 0
    assert len(trajs) == 3
    assert sorted(t.source_gap for t in trajs) == [0, 1, 2]
    assert all(t.complete for t in trajs)


def test_synthesize_skips_rejected_gap():
    n = 720
    r = np.full(n, 1.5)
    for c in (0, 140, 280, 420):
        r[c:c + 60] = 5.0
    r[600:603] = 5.0  # too narrow for the robot once inflated
    ego = ego_with(r)
    final, regions, rejected = _regions(ego, np.array([3.0, 0.0]))
    assert len(final) == 5 and rejected == 1
    assert len(synthesize_all([GapField(g) for g in regions])) == 4


def test_synthesize_goal_at_start_is_empty_complete():
    o = np.zeros(2)
    reg = ConvexGapRegion.from_bearings(o, -0.5, 1.0, 1.0, o)
    t = synthesize_all([GapField(reg)])[0]
    assert t.complete and t.length() == 0.0


def test_synthesize_empty():
    assert synthesize_all([]) == []


def test_reexpress_drops_passed_poses():
    t = traj([[0, 0], [1, 0], [2, 0], [3, 0]])
    out = reexpress(t, Pose2(1.0, 0.0, 0.0))
    assert np.allclose(out.xy, [[0, 0], [1, 0], [2, 0]])
    assert out.times[0] == 0.0
