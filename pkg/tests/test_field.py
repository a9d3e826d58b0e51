import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (circulation_ref, potential_ref, random_interior_point, random_region)
from potential_gap.core import Egocircle
from potential_gap.field import (ConvexGapRegion, GapField, GapRejected, attractive_grad,
                                 circulation, combined_field, convexify, integrate_field,
                                 place_local_goal, potential, potential_grad, sample_field)
from potential_gap.gaps import Gap

N = 720
EGO = Egocircle.empty(N, 8.0)


def sym_region(extent=math.pi / 3, radius=2.0, eps2=0.3):
    o = np.zeros(2)
    tmp = ConvexGapRegion.from_bearings(o, -extent / 2, extent, radius, o)
    goal = np.array([radius + eps2, 0.0])
    return ConvexGapRegion(o, tmp.p_r, tmp.p_l, goal, extent)


def gap_of_width(deg, rng_r=2.0, rng_l=2.0, centre_deg=0.0):
    k = int(round(deg / 360 * N))
    ri = EGO.index_of(math.radians(centre_deg - deg / 2))
    return Gap(ri, (ri + k) % N, rng_r, rng_l, k, N)


# ---- convexify / local goal ----

def test_convexify_keeps_narrow_gap():
    reg = convexify(gap_of_width(60), EGO, math.pi / 2)
    assert reg.angular_extent == pytest.approx(math.radians(60))


@pytest.mark.parametrize("deg", [150, 200])
def test_convexify_caps_extent_and_contains_goal(deg):
    target = np.array([5.0, 0.0])
    reg = convexify(gap_of_width(deg), EGO, math.pi / 2, target)
    assert reg.angular_extent == pytest.approx(math.pi / 2)
    b = math.atan2(reg.local_goal[1], reg.local_goal[0])
    rel = (b - reg.right_bearing) % (2 * math.pi)
    assert 0 <= rel <= reg.angular_extent


def test_convexify_slides_toward_target():
    target = 5.0 * np.array([math.cos(1.2), math.sin(1.2)])
    reg = convexify(gap_of_width(150), EGO, math.pi / 2, target)
    left = reg.right_bearing + reg.angular_extent
    # slid by the least amount: the target bearing lands on the left gap line
    assert left == pytest.approx(1.2, abs=1e-2)
    assert reg.angular_extent == pytest.approx(math.pi / 2)


def test_convexify_rejects_gap_narrower_than_robot():
    with pytest.raises(GapRejected):
        convexify(gap_of_width(4, 1.0, 1.0), EGO, inflation=0.2)
    with pytest.raises(GapRejected):
        convexify(gap_of_width(10, 1.0, 1.0), EGO, min_width=0.5)


@pytest.mark.parametrize("max_extent", [math.pi / 2, math.pi])
def test_region_is_convex(max_extent):
    rng = np.random.default_rng(5)
    for _ in range(100):
        reg = random_region(rng, max_extent)
        a, b = random_interior_point(rng, reg), random_interior_point(rng, reg)
        for t in np.linspace(0, 1, 11):
            assert reg.contains((1 - t) * a + t * b, tol=1e-9)


def test_local_goal_centred():
    reg = sym_region()
    g = place_local_goal(reg.origin, reg.p_r, reg.p_l, np.array([10.0, 0.0]), 0.2, 0.3)
    assert np.allclose(g, [2.3, 0.0])


def test_local_goal_clamped_to_left_side():
    reg = sym_region(extent=math.pi / 3, radius=2.0)
    left = math.pi / 6
    tb = left + math.radians(30)
    g = place_local_goal(reg.origin, reg.p_r, reg.p_l, 5 * np.array([math.cos(tb), math.sin(tb)]),
                         eps1=0.2, eps2=0.3)
    b = left - 0.2 / 2.0
    assert np.allclose(g, 2.3 * np.array([math.cos(b), math.sin(b)]))


def test_local_goal_requires_positive_eps2():
    reg = sym_region()
    with pytest.raises(ValueError):
        place_local_goal(reg.origin, reg.p_r, reg.p_l, None, 0.2, 0.0)


def test_local_goal_visible_from_whole_region():
    rng = np.random.default_rng(11)
    for _ in range(200):
        reg = random_region(rng)
        x = random_interior_point(rng, reg)
        # the segment x -> goal must leave through the curve, never a gap line
        ts = np.linspace(0, 1, 200)
        pts = x + ts[:, None] * (reg.local_goal - x)
        inside = np.array([reg.contains(p, tol=1e-9) for p in pts])
        first_out = np.argmin(inside) if not inside.all() else len(ts)
        assert inside[:first_out].all() and not inside[first_out:].any()
        if first_out < len(ts):
            p = pts[first_out]
            assert np.linalg.norm(p - reg.origin) >= reg.radius - 0.05


# ---- potential and gradient ----

def test_potential_matches_reference():
    rng = np.random.default_rng(2)
    for _ in range(200):
        reg = random_region(rng)
        fld = GapField(reg)
        x = rng.uniform(-6, 6, 2)
        assert potential(fld, x) == pytest.approx(
            potential_ref(x, reg.origin, reg.radius, reg.local_goal, reg.curve_active), abs=1e-12)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    checked = 0
    while checked < 300:
        reg = random_region(rng)
        fld = GapField(reg)
        x = rng.uniform(-6, 6, 2)
        rho = np.linalg.norm(x - reg.origin)
        if (np.linalg.norm(x - reg.local_goal) < 1e-3 or abs(rho - reg.radius) < 1e-3
                or rho < 1e-3):
            continue
        fd = np.array([(potential(fld, x + h * e) - potential(fld, x - h * e)) / (2 * h)
                       for e in np.eye(2)])
        g = potential_grad(fld, x)
        assert np.linalg.norm(g - fd) / np.linalg.norm(g) < 1e-5
        checked += 1


def test_attraction_on_curve_is_goal_direction():
    reg = sym_region()
    fld = GapField(reg)
    x = np.array([2.0, 0.0])
    assert np.allclose(attractive_grad(fld, x), [1.0, 0.0])


def test_attraction_inside_bisects_goal_and_curve_directions():
    rng = np.random.default_rng(4)
    for _ in range(100):
        reg = random_region(rng)
        fld = GapField(reg)
        x = random_interior_point(rng, reg)
        to_goal = (reg.local_goal - x) / np.linalg.norm(reg.local_goal - x)
        out = (x - reg.origin) / np.linalg.norm(x - reg.origin)
        expected = (to_goal + out) / np.linalg.norm(to_goal + out)
        assert np.allclose(attractive_grad(fld, x), expected, atol=1e-9)
        assert np.linalg.norm(attractive_grad(fld, x)) == pytest.approx(1.0)


def test_attraction_zero_at_goal():
    reg = sym_region()
    assert np.array_equal(attractive_grad(GapField(reg), reg.local_goal), [0.0, 0.0])


# ---- circulation ----

def test_circulation_matches_reference():
    rng = np.random.default_rng(6)
    for _ in range(300):
        reg = random_region(rng)
        fld = GapField(reg, sigma=float(rng.uniform(0.01, 1.0)))
        x = random_interior_point(rng, reg)
        assert np.allclose(circulation(fld, x),
                           circulation_ref(x, reg.origin, reg.p_r, reg.p_l, fld.sigma), atol=1e-9)


def test_circulation_left_term_is_inward_normal_on_left_line():
    reg = sym_region()
    fld = GapField(reg, sigma=1e-9)
    x = 0.5 * reg.p_l
    e_l = reg.p_l / np.linalg.norm(reg.p_l)
    inward = np.array([e_l[1], -e_l[0]])
    assert np.allclose(circulation(fld, x), inward, atol=1e-9)


def test_circulation_symmetric_on_bisector():
    reg = sym_region(extent=math.pi / 2)
    fld = GapField(reg)
    for r in np.linspace(0.1, 1.9, 10):
        c = circulation(fld, np.array([r, 0.0]))
        assert c[0] >= 0
        assert abs(c[1]) < 1e-12


def test_circulation_vanishes_for_tiny_sigma():
    reg = sym_region()
    fld = GapField(reg, sigma=1e-6)
    assert np.linalg.norm(circulation(fld, np.array([1.0, 0.1]))) < 1e-12


def test_circulation_singular_at_endpoint():
    reg = sym_region()
    with pytest.raises(ValueError):
        circulation(GapField(reg), reg.p_l)


# ---- combined field ----

def test_combined_field_inflow_and_radial_progress():
    rng = np.random.default_rng(8)
    for _ in range(500):
        reg = random_region(rng)
        fld = GapField(reg)
        # gap-line points
        t = float(rng.uniform(1e-6, 1 - 1e-6))
        for p, sign in ((reg.p_l, 1.0), (reg.p_r, -1.0)):
            x = reg.origin + t * (p - reg.origin)
            e = (p - reg.origin) / reg.radius
            outward = sign * np.array([-e[1], e[0]])
            assert float(np.dot(combined_field(fld, x), outward)) <= 1e-9
        # interior points
        x = random_interior_point(rng, reg)
        v = combined_field(fld, x)
        e_rho = (x - reg.origin) / np.linalg.norm(x - reg.origin)
        assert float(np.dot(v, e_rho)) > 0
        assert np.linalg.norm(v) > 0


def test_combined_field_past_curve_is_attraction_only():
    reg = sym_region()
    fld = GapField(reg)
    x = np.array([2.1, 0.05])
    v = combined_field(fld, x)
    assert np.allclose(v, attractive_grad(fld, x))
    assert np.allclose(v, (reg.local_goal - x) / np.linalg.norm(reg.local_goal - x))


# ---- integration ----

def test_integrate_from_vertex_of_symmetric_gap_is_straight():
    reg = sym_region()
    tr = integrate_field(GapField(reg), reg.origin)
    assert tr.complete
    assert np.allclose(tr.xy[:, 1], 0.0, atol=1e-12)
    assert np.allclose(tr.end, reg.local_goal, atol=1e-6)


def test_integrate_from_goal_is_empty_path():
    reg = sym_region()
    tr = integrate_field(GapField(reg), reg.local_goal)
    assert tr.complete
    assert tr.length() == 0.0


def test_integrate_passage_random():
    rng = np.random.default_rng(9)
    for _ in range(300):
        reg = random_region(rng)
        x = random_interior_point(rng, reg)
        tr = integrate_field(GapField(reg), x)
        assert tr.exit_code == 1
        assert tr.complete


def test_integrate_timestamps_follow_arc_length():
    reg = sym_region()
    tr = integrate_field(GapField(reg), np.array([0.5, 0.3]), dt=0.05, speed=0.5)
    steps = np.hypot(*np.diff(tr.xy, axis=0).T)
    assert np.allclose(np.diff(tr.times), steps / 0.5)


def test_integrate_mirror_symmetry():
    rng = np.random.default_rng(10)
    for _ in range(50):
        ext = float(rng.uniform(0.2, math.pi / 2))
        radius = float(rng.uniform(1, 4))
        o = np.zeros(2)
        tmp = ConvexGapRegion.from_bearings(o, -ext / 2, ext, radius, o)
        tb = float(rng.uniform(-ext / 2, ext / 2))
        target = 8 * np.array([math.cos(tb), math.sin(tb)])
        g = place_local_goal(o, tmp.p_r, tmp.p_l, target, 0.1, 0.2)
        reg = ConvexGapRegion(o, tmp.p_r, tmp.p_l, g, ext)
        flip = np.array([1.0, -1.0])
        mreg = ConvexGapRegion(o, tmp.p_l * flip, tmp.p_r * flip, g * flip, ext)
        start = random_interior_point(rng, reg)
        a = integrate_field(GapField(reg), start)
        b = integrate_field(GapField(mreg), start * flip)
        assert len(a) == len(b)
        assert np.allclose(a.xy, b.xy * flip, atol=1e-6)


def test_sample_field_lines():
    text = sample_field(GapField(sym_region()), spacing=0.25)
    rows = [list(map(float, ln.split())) for ln in text.strip().splitlines()]
    assert rows and all(len(r) == 4 for r in rows)
