"""Gap detection, classification, swept-gap prioritisation and radial conversion.

Index conventions: beams are numbered counter-clockwise. A gap occupies the
beam interval that starts at ``right_index`` (its clockwise endpoint, on the
robot's right when facing the gap) and runs ``k`` beams counter-clockwise to
``left_index``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from potential_gap.core import Egocircle, wrap_angle

SWEPT = "swept"
RADIAL = "radial"
LEFT = "left"
RIGHT = "right"

DMAX_INTERVAL = "dmax_interval"
DISCONTINUITY = "discontinuity"
MERGED = "merged"
CONVERTED = "converted"

TAU_ALPHA = 3.0 * math.pi / 4.0


@dataclass(frozen=True)
class Gap:
    right_index: int
    left_index: int
    right_range: float
    left_range: float
    k: int
    n: int
    kind: str = SWEPT
    side: str = RIGHT
    origin: str = DMAX_INTERVAL

    def __post_init__(self):
        if not 0 < self.k < self.n:
            raise ValueError(f"gap width {self.k} beams outside (0, {self.n})")
        if (self.right_index + self.k) % self.n != self.left_index:
            raise ValueError("left_index must equal right_index + k (mod n)")
        if self.right_range <= 0 or self.left_range <= 0:
            raise ValueError("gap endpoint ranges must be positive")

    @property
    def width(self) -> float:
        """Angular width in radians."""
        return 2.0 * math.pi * self.k / self.n

    @property
    def near_range(self) -> float:
        return min(self.left_range, self.right_range)

    def beams(self) -> np.ndarray:
        """Beam indices covered by the gap, endpoints included, in CCW order."""
        return (self.right_index + np.arange(self.k + 1)) % self.n

    def bearings(self, ego: Egocircle) -> tuple[float, float]:
        """(right, left) endpoint bearings; left is reported unwrapped from right."""
        r = ego.angle(self.right_index)
        return r, r + self.width

    def endpoints(self, ego: Egocircle) -> tuple[np.ndarray, np.ndarray]:
        """(right, left) endpoint positions in the robot frame."""
        ar, al = self.bearings(ego)
        return (np.array([self.right_range * math.cos(ar), self.right_range * math.sin(ar)]),
                np.array([self.left_range * math.cos(al), self.left_range * math.sin(al)]))


@dataclass
class GapSet:
    """Gaps ordered by the beam index of their right endpoint."""

    gaps: list[Gap]
    ego: Egocircle
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self) -> Iterator[Gap]:
        return iter(self.gaps)

    def __len__(self) -> int:
        return len(self.gaps)

    def __getitem__(self, i) -> Gap:
        return self.gaps[i]

    def with_gaps(self, gaps: list[Gap], **diag) -> GapSet:
        d = dict(self.diagnostics)
        d.update(diag)
        return GapSet(list(gaps), self.ego, d)


def _chord(r1: float, r2: float, width: float) -> float:
    return math.sqrt(max(r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * math.cos(width), 0.0))


def detect_gaps(ego: Egocircle, r_ins: float) -> GapSet:
    """Raw gaps: free (d_max) intervals wide enough to pass, and range jumps.

    A maximal run of ``d_max`` beams becomes a gap when the readings just
    outside it are more than ``2 * r_ins`` apart. Every adjacent pair whose
    ranges differ by more than ``2 * r_ins`` becomes a one-beam radial gap,
    unless the pair already lies inside an accepted free-interval gap. An
    egocircle with no readings at all yields four quarter-circle gaps.
    """
    r = ego.ranges
    n = ego.n
    d_max = ego.d_max
    inc = 2.0 * math.pi / n
    is_free = r >= d_max

    if is_free.all():
        q = n // 4
        starts = [0, q, 2 * q, 3 * q]
        ends = starts[1:] + [n]
        return GapSet([Gap(s, e % n, d_max, d_max, e - s, n, SWEPT, RIGHT, DMAX_INTERVAL)
                       for s, e in zip(starts, ends)], ego)

    gaps: list[Gap] = []
    inside = np.zeros(n, dtype=bool)
    if is_free.any():
        # rotate so the scan starts on an obstacle beam; runs then never wrap
        s0 = int(np.argmin(is_free))
        rolled = np.roll(is_free, -s0)
        edges = np.diff(np.concatenate(([0], rolled.astype(np.int8), [0])))
        run_starts = np.flatnonzero(edges == 1)
        run_ends = np.flatnonzero(edges == -1) - 1
        for a, b in zip(run_starts, run_ends):
            ri = (a - 1 + s0) % n
            li = (b + 1 + s0) % n
            k = int(b - a + 2)
            if k >= n:
                continue
            if _chord(r[ri], r[li], k * inc) > 2.0 * r_ins:
                gaps.append(Gap(int(ri), int(li), float(r[ri]), float(r[li]), k, n,
                                SWEPT, RIGHT, DMAX_INTERVAL))
                inside[(ri + np.arange(k + 1)) % n] = True

    jump = np.abs(np.roll(r, -1) - r) > 2.0 * r_ins
    for i in np.flatnonzero(jump):
        j = (i + 1) % n
        if inside[i] and inside[j]:
            continue
        gaps.append(Gap(int(i), int(j), float(r[i]), float(r[j]), 1, n,
                        RADIAL, RIGHT, DISCONTINUITY))
    gaps.sort(key=lambda g: g.right_index)
    return GapSet([classify(g, n) for g in gaps], ego)


def skewness_angle(gap: Gap, n: int | None = None) -> float:
    """Interior angle of the robot/endpoint triangle at the nearer endpoint."""
    n = gap.n if n is None else n
    w = 2.0 * math.pi * gap.k / n
    if not 0.0 < w < math.pi:
        raise ValueError("skewness angle needs an angular width in (0, pi)")
    ll, lr = gap.left_range, gap.right_range
    chord = _chord(ll, lr, w)
    if chord == 0.0:
        raise ValueError("degenerate gap")
    s = min(1.0, max(-1.0, min(ll, lr) * math.sin(w) / chord))
    return math.pi - w - math.asin(s)


def classify(gap: Gap, n: int | None = None, tau_alpha: float = TAU_ALPHA) -> Gap:
    """Tag a gap radial/swept and left/right.

    The side names the endpoint that is nearer the robot (the obstacle corner).
    Range-jump gaps are always radial; gaps at least pi wide always swept.
    """
    n = gap.n if n is None else n
    side = LEFT if gap.left_range < gap.right_range else RIGHT
    if gap.origin == DISCONTINUITY:
        kind = RADIAL
    elif 2.0 * math.pi * gap.k / n >= math.pi:
        kind = SWEPT
    else:
        kind = RADIAL if skewness_angle(gap, n) > tau_alpha else SWEPT
    return replace(gap, kind=kind, side=side)


class _RangeMin:
    """Sparse-table range minimum over a circular array."""

    def __init__(self, values: np.ndarray):
        self.n = values.size
        level = np.concatenate((values, values))
        self.table = [level]
        span = 1
        while 2 * span <= level.size:
            level = np.minimum(level[:-span], level[span:])
            self.table.append(level)
            span *= 2

    def between(self, lo: int, hi: int) -> float:
        """Minimum over indices strictly between ``lo`` and ``hi`` going CCW."""
        count = (hi - lo) % self.n - 1
        if count <= 0:
            return math.inf
        start = (lo + 1) % self.n
        lvl = count.bit_length() - 1
        t = self.table[lvl]
        return float(min(t[start], t[start + count - (1 << lvl)]))


def _point(ego: Egocircle, index: int, rng: float) -> tuple[float, float]:
    a = ego.angle(index)
    return rng * math.cos(a), rng * math.sin(a)


def _mergeable(p: Gap, g: Gap, ego: Egocircle, rmq: _RangeMin, c_a: float, c_d: float) -> bool:
    if (g.left_index - p.right_index) % ego.n <= 0:
        return False
    if (g.left_index - p.right_index) % ego.n < p.k + g.k:
        return False
    if abs(p.right_range - g.left_range) > c_d:
        return False
    ax, ay = _point(ego, p.left_index, p.left_range)
    bx, by = _point(ego, g.right_index, g.right_range)
    if math.hypot(ax - bx, ay - by) > c_a:
        return False
    return rmq.between(p.right_index, g.left_index) >= min(p.right_range, g.left_range)


def sgp_merge(gaps: GapSet, ego: Egocircle | None = None, c_a: float | None = None,
              c_d: float | None = None) -> GapSet:
    """Swept gap prioritisation: collapse runs of radial gaps into swept gaps.

    Gaps are pushed onto a stack in angular order. Each incoming radial gap
    looks back over the radial gaps on top of the stack for as long as they
    remain mergeable with it and merges with the deepest one, replacing
    everything from that gap to the top. The merged gap is classified from
    its own geometry; one that is still radial is left for conversion. Two gaps are mergeable when no reading
    between the outer endpoints is closer than both of them, the outer endpoint
    ranges differ by at most ``c_d`` and the facing endpoints lie within
    ``c_a`` of each other. Each gap is pushed once and popped at most once.
    """
    ego = gaps.ego if ego is None else ego
    r_ins = ego.r_ins
    c_a = 4.0 * r_ins if c_a is None else c_a
    c_d = 2.0 * r_ins if c_d is None else c_d
    rmq = _RangeMin(ego.ranges)
    n = ego.n

    stack: list[Gap] = []
    for g in gaps:
        if g.kind == RADIAL:
            deepest = None
            j = len(stack) - 1
            while j >= 0 and stack[j].kind == RADIAL and _mergeable(stack[j], g, ego, rmq, c_a, c_d):
                deepest = j
                j -= 1
            if deepest is not None:
                p = stack[deepest]
                k = (g.left_index - p.right_index) % n
                merged = classify(Gap(p.right_index, g.left_index, p.right_range, g.left_range,
                                      k, n, SWEPT, RIGHT, MERGED), n)
                del stack[deepest:]
                stack.append(merged)
                continue
        stack.append(g)
    return gaps.with_gaps(stack)


def radial_conversion(gaps: GapSet, eps1: float | None = None, eps2: float | None = None,
                      tau_alpha: float = TAU_ALPHA) -> GapSet:
    """Rotate each radial gap about its nearer endpoint until it classifies swept.

    Each step rotates the far endpoint by ``atan(eps2 / eps1)`` away from the
    obstacle side; the far endpoint keeps its range unless the egocircle
    reading at its new bearing is closer. Gaps that cannot be made swept
    within half a turn are dropped and counted in ``diagnostics``.
    """
    ego = gaps.ego
    r_ins = ego.r_ins
    eps1 = r_ins if eps1 is None else eps1
    eps2 = r_ins if eps2 is None else eps2
    if eps1 <= 0 or eps2 <= 0:
        raise ValueError("eps1 and eps2 must be positive")
    phi = math.atan(eps2 / eps1)
    n = ego.n
    out: list[Gap] = []
    dropped = 0
    for g in gaps:
        if g.kind != RADIAL:
            out.append(g)
            continue
        converted = _convert(g, ego, phi, tau_alpha)
        if converted is None:
            dropped += 1
        else:
            out.append(converted)
    out.sort(key=lambda g: g.right_index)
    return gaps.with_gaps(out, dropped_conversions=gaps.diagnostics.get("dropped_conversions", 0) + dropped)


def _convert(g: Gap, ego: Egocircle, phi: float, tau_alpha: float) -> Gap | None:
    n = ego.n
    near_is_right = g.side == RIGHT
    if near_is_right:
        ni, nr, fi, fr, sign = g.right_index, g.right_range, g.left_index, g.left_range, 1.0
    else:
        ni, nr, fi, fr, sign = g.left_index, g.left_range, g.right_index, g.right_range, -1.0
    nx, ny = _point(ego, ni, nr)
    fx, fy = _point(ego, fi, fr)
    vx, vy = fx - nx, fy - ny
    m = 1
    while m * phi <= math.pi + 1e-12:
        ang = sign * m * phi
        c, s = math.cos(ang), math.sin(ang)
        rx, ry = nx + c * vx - s * vy, ny + s * vx + c * vy
        m += 1
        new_fi = ego.index_of(math.atan2(ry, rx))
        k = (new_fi - ni) % n if near_is_right else (ni - new_fi) % n
        if not 0 < k < n // 2:
            continue
        new_fr = min(fr, float(ego.ranges[new_fi]))
        if near_is_right:
            cand = Gap(ni, new_fi, nr, new_fr, k, n, SWEPT, RIGHT, CONVERTED)
        else:
            cand = Gap(new_fi, ni, new_fr, nr, k, n, SWEPT, LEFT, CONVERTED)
        if _chord(cand.left_range, cand.right_range, cand.width) == 0.0:
            continue
        if skewness_angle(cand) <= tau_alpha:
            return cand
    return None


def simplify(ego: Egocircle, r_ins: float | None = None, *, convert: bool = True,
             tau_alpha: float = TAU_ALPHA, c_a: float | None = None, c_d: float | None = None,
             eps1: float | None = None, eps2: float | None = None) -> tuple[GapSet, GapSet]:
    """Full gap pipeline. Returns (raw, final) gap sets."""
    r_ins = ego.r_ins if r_ins is None else r_ins
    raw = detect_gaps(ego, r_ins)
    if tau_alpha != TAU_ALPHA:
        raw = raw.with_gaps([classify(g, ego.n, tau_alpha) for g in raw])
    merged = sgp_merge(raw, ego, c_a, c_d)
    final = radial_conversion(merged, eps1, eps2, tau_alpha) if convert else merged
    return raw, final


def format_gapset(gaps) -> str:
    """One gap per line: ``right left k right_range left_range kind side origin``."""
    lines = []
    for g in gaps:
        lines.append(f"{g.right_index} {g.left_index} {g.k} {g.right_range:.6f} {g.left_range:.6f} "
                     f"{g.kind} {g.side} {g.origin}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_gapset(text: str, n: int) -> list[Gap]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        ri, li, k, rr, lr, kind, side, origin = line.split()
        out.append(Gap(int(ri), int(li), float(rr), float(lr), int(k), n, kind, side, origin))
    return out


def bearing_in_gap(gap: Gap, ego: Egocircle, bearing: float) -> bool:
    ar, _ = gap.bearings(ego)
    return wrap_angle(bearing - ar) % (2.0 * math.pi) <= gap.width
