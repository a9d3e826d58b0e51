"""Compiled inner loops. Everything here works on plain floats and arrays."""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def _bin_of(angle, angle_min, inc, n):
    rel = (angle - angle_min) % TWO_PI
    b = int(math.floor(rel / inc + 0.5))
    return b % n


@njit(cache=True)
def propagate_egocircle(ranges, staleness, angle_min, inc, d_max, join_dist, dx, dy, dth):
    n = ranges.size
    c = math.cos(dth)
    s = math.sin(dth)
    px = np.empty(n)
    py = np.empty(n)
    valid = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        r = ranges[i]
        if r < d_max and r > 0.0:
            a = angle_min + i * inc
            x = r * math.cos(a) - dx
            y = r * math.sin(a) - dy
            px[i] = c * x + s * y
            py[i] = -s * x + c * y
            valid[i] = True

    out = np.full(n, d_max)
    out_st = np.empty(n, dtype=np.int64)
    for i in range(n):
        out_st[i] = staleness[i] + 1
    has_point = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        if not valid[i]:
            continue
        r = math.hypot(px[i], py[i])
        if r >= d_max or r <= 0.0:
            continue
        b = _bin_of(math.atan2(py[i], px[i]), angle_min, inc, n)
        if not has_point[b] or r < out[b]:
            out[b] = r
            out_st[b] = staleness[i] + 1
            has_point[b] = True

    # fill holes left between neighbouring readings of one surface
    fill = np.full(n, np.inf)
    fill_st = np.zeros(n, dtype=np.int64)
    for i in range(n):
        j = (i + 1) % n
        if not (valid[i] and valid[j]):
            continue
        ex = px[j] - px[i]
        ey = py[j] - py[i]
        if math.hypot(ex, ey) >= join_dist:
            continue
        ai = math.atan2(py[i], px[i])
        aj = math.atan2(py[j], px[j])
        bi = _bin_of(ai, angle_min, inc, n)
        bj = _bin_of(aj, angle_min, inc, n)
        diff = (aj - ai + math.pi) % TWO_PI - math.pi
        step = 1 if diff >= 0.0 else -1
        st = max(staleness[i], staleness[j]) + 1
        k = bi
        count = 0
        while k != bj and count < n:
            k = (k + step) % n
            count += 1
            if k == bj or has_point[k]:
                continue
            a = angle_min + k * inc
            ux = math.cos(a)
            uy = math.sin(a)
            den = ux * ey - uy * ex
            if den == 0.0:
                continue
            t = (px[i] * ey - py[i] * ex) / den
            sp = (px[i] * uy - py[i] * ux) / den
            if t > 0.0 and -1e-9 <= sp <= 1.0 + 1e-9 and t < fill[k]:
                fill[k] = t
                fill_st[k] = st
    for k in range(n):
        if not has_point[k] and fill[k] < d_max:
            out[k] = fill[k]
            out_st[k] = fill_st[k]
    return out, out_st


# ---------------------------------------------------------------------------
# gap field: vertex o, right endpoint r, left endpoint l, local goal g.
# Both endpoints sit at the same distance R from o; the gap curve is the
# circular arc of radius R about o between them.

@njit(cache=True)
def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


@njit(cache=True)
def _wrap(a):
    a = (a + math.pi) % TWO_PI
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


@njit(cache=True)
def inner_side(x, y, ox, oy, rx, ry, lx, ly):
    """> 0 strictly inside the arc radius, < 0 beyond it."""
    return math.hypot(rx - ox, ry - oy) - math.hypot(x - ox, y - oy)


@njit(cache=True)
def potential(x, y, ox, oy, rx, ry, lx, ly, gx, gy, curve_active):
    phi = math.hypot(x - gx, y - gy)
    if curve_active:
        c = inner_side(x, y, ox, oy, rx, ry, lx, ly)
        if c > 0.0:
            phi += c
    return phi


@njit(cache=True)
def potential_grad(x, y, ox, oy, rx, ry, lx, ly, gx, gy, curve_active, bis):
    dgx = x - gx
    dgy = y - gy
    dg = math.hypot(dgx, dgy)
    if dg == 0.0:
        return 0.0, 0.0
    px = dgx / dg
    py = dgy / dg
    if curve_active and inner_side(x, y, ox, oy, rx, ry, lx, ly) > 0.0:
        rho = math.hypot(x - ox, y - oy)
        if rho > 0.0:
            px -= (x - ox) / rho
            py -= (y - oy) / rho
        else:
            px -= math.cos(bis)
            py -= math.sin(bis)
    return px, py


@njit(cache=True)
def attractive_dir(x, y, ox, oy, rx, ry, lx, ly, gx, gy, curve_active, bis):
    """Unit descent direction of the attractive potential."""
    px, py = potential_grad(x, y, ox, oy, rx, ry, lx, ly, gx, gy, curve_active, bis)
    m = math.hypot(px, py)
    if m == 0.0:
        return 0.0, 0.0
    return -px / m, -py / m


@njit(cache=True)
def angular_distance(x, y, ox, oy, px, py, bis):
    if x == ox and y == oy:
        bx = bis
    else:
        bx = math.atan2(y - oy, x - ox)
    return abs(_wrap(bx - math.atan2(py - oy, px - ox)))


@njit(cache=True)
def circulation(x, y, ox, oy, rx, ry, lx, ly, sigma, bis):
    vx = 0.0
    vy = 0.0
    dlx = lx - x
    dly = ly - y
    dl = math.hypot(dlx, dly)
    if dl > 0.0:
        w = math.exp(-angular_distance(x, y, ox, oy, lx, ly, bis) / sigma) if sigma > 0.0 else 0.0
        # J = R(-pi/2): (a, b) -> (b, -a)
        vx += w * dly / dl
        vy -= w * dlx / dl
    drx = rx - x
    dry = ry - y
    dr = math.hypot(drx, dry)
    if dr > 0.0:
        w = math.exp(-angular_distance(x, y, ox, oy, rx, ry, bis) / sigma) if sigma > 0.0 else 0.0
        vx -= w * dry / dr
        vy += w * drx / dr
    return vx, vy


@njit(cache=True)
def combined(x, y, ox, oy, rx, ry, lx, ly, gx, gy, curve_active, sigma, bis):
    ax, ay = attractive_dir(x, y, ox, oy, rx, ry, lx, ly, gx, gy, curve_active, bis)
    if inner_side(x, y, ox, oy, rx, ry, lx, ly) < 0.0:
        return ax, ay
    cx, cy = circulation(x, y, ox, oy, rx, ry, lx, ly, sigma, bis)
    return ax + cx, ay + cy


@njit(cache=True)
def boundary_values(x, y, ox, oy, rx, ry, lx, ly):
    """Signed values for (curve, left line, right line); all >= 0 inside."""
    c = inner_side(x, y, ox, oy, rx, ry, lx, ly)
    lft = _cross(x - ox, y - oy, lx - ox, ly - oy)
    rgt = _cross(rx - ox, ry - oy, x - ox, y - oy)
    return c, lft, rgt


@njit(cache=True)
def _first_crossing(x, y, nx, ny, ox, oy, rx, ry, lx, ly):
    c0, l0, r0 = boundary_values(x, y, ox, oy, rx, ry, lx, ly)
    c1, l1, r1 = boundary_values(nx, ny, ox, oy, rx, ry, lx, ly)
    best = 2.0
    code = 0
    if c1 < 0.0 <= c0:
        t = c0 / (c0 - c1)
        if t < best:
            best = t
            code = 1
    if l1 < 0.0 <= l0:
        t = l0 / (l0 - l1)
        if t < best:
            best = t
            code = 2
    if r1 < 0.0 <= r0:
        t = r0 / (r0 - r1)
        if t < best:
            best = t
            code = 3
    return code


@njit(cache=True)
def integrate_field(ox, oy, rx, ry, lx, ly, gx, gy, curve_active, sigma, bis,
                    x0, y0, step, max_steps):
    """Euler flow of the normalised combined field.

    A step that would cross a gap line is retried at half length, down to
    ``step * 2**-30``, so thin wedges do not leak through discretisation.
    Returns (xs, ys, s, count, exit_code, reached) where ``s`` is arc length.
    exit_code: 0 still inside, 1 left through the gap curve, 2 through the
    left gap line, 3 through the right gap line, -1 started outside.
    """
    cap = max_steps + 2
    xs = np.empty(cap)
    ys = np.empty(cap)
    ss = np.empty(cap)
    xs[0] = x0
    ys[0] = y0
    ss[0] = 0.0
    count = 1
    c0, l0, r0 = boundary_values(x0, y0, ox, oy, rx, ry, lx, ly)
    exit_code = 0
    if l0 < 0.0 or r0 < 0.0:
        exit_code = -1
    elif c0 < 0.0:
        exit_code = 1
    x = x0
    y = y0
    if math.hypot(x - gx, y - gy) <= 1e-12:
        return xs, ys, ss, count, exit_code, True
    reached = False
    travelled = 0.0
    for _ in range(max_steps):
        dg = math.hypot(x - gx, y - gy)
        if dg <= step:
            nx = gx
            ny = gy
            h = dg
            reached = True
        else:
            vx, vy = combined(x, y, ox, oy, rx, ry, lx, ly, gx, gy, curve_active, sigma, bis)
            m = math.hypot(vx, vy)
            if m == 0.0:
                break
            vx /= m
            vy /= m
            h = step
            nx = x + h * vx
            ny = y + h * vy
            if exit_code == 0:
                for _k in range(30):
                    code = _first_crossing(x, y, nx, ny, ox, oy, rx, ry, lx, ly)
                    if code != 2 and code != 3:
                        break
                    h *= 0.5
                    nx = x + h * vx
                    ny = y + h * vy
        if exit_code == 0:
            exit_code = _first_crossing(x, y, nx, ny, ox, oy, rx, ry, lx, ly)
        x = nx
        y = ny
        travelled += h
        xs[count] = x
        ys[count] = y
        ss[count] = travelled
        count += 1
        if reached:
            break
    return xs, ys, ss, count, exit_code, reached


@njit(cache=True)
def raycast(occ, res, x0, y0, angles, d_max):
    """First-hit distance along each ray via grid traversal; returns (ranges, inside)."""
    h, w = occ.shape
    n = angles.size
    out = np.full(n, d_max)
    cx = int(math.floor(x0 / res))
    cy = int(math.floor(y0 / res))
    if cx < 0 or cy < 0 or cx >= w or cy >= h or occ[cy, cx]:
        return np.zeros(n), True
    for k in range(n):
        dx = math.cos(angles[k])
        dy = math.sin(angles[k])
        ix = cx
        iy = cy
        if dx > 0.0:
            sx = 1
            t_max_x = ((ix + 1) * res - x0) / dx
            t_dx = res / dx
        elif dx < 0.0:
            sx = -1
            t_max_x = (ix * res - x0) / dx
            t_dx = -res / dx
        else:
            sx = 0
            t_max_x = np.inf
            t_dx = np.inf
        if dy > 0.0:
            sy = 1
            t_max_y = ((iy + 1) * res - y0) / dy
            t_dy = res / dy
        elif dy < 0.0:
            sy = -1
            t_max_y = (iy * res - y0) / dy
            t_dy = -res / dy
        else:
            sy = 0
            t_max_y = np.inf
            t_dy = np.inf
        while True:
            if t_max_x < t_max_y:
                t = t_max_x
                ix += sx
                t_max_x += t_dx
            else:
                t = t_max_y
                iy += sy
                t_max_y += t_dy
            if t >= d_max:
                break
            if ix < 0 or iy < 0 or ix >= w or iy >= h or occ[iy, ix]:
                out[k] = t
                break
    return out, False


@njit(cache=True)
def nearest_occupied(occ, res, x, y, radius):
    """Distance from (x, y) to the closest occupied cell box, searching within ``radius``.

    Returns inf when nothing occupied lies within the search window. Cells
    outside the grid count as occupied.
    """
    h, w = occ.shape
    lo_x = int(math.floor((x - radius) / res)) - 1
    hi_x = int(math.floor((x + radius) / res)) + 1
    lo_y = int(math.floor((y - radius) / res)) - 1
    hi_y = int(math.floor((y + radius) / res)) + 1
    best = np.inf
    for iy in range(lo_y, hi_y + 1):
        for ix in range(lo_x, hi_x + 1):
            if 0 <= ix < w and 0 <= iy < h and not occ[iy, ix]:
                continue
            qx = min(max(x, ix * res), (ix + 1) * res)
            qy = min(max(y, iy * res), (iy + 1) * res)
            d = math.hypot(x - qx, y - qy)
            if d < best:
                best = d
    return best


# ---------------------------------------------------------------------------
# global planning on a blocked[iy, ix] grid, 8-connected


@njit(cache=True)
def _heap_push(keys, vals, size, k, v):
    i = size
    keys[i] = k
    vals[i] = v
    while i > 0:
        p = (i - 1) // 2
        if keys[p] <= keys[i]:
            break
        keys[p], keys[i] = keys[i], keys[p]
        vals[p], vals[i] = vals[i], vals[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    k = keys[0]
    v = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < size and keys[l] < keys[m]:
            m = l
        if r < size and keys[r] < keys[m]:
            m = r
        if m == i:
            break
        keys[m], keys[i] = keys[i], keys[m]
        vals[m], vals[i] = vals[i], vals[m]
        i = m
    return k, v, size


@njit(cache=True)
def astar(blocked, sx, sy, gx, gy):
    """Shortest 8-connected path of cells (ix, iy); empty when unreachable.

    Diagonal moves cost sqrt(2) and may not cut the corner of a blocked cell.
    """
    h, w = blocked.shape
    empty = np.empty((0, 2), dtype=np.int64)
    if blocked[sy, sx] or blocked[gy, gx]:
        return empty, np.inf
    n = h * w
    g = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    cap = 8 * n + 1
    keys = np.empty(cap)
    vals = np.empty(cap, dtype=np.int64)
    size = 0
    s = sy * w + sx
    goal = gy * w + gx
    g[s] = 0.0
    size = _heap_push(keys, vals, size, 0.0, s)
    sq2 = math.sqrt(2.0)
    while size > 0:
        _, u, size = _heap_pop(keys, vals, size)
        if closed[u]:
            continue
        closed[u] = True
        if u == goal:
            break
        uy = u // w
        ux = u - uy * w
        for dy in range(-1, 2):
            for dx in range(-1, 2):
                if dx == 0 and dy == 0:
                    continue
                vx = ux + dx
                vy = uy + dy
                if vx < 0 or vy < 0 or vx >= w or vy >= h or blocked[vy, vx]:
                    continue
                if dx != 0 and dy != 0 and (blocked[uy, vx] or blocked[vy, ux]):
                    continue
                v = vy * w + vx
                if closed[v]:
                    continue
                c = g[u] + (sq2 if dx != 0 and dy != 0 else 1.0)
                if c < g[v]:
                    g[v] = c
                    parent[v] = u
                    ddx = abs(gx - vx)
                    ddy = abs(gy - vy)
                    hcost = (sq2 - 1.0) * min(ddx, ddy) + max(ddx, ddy)
                    size = _heap_push(keys, vals, size, c + hcost, v)
    if not closed[goal]:
        return empty, np.inf
    count = 1
    v = goal
    while v != s:
        v = parent[v]
        count += 1
    out = np.empty((count, 2), dtype=np.int64)
    v = goal
    for i in range(count - 1, -1, -1):
        out[i, 0] = v % w
        out[i, 1] = v // w
        if i > 0:
            v = parent[v]
    return out, g[goal]


@njit(cache=True)
def stamp_discs(mask, cells_x, cells_y, radius_cells):
    """Set every cell within ``radius_cells`` of each listed cell."""
    h, w = mask.shape
    r = int(math.ceil(radius_cells))
    r2 = radius_cells * radius_cells
    for k in range(cells_x.size):
        cx = cells_x[k]
        cy = cells_y[k]
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if dx * dx + dy * dy > r2:
                    continue
                x = cx + dx
                y = cy + dy
                if 0 <= x < w and 0 <= y < h:
                    mask[y, x] = True


# ---------------------------------------------------------------------------
# nearest-reading queries for trajectory scoring


@njit(cache=True)
def bucket_points(px, py, cell):
    """Counting-sort points into a uniform grid of square cells.

    Returns (x0, y0, nx, ny, start, order): the points of cell (ix, iy)
    are ``order[start[k]:start[k + 1]]`` with ``k = iy * nx + ix``.
    """
    m = px.size
    x0 = px.min()
    y0 = py.min()
    nx = int((px.max() - x0) / cell) + 1
    ny = int((py.max() - y0) / cell) + 1
    keys = np.empty(m, dtype=np.int64)
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    for j in range(m):
        k = int((py[j] - y0) / cell) * nx + int((px[j] - x0) / cell)
        keys[j] = k
        counts[k + 1] += 1
    start = np.cumsum(counts)
    fill = start[:-1].copy()
    order = np.empty(m, dtype=np.int64)
    for j in range(m):
        order[fill[keys[j]]] = j
        fill[keys[j]] += 1
    return x0, y0, nx, ny, start, order


@njit(cache=True)
def bucket_min_distances(qx, qy, px, py, x0, y0, nx, ny, start, order, cell):
    """Distance from each query to its nearest point, or inf beyond ``cell``."""
    out = np.full(qx.size, np.inf)
    lim = cell * cell
    for i in range(qx.size):
        cx = int(math.floor((qx[i] - x0) / cell))
        cy = int(math.floor((qy[i] - y0) / cell))
        best = np.inf
        for iy in range(max(cy - 1, 0), min(cy + 2, ny)):
            for ix in range(max(cx - 1, 0), min(cx + 2, nx)):
                k = iy * nx + ix
                for s in range(start[k], start[k + 1]):
                    j = order[s]
                    d = (qx[i] - px[j]) ** 2 + (qy[i] - py[j]) ** 2
                    if d < best:
                        best = d
        if best <= lim:
            out[i] = math.sqrt(best)
    return out
