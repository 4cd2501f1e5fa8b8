"""Pure-Python hot kernels.

Reference implementation of the inner loops used by the simulator and the
optimizer. The compiled
twin in ``_kernels.pyx`` must agree with these to the last bit on the fixture
suite; ``hrnav.kernels`` decides which one is exported.

Array conventions shared by both implementations:

* ``bounds``  -- float64 ``(4,)``: xmin, ymin, xmax, ymax
* ``circles`` -- float64 ``(n, 3)``: cx, cy, r
* ``rects``   -- float64 ``(m, 4)``: xmin, ymin, xmax, ymax
"""

import math

import numpy as np

RANGE_FLOOR = 1e-9


def _ray_bounds(x, y, dx, dy, bounds):
    t = math.inf
    xmin, ymin, xmax, ymax = bounds[0], bounds[1], bounds[2], bounds[3]
    if dx > 0.0:
        t = min(t, (xmax - x) / dx)
    elif dx < 0.0:
        t = min(t, (xmin - x) / dx)
    if dy > 0.0:
        t = min(t, (ymax - y) / dy)
    elif dy < 0.0:
        t = min(t, (ymin - y) / dy)
    return max(t, 0.0)


def _ray_rect(x, y, dx, dy, xmin, ymin, xmax, ymax):
    tmin = -math.inf
    tmax = math.inf
    for o, d, lo, hi in ((x, dx, xmin, xmax), (y, dy, ymin, ymax)):
        if d == 0.0:
            if o < lo or o > hi:
                return math.inf
            continue
        t1 = (lo - o) / d
        t2 = (hi - o) / d
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
    if tmax < max(tmin, 0.0):
        return math.inf
    return tmin if tmin > 0.0 else 0.0


def _ray_circle(x, y, dx, dy, cx, cy, r):
    fx = x - cx
    fy = y - cy
    c = fx * fx + fy * fy - r * r
    if c <= 0.0:
        return 0.0
    b = fx * dx + fy * dy
    disc = b * b - c
    if disc < 0.0:
        return math.inf
    t = -b - math.sqrt(disc)
    return t if t >= 0.0 else math.inf


def beam_angles(heading, n_beams, fov):
    if n_beams == 1:
        return np.array([heading], dtype=np.float64)
    step = fov / (n_beams - 1)
    return np.array([heading - fov / 2.0 + i * step for i in range(n_beams)], dtype=np.float64)


def raycast(x, y, heading, bounds, circles, rects, n_beams, fov, max_range):
    out = np.empty(n_beams, dtype=np.float64)
    x = float(x)
    y = float(y)
    bounds = [float(v) for v in bounds]
    circles = np.asarray(circles, dtype=np.float64).reshape(-1, 3).tolist()
    rects = np.asarray(rects, dtype=np.float64).reshape(-1, 4).tolist()
    angles = beam_angles(float(heading), n_beams, float(fov)).tolist()
    for i in range(n_beams):
        a = angles[i]
        dx = math.cos(a)
        dy = math.sin(a)
        best = _ray_bounds(x, y, dx, dy, bounds)
        for cx, cy, r in circles:
            t = _ray_circle(x, y, dx, dy, cx, cy, r)
            if t < best:
                best = t
        for rx0, ry0, rx1, ry1 in rects:
            t = _ray_rect(x, y, dx, dy, rx0, ry0, rx1, ry1)
            if t < best:
                best = t
        if best > max_range:
            best = max_range
        if best < RANGE_FLOOR:
            best = RANGE_FLOOR
        out[i] = best
    return out


def surface_distance(x, y, bounds, circles, rects):
    """Distance from a point to the nearest obstacle surface or boundary wall.

    Zero when the point is inside an obstacle or outside the arena.
    """
    x = float(x)
    y = float(y)
    best = min(x - float(bounds[0]), float(bounds[2]) - x, y - float(bounds[1]), float(bounds[3]) - y)
    if best < 0.0:
        best = 0.0
    for cx, cy, r in np.asarray(circles, dtype=np.float64).reshape(-1, 3).tolist():
        fx = x - cx
        fy = y - cy
        d = math.sqrt(fx * fx + fy * fy) - r
        if d < best:
            best = d
    for rx0, ry0, rx1, ry1 in np.asarray(rects, dtype=np.float64).reshape(-1, 4).tolist():
        ex = max(rx0 - x, 0.0, x - rx1)
        ey = max(ry0 - y, 0.0, y - ry1)
        d = math.sqrt(ex * ex + ey * ey)
        if d < best:
            best = d
    return best if best > 0.0 else 0.0


def adam_update(params, grad, m, v, beta1, beta2, lr_t, eps_hat):
    """In-place Adam step in the folded bias-correction form.

    Returns 0 on success, 1 if ``grad`` has a non-finite entry (nothing is
    modified), 2 if the updated parameters are non-finite.
    """
    if not np.all(np.isfinite(grad)):
        return 1
    with np.errstate(over="ignore", invalid="ignore"):
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * (grad * grad)
        denom = np.sqrt(v)
        denom += eps_hat
        np.divide(m, denom, out=denom)
        denom *= lr_t
        params -= denom
    if not np.all(np.isfinite(params)):
        return 2
    return 0


def soft_update(target, online, tau):
    target[...] = tau * online + (1.0 - tau) * target
