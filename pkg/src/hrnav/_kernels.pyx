# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; mirrors ``_kernels_py`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, isfinite, INFINITY

cnp.import_array()

cdef double RANGE_FLOOR = 1e-9


cdef inline double _ray_bounds(double x, double y, double dx, double dy,
                               const double[:] bounds) noexcept nogil:
    cdef double t = INFINITY
    cdef double c
    if dx > 0.0:
        c = (bounds[2] - x) / dx
        if c < t:
            t = c
    elif dx < 0.0:
        c = (bounds[0] - x) / dx
        if c < t:
            t = c
    if dy > 0.0:
        c = (bounds[3] - y) / dy
        if c < t:
            t = c
    elif dy < 0.0:
        c = (bounds[1] - y) / dy
        if c < t:
            t = c
    return t if t > 0.0 else 0.0


cdef inline double _ray_rect(double x, double y, double dx, double dy,
                             double xmin, double ymin, double xmax, double ymax) noexcept nogil:
    cdef double tmin = -INFINITY
    cdef double tmax = INFINITY
    cdef double t1, t2, tmp, lower
    if dx == 0.0:
        if x < xmin or x > xmax:
            return INFINITY
    else:
        t1 = (xmin - x) / dx
        t2 = (xmax - x) / dx
        if t1 > t2:
            tmp = t1
            t1 = t2
            t2 = tmp
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
    if dy == 0.0:
        if y < ymin or y > ymax:
            return INFINITY
    else:
        t1 = (ymin - y) / dy
        t2 = (ymax - y) / dy
        if t1 > t2:
            tmp = t1
            t1 = t2
            t2 = tmp
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
    lower = tmin if tmin > 0.0 else 0.0
    if tmax < lower:
        return INFINITY
    return tmin if tmin > 0.0 else 0.0


cdef inline double _ray_circle(double x, double y, double dx, double dy,
                               double cx, double cy, double r) noexcept nogil:
    cdef double fx = x - cx
    cdef double fy = y - cy
    cdef double c = fx * fx + fy * fy - r * r
    cdef double b, disc, t
    if c <= 0.0:
        return 0.0
    b = fx * dx + fy * dy
    disc = b * b - c
    if disc < 0.0:
        return INFINITY
    t = -b - sqrt(disc)
    return t if t >= 0.0 else INFINITY


def raycast(double x, double y, double heading, bounds, circles, rects,
            Py_ssize_t n_beams, double fov, double max_range):
    cdef const double[:] b = np.ascontiguousarray(bounds, dtype=np.float64)
    cdef const double[:, :] cs = np.ascontiguousarray(circles, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, :] rs = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 4)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_beams, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i, j
    cdef double a, dx, dy, best, t, step
    step = fov / (n_beams - 1) if n_beams > 1 else 0.0
    with nogil:
        for i in range(n_beams):
            if n_beams == 1:
                a = heading
            else:
                a = heading - fov / 2.0 + i * step
            dx = cos(a)
            dy = sin(a)
            best = _ray_bounds(x, y, dx, dy, b)
            for j in range(cs.shape[0]):
                t = _ray_circle(x, y, dx, dy, cs[j, 0], cs[j, 1], cs[j, 2])
                if t < best:
                    best = t
            for j in range(rs.shape[0]):
                t = _ray_rect(x, y, dx, dy, rs[j, 0], rs[j, 1], rs[j, 2], rs[j, 3])
                if t < best:
                    best = t
            if best > max_range:
                best = max_range
            if best < RANGE_FLOOR:
                best = RANGE_FLOOR
            o[i] = best
    return out


def surface_distance(double x, double y, bounds, circles, rects):
    cdef const double[:] b = np.ascontiguousarray(bounds, dtype=np.float64)
    cdef const double[:, :] cs = np.ascontiguousarray(circles, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, :] rs = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t j
    cdef double best, d, fx, fy, ex, ey
    best = x - b[0]
    if b[2] - x < best:
        best = b[2] - x
    if y - b[1] < best:
        best = y - b[1]
    if b[3] - y < best:
        best = b[3] - y
    if best < 0.0:
        best = 0.0
    for j in range(cs.shape[0]):
        fx = x - cs[j, 0]
        fy = y - cs[j, 1]
        d = sqrt(fx * fx + fy * fy) - cs[j, 2]
        if d < best:
            best = d
    for j in range(rs.shape[0]):
        ex = rs[j, 0] - x
        if ex < 0.0:
            ex = 0.0
        if x - rs[j, 2] > ex:
            ex = x - rs[j, 2]
        ey = rs[j, 1] - y
        if ey < 0.0:
            ey = 0.0
        if y - rs[j, 3] > ey:
            ey = y - rs[j, 3]
        d = sqrt(ex * ex + ey * ey)
        if d < best:
            best = d
    return best if best > 0.0 else 0.0


def adam_update(double[::1] params, const double[::1] grad, double[::1] m, double[::1] v,
                double beta1, double beta2, double lr_t, double eps_hat):
    cdef Py_ssize_t i, n = params.shape[0]
    cdef double g, c1 = 1.0 - beta1, c2 = 1.0 - beta2
    cdef int bad = 0
    with nogil:
        for i in range(n):
            if not isfinite(grad[i]):
                bad = 1
                break
    if bad:
        return 1
    with nogil:
        for i in range(n):
            g = grad[i]
            m[i] = m[i] * beta1 + c1 * g
            v[i] = v[i] * beta2 + c2 * (g * g)
            params[i] = params[i] - (m[i] / (sqrt(v[i]) + eps_hat)) * lr_t
            if not isfinite(params[i]):
                bad = 2
    return bad


def soft_update(double[::1] target, const double[::1] online, double tau):
    cdef Py_ssize_t i, n = target.shape[0]
    cdef double c = 1.0 - tau
    with nogil:
        for i in range(n):
            target[i] = tau * online[i] + c * target[i]
