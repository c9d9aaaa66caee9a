# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Mirrors :mod:`levyavg._fallback` function for function; both must perform
the same floating-point operations in the same order.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, log, fabs, isfinite, M_PI

cnp.import_array()

# Built-in coefficient codes, kept in sync with levyavg.problems.
DEF LINEAR = 0
DEF EXAMPLE = 1
DEF BOUNDED = 2
DEF SATURATING = 3
DEF DECOUPLED = 4
DEF XCOUPLED = 5


def cms_symmetric(double alpha, const double[::1] u, const double[::1] w):
    """Chambers-Mallows-Stuck transform, characteristic function exp(-|h|^alpha)."""
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double v, inv_a = 1.0 / alpha, e = (1.0 - alpha) / alpha
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            v = M_PI * (u[i] - 0.5)
            o[i] = sin(alpha * v) * exp(e * log(cos((1.0 - alpha) * v) / w[i]) - inv_a * log(cos(v)))
    return out


def kanter_positive(double a, const double[::1] u, const double[::1] w):
    """Positive a-stable variates with Laplace transform exp(-lambda^a), 0 < a < 1."""
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double v, inv_a = 1.0 / a, e = (1.0 - a) / a
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            v = M_PI * u[i]
            o[i] = sin(a * v) * exp(e * log(sin((1.0 - a) * v) / w[i]) - inv_a * log(sin(v)))
    return out


cdef inline double _b(int code, const double* prm, double x, double y) noexcept nogil:
    if code == LINEAR:
        return -x + y
    elif code == EXAMPLE or code == SATURATING:
        return y
    elif code == BOUNDED:
        return sin(x) + sin(y)
    elif code == DECOUPLED:
        return -x
    else:
        return sin(x + y)


cdef inline double _f(int code, const double* prm, double x, double y) noexcept nogil:
    if code == LINEAR:
        return x - y
    elif code == SATURATING:
        return -y - y * y * y / (1.0 + y * y)
    elif code == XCOUPLED:
        return sin(x) - y
    else:
        return -y


cdef inline double _bbar(int code, const double* prm, double x) noexcept nogil:
    if code == BOUNDED:
        return sin(x)
    elif code == DECOUPLED:
        return -x
    elif code == XCOUPLED:
        return prm[0] * sin(x + sin(x))
    else:
        return 0.0


def coupled_block(int code, const double[::1] params, const double[::1] x0, const double[::1] y0,
                  const double[:, ::1] dl1, const double[:, ::1] dl2,
                  double h, double ratio, double scale, Py_ssize_t cmp_stride,
                  const cnp.int64_t[::1] rec_idx, bint with_bar):
    """Euler scheme for a built-in slow-fast system over a block of paths.

    Returns ``(sup_diff, xs, xbars, ys, bad)``: the running maximum of
    ``|X - Xbar|`` over every ``cmp_stride``-th node, the states at the
    node indices ``rec_idx`` (shape ``(m, B)``), and a non-finite flag per path.
    """
    cdef Py_ssize_t n = dl1.shape[0], B = dl1.shape[1], m = rec_idx.shape[0]
    cdef Py_ssize_t k, j, r = 0
    cdef double xj, yj, d
    cdef const double* prm = &params[0] if params.shape[0] > 0 else NULL

    x_arr = np.array(x0, dtype=np.float64, copy=True)
    y_arr = np.array(y0, dtype=np.float64, copy=True)
    xb_arr = np.array(x0, dtype=np.float64, copy=True)
    sup_arr = np.zeros(B, dtype=np.float64)
    xs_arr = np.empty((m, B), dtype=np.float64)
    xbs_arr = np.empty((m, B), dtype=np.float64)
    ys_arr = np.empty((m, B), dtype=np.float64)
    bad_arr = np.zeros(B, dtype=np.int8)
    cdef double[::1] x = x_arr, y = y_arr, xb = xb_arr, sup = sup_arr
    cdef double[:, ::1] xs = xs_arr, xbs = xbs_arr, ys = ys_arr
    cdef cnp.int8_t[::1] bad = bad_arr

    with nogil:
        for k in range(n + 1):
            if with_bar and k % cmp_stride == 0:
                for j in range(B):
                    d = fabs(x[j] - xb[j])
                    if d > sup[j]:
                        sup[j] = d
            while r < m and rec_idx[r] == k:
                for j in range(B):
                    xs[r, j] = x[j]
                    xbs[r, j] = xb[j]
                    ys[r, j] = y[j]
                r += 1
            if k == n:
                break
            for j in range(B):
                if bad[j]:
                    continue
                xj = x[j]
                yj = y[j]
                x[j] = xj + h * _b(code, prm, xj, yj) + dl1[k, j]
                y[j] = yj + ratio * _f(code, prm, xj, yj) + scale * dl2[k, j]
                if with_bar:
                    xb[j] = xb[j] + h * _bbar(code, prm, xb[j]) + dl1[k, j]
                if not (isfinite(x[j]) and isfinite(y[j]) and isfinite(xb[j])):
                    bad[j] = 1
    return sup_arr, xs_arr, xbs_arr, ys_arr, bad_arr


def ou_exact_block(const double[:, ::1] noise, double y0, double decay, double h):
    """Exact OU recursion ``Y <- decay*Y + noise[k]`` with trapezoid time integral.

    Returns ``(z, y_end)`` per path, where ``z`` approximates the integral of Y
    over the grid.
    """
    cdef Py_ssize_t n = noise.shape[0], B = noise.shape[1], k, j
    cdef double yn, half_h = 0.5 * h
    y_arr = np.full(B, y0, dtype=np.float64)
    z_arr = np.zeros(B, dtype=np.float64)
    cdef double[::1] y = y_arr, z = z_arr
    with nogil:
        for k in range(n):
            for j in range(B):
                yn = decay * y[j] + noise[k, j]
                z[j] = z[j] + half_h * (y[j] + yn)
                y[j] = yn
    return z_arr, y_arr
