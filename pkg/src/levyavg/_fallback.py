"""Pure-numpy implementations of the compiled kernels.

Same signatures and the same operation order as ``_kernels.pyx``; loops run
over time steps and vectorize over paths.
"""

import numpy as np

LINEAR, EXAMPLE, BOUNDED, SATURATING, DECOUPLED, XCOUPLED = range(6)


def cms_symmetric(alpha, u, w):
    v = np.pi * (u - 0.5)
    e = (1.0 - alpha) / alpha
    return np.sin(alpha * v) * np.exp(e * np.log(np.cos((1.0 - alpha) * v) / w) - (1.0 / alpha) * np.log(np.cos(v)))


def kanter_positive(a, u, w):
    v = np.pi * u
    e = (1.0 - a) / a
    return np.sin(a * v) * np.exp(e * np.log(np.sin((1.0 - a) * v) / w) - (1.0 / a) * np.log(np.sin(v)))


def coefficient_functions(code, params):
    """numpy versions of the built-in (b, f, bbar) triples."""
    if code == LINEAR:
        return (lambda x, y: -x + y), (lambda x, y: x - y), (lambda x: np.zeros_like(x))
    if code == EXAMPLE:
        return (lambda x, y: y), (lambda x, y: -y), (lambda x: np.zeros_like(x))
    if code == BOUNDED:
        return (lambda x, y: np.sin(x) + np.sin(y)), (lambda x, y: -y), np.sin
    if code == SATURATING:
        return (lambda x, y: y), (lambda x, y: -y - y * y * y / (1.0 + y * y)), (lambda x: np.zeros_like(x))
    if code == DECOUPLED:
        return (lambda x, y: -x), (lambda x, y: -y), (lambda x: -x)
    if code == XCOUPLED:
        c = params[0]
        return (lambda x, y: np.sin(x + y)), (lambda x, y: np.sin(x) - y), (lambda x: c * np.sin(x + np.sin(x)))
    raise ValueError(f"unknown coefficient code {code}")


def coupled_block(code, params, x0, y0, dl1, dl2, h, ratio, scale, cmp_stride, rec_idx, with_bar):
    b, f, bbar = coefficient_functions(code, params)
    return generic_coupled(b, f, bbar if with_bar else None, x0, y0, dl1, dl2, h, ratio, scale, cmp_stride, rec_idx)


def _norm(d):
    return np.abs(d) if d.ndim == 1 else np.sqrt(np.sum(d * d, axis=-1))


def generic_coupled(b, f, bbar, x0, y0, dl1, dl2, h, ratio, scale, cmp_stride, rec_idx):
    """Euler scheme for arbitrary vectorized coefficients.

    States have shape ``(B,)`` or ``(B, d)``; ``dl1``/``dl2`` carry a leading
    time axis. ``bbar=None`` skips the averaged path.
    """
    n = dl1.shape[0]
    x = np.array(x0, dtype=np.float64, copy=True)
    y = np.array(y0, dtype=np.float64, copy=True)
    xb = np.array(x0, dtype=np.float64, copy=True)
    B = x.shape[0]
    m = len(rec_idx)
    sup = np.zeros(B)
    xs = np.empty((m,) + x.shape)
    xbs = np.empty((m,) + x.shape)
    ys = np.empty((m,) + y.shape)
    bad = np.zeros(B, dtype=np.int8)
    with_bar = bbar is not None
    r = 0
    for k in range(n + 1):
        if with_bar and k % cmp_stride == 0:
            np.maximum(sup, _norm(x - xb), out=sup)
        while r < m and rec_idx[r] == k:
            xs[r] = x
            xbs[r] = xb
            ys[r] = y
            r += 1
        if k == n:
            break
        bx = b(x, y)
        fy = f(x, y)
        if with_bar:
            xb = xb + h * bbar(xb) + dl1[k]
        x = x + h * bx + dl1[k]
        y = y + ratio * fy + scale * dl2[k]
        fin = np.isfinite(x) & np.isfinite(y) & np.isfinite(xb)
        if fin.ndim > 1:
            fin = fin.all(axis=tuple(range(1, fin.ndim)))
        if not fin.all():
            bad[~fin] = 1
            return sup, xs, xbs, ys, bad
    return sup, xs, xbs, ys, bad


def ou_exact_block(noise, y0, decay, h):
    B = noise.shape[1]
    y = np.full(B, float(y0))
    z = np.zeros(B)
    half_h = 0.5 * h
    for k in range(noise.shape[0]):
        yn = decay * y + noise[k]
        z = z + half_h * (y + yn)
        y = yn
    return z, y
