"""Exact sampling of symmetric and isotropic alpha-stable increments.

Scale convention: an increment over a time step ``dt`` has characteristic
function ``h -> exp(-dt * |h|**alpha)``.  One-dimensional draws use the
Chambers-Mallows-Stuck transform; multivariate isotropic draws subordinate a
Gaussian vector by a positive (alpha/2)-stable variable (Kanter's transform).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._backend import kernels
from .errors import DomainError
from .rng import as_generator

# shifts random() output from [0, 1) into the open interval (0, 1)
_HALF_ULP = 2.0**-54


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    return alpha


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not dt > 0.0 or not np.isfinite(dt):
        raise DomainError(f"time step must be positive and finite, got {dt}")
    return dt


@dataclass(frozen=True)
class StableSpec:
    """Stability index and dimension of a driving isotropic stable process."""

    alpha: float
    dim: int = 1

    def __post_init__(self):
        check_alpha(self.alpha)
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dim must be a positive integer, got {self.dim}")


def _uniforms(gen, n):
    u = gen.random(n)
    u += _HALF_ULP
    return u


def _sym_standard(alpha, gen, n):
    u = _uniforms(gen, n)
    w = gen.standard_exponential(n)
    return kernels.cms_symmetric(alpha, u, w)


def _positive_standard(a, gen, n):
    u = _uniforms(gen, n)
    w = gen.standard_exponential(n)
    return kernels.kanter_positive(a, u, w)


def _count(size):
    return 1 if size is None else int(np.prod(size))


def sample_sym_stable_1d(alpha, rng, size=None):
    """Standard symmetric alpha-stable draws, characteristic function exp(-|h|^alpha).

    ``rng`` is an :class:`~levyavg.rng.RngStream` (replays identically) or a
    numpy Generator.  Returns a float when ``size`` is None.
    """
    alpha = check_alpha(alpha)
    x = _sym_standard(alpha, as_generator(rng), _count(size))
    return float(x[0]) if size is None else x.reshape(size)


def sample_subordinator_increment(alpha, dt, rng, size=None):
    """Totally skewed positive (alpha/2)-stable increment.

    Laplace transform ``lambda -> exp(-dt * lambda**(alpha/2))``.
    """
    alpha = check_alpha(alpha)
    dt = _check_dt(dt)
    s = dt ** (2.0 / alpha) * _positive_standard(0.5 * alpha, as_generator(rng), _count(size))
    return float(s[0]) if size is None else s.reshape(size)


def _draw_increments(spec: StableSpec, dt: float, gen, n: int) -> np.ndarray:
    """``n`` increments of shape ``(n, dim)`` drawn from ``gen``."""
    if spec.dim == 1:
        return (dt ** (1.0 / spec.alpha) * _sym_standard(spec.alpha, gen, n)).reshape(n, 1)
    s = dt ** (2.0 / spec.alpha) * _positive_standard(0.5 * spec.alpha, gen, n)
    g = gen.standard_normal((n, spec.dim))
    return g * np.sqrt(2.0 * s)[:, None]


def subordinated_increments(spec: StableSpec, dt: float, rng, n: int) -> np.ndarray:
    """Gaussian-subordination construction for any dimension, including 1."""
    dt = _check_dt(dt)
    gen = as_generator(rng)
    s = dt ** (2.0 / spec.alpha) * _positive_standard(0.5 * spec.alpha, gen, n)
    g = gen.standard_normal((n, spec.dim))
    return g * np.sqrt(2.0 * s)[:, None]


def sample_isotropic_increment(spec: StableSpec, dt, rng, size=None):
    """Isotropic increment over ``dt``; shape ``(dim,)`` or ``(size, dim)``."""
    dt = _check_dt(dt)
    x = _draw_increments(spec, dt, as_generator(rng), _count(size))
    return x[0] if size is None else x.reshape(tuple(np.atleast_1d(size)) + (spec.dim,))


def increments_on_grid(spec: StableSpec, n: int, h, rng) -> np.ndarray:
    """``n`` i.i.d. increments with time step ``h``, shape ``(n, dim)``."""
    if int(n) != n or n < 1:
        raise DomainError(f"number of increments must be >= 1, got {n}")
    h = _check_dt(h)
    return _draw_increments(spec, h, as_generator(rng), int(n))


def stable_cf(h, alpha, dt=1.0):
    """Characteristic function ``exp(-dt |h|^alpha)`` of the convention."""
    return np.exp(-dt * np.abs(h) ** alpha)


def hill_estimator(sample, frac=0.01) -> float:
    """Hill tail-index estimate from the top ``frac`` order statistics of ``|sample|``."""
    a = np.sort(np.abs(np.asarray(sample, dtype=float).ravel()))
    k = int(frac * a.size)
    if k < 2:
        raise DomainError("too few order statistics for a Hill estimate")
    top = a[-k:]
    threshold = a[-k - 1]
    return 1.0 / np.mean(np.log(top / threshold))


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(stats.ks_2samp(np.ravel(a), np.ravel(b)).statistic)


def ks_critical(n1: int, n2: int, level: float = 0.01) -> float:
    """Asymptotic critical value of the two-sample KS statistic."""
    c = np.sqrt(-0.5 * np.log(level / 2.0))
    return float(c * np.sqrt((n1 + n2) / (n1 * n2)))
