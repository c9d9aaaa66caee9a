"""Coupled simulation of the slow-fast system

    dX = b(X, Y) dt + dL1,     dY = eps^-1 f(X, Y) dt + eps^(-1/alpha) dL2,

and checks of the fast component's time-rescaling and moment bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _fallback
from ._backend import kernels
from .engine import DriftField, EnsembleStat, Path, TimeGrid, map_blocks, write_paths_csv
from .errors import DomainError, NonFiniteError, StiffnessError
from .rng import RngStream
from .stable import StableSpec, _draw_increments, check_alpha, ks_statistic

STABILITY_RATIO = 20.0


def check_dissipativity(f: DriftField, d1: int, d2: int, beta: float, n: int = 1000, seed: int = 0, radius: float = 10.0):
    """Spot-check the one-sided Lipschitz bound of ``f`` and finiteness of ``f(x, 0)``.

    Raises :class:`DomainError` naming the first violating triple.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-radius, radius, (n, d1))
    y1 = rng.normal(0.0, radius, (n, d2))
    y2 = rng.normal(0.0, radius, (n, d2))
    df = np.asarray(f(x, y1), dtype=float) - np.asarray(f(x, y2), dtype=float)
    dy = y1 - y2
    lhs = np.sum(df * dy, axis=1)
    rhs = -beta * np.sum(dy * dy, axis=1)
    bad = np.flatnonzero(lhs > rhs + 1e-9 * (1.0 + np.abs(rhs)))
    if bad.size:
        i = bad[0]
        raise DomainError(
            f"fast drift is not {beta}-dissipative at x={x[i]}, y1={y1[i]}, y2={y2[i]}"
        )
    f0 = np.asarray(f(x, np.zeros((n, d2))), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise DomainError("f(x, 0) is not finite on the spot-check sample")


@dataclass(frozen=True)
class SlowFastSystem:
    """Coefficients and noise of a two-time-scale system.

    ``kernel_code`` selects a compiled implementation of the built-in
    problems; user systems leave it ``None`` and run through numpy.
    ``gamma``/``delta`` record the assumed Hoelder indices (metadata only).
    """

    b: DriftField
    f: DriftField
    beta: float
    alpha: float
    d1: int = 1
    d2: int = 1
    bbar: Optional[DriftField] = None
    kernel_code: Optional[int] = None
    kernel_params: tuple = ()
    name: str = ""
    gamma: Optional[float] = None
    delta: Optional[float] = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.beta > 0:
            raise DomainError(f"dissipativity constant must be positive, got {self.beta}")
        if self.check:
            check_dissipativity(self.f, self.d1, self.d2, self.beta)

    @property
    def noise1(self) -> StableSpec:
        return StableSpec(self.alpha, self.d1)

    @property
    def noise2(self) -> StableSpec:
        return StableSpec(self.alpha, self.d2)

    def frozen(self, x):
        from .averaging import FrozenSpec

        return FrozenSpec(x=x, f=self.f, noise=self.noise2, beta=self.beta, check=False)


@dataclass(frozen=True)
class MultiscaleRun:
    system: SlowFastSystem
    epsilon: float
    grid: TimeGrid
    x0: object = 0.0
    y0: object = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if self.grid.h > self.epsilon / STABILITY_RATIO * (1.0 + 1e-12):
            raise StiffnessError(
                f"step {self.grid.h:g} exceeds epsilon/{STABILITY_RATIO:g} = {self.epsilon / STABILITY_RATIO:g}"
            )
        object.__setattr__(self, "x0", _state(self.x0, self.system.d1, "x0"))
        object.__setattr__(self, "y0", _state(self.y0, self.system.d2, "y0"))

    @property
    def fast_scale(self) -> float:
        return self.epsilon ** (-1.0 / self.system.alpha)

    @property
    def ratio(self) -> float:
        return self.grid.h / self.epsilon


def _state(v, d, name):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.shape != (d,):
        raise DomainError(f"{name} must have {d} components, got shape {a.shape}")
    return a


def path_noise(system: SlowFastSystem, n: int, h: float, stream: RngStream):
    """Slow and fast increments of one path; slow ones are drawn first."""
    gen = stream.generator()
    dl1 = _draw_increments(system.noise1, h, gen, n)
    dl2 = _draw_increments(system.noise2, h, gen, n)
    return dl1, dl2


@dataclass
class EnsembleRun:
    """Per-path outputs of :func:`simulate_ensemble`.

    ``x``, ``xbar``, ``y`` have shape ``(len(times), n_paths, d)``.
    """

    times: np.ndarray
    x: np.ndarray
    xbar: Optional[np.ndarray]
    y: np.ndarray
    sup_diff: Optional[np.ndarray]


def _use_kernel(system, bbar):
    return system.kernel_code is not None and bbar is None and system.d1 == 1 and system.d2 == 1


def _run_block(run, dl1, dl2, x0, y0, cmp_stride, rec_idx, with_bar, bbar, backend):
    sysm = run.system
    h = run.grid.h
    if _use_kernel(sysm, bbar):
        params = np.asarray(sysm.kernel_params, dtype=float)
        sup, xs, xbs, ys, bad = backend.coupled_block(
            sysm.kernel_code, params, x0[:, 0].copy(), y0[:, 0].copy(),
            np.ascontiguousarray(dl1[..., 0]), np.ascontiguousarray(dl2[..., 0]),
            h, run.ratio, run.fast_scale, cmp_stride, rec_idx, with_bar,
        )
        return sup, xs[..., None], xbs[..., None], ys[..., None], bad
    bb = (bbar if bbar is not None else sysm.bbar) if with_bar else None
    if with_bar and bb is None:
        raise DomainError("an averaged drift is required to simulate the averaged path")
    return _fallback.generic_coupled(
        sysm.b, sysm.f, bb, x0, y0, dl1, dl2, h, run.ratio, run.fast_scale, cmp_stride, rec_idx
    )


def simulate_ensemble(
    run: MultiscaleRun,
    n_paths: int,
    base_stream: RngStream,
    *,
    record_times=(),
    with_bar: bool = False,
    bbar=None,
    cmp_stride: int = 1,
    workers: int = 1,
    block: int = 256,
    backend=None,
) -> EnsembleRun:
    """Simulate ``n_paths`` independent copies; path ``i`` uses ``base_stream.child(i)``.

    With ``with_bar`` the averaged equation is stepped alongside on the same
    slow increments and the running maximum of ``|X - Xbar|`` over every
    ``cmp_stride``-th node is returned.  ``bbar`` overrides the system's
    averaged drift (forcing the numpy path).
    """
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    backend = kernels if backend is None else backend
    grid = run.grid
    n = grid.n_steps
    if n % cmp_stride:
        raise DomainError(f"comparison stride {cmp_stride} does not divide {n} steps")
    rec_idx = np.array(sorted(grid.index_of(t) for t in record_times), dtype=np.int64)
    sysm = run.system

    def do_block(start, stop):
        B = stop - start
        dl1 = np.empty((n, B, sysm.d1))
        dl2 = np.empty((n, B, sysm.d2))
        for j, i in enumerate(range(start, stop)):
            dl1[:, j], dl2[:, j] = path_noise(sysm, n, grid.h, base_stream.child(i))
        x0 = np.tile(run.x0, (B, 1))
        y0 = np.tile(run.y0, (B, 1))
        sup, xs, xbs, ys, bad = _run_block(run, dl1, dl2, x0, y0, cmp_stride, rec_idx, with_bar, bbar, backend)
        if bad.any():
            i = start + int(np.flatnonzero(bad)[0])
            raise NonFiniteError(f"non-finite state in path {i} (epsilon={run.epsilon:g})", path_index=i)
        return sup, xs, xbs, ys

    parts = map_blocks(do_block, n_paths, block, workers)
    sup = np.concatenate([p[0] for p in parts])
    xs = np.concatenate([p[1] for p in parts], axis=1)
    xbs = np.concatenate([p[2] for p in parts], axis=1)
    ys = np.concatenate([p[3] for p in parts], axis=1)
    return EnsembleRun(
        times=np.asarray(sorted(record_times), dtype=float),
        x=xs,
        xbar=xbs if with_bar else None,
        y=ys,
        sup_diff=sup if with_bar else None,
    )


def simulate_slow_fast(run: MultiscaleRun, rng: RngStream, shared_slow_noise=None, backend=None):
    """One coupled path ``(Path_x, Path_y)``.

    ``shared_slow_noise`` (shape ``(n_steps, d1)``) replaces the slow
    increments drawn from ``rng`` so the path can be coupled to the averaged
    equation; the fast increments are unaffected.
    """
    backend = kernels if backend is None else backend
    grid = run.grid
    n = grid.n_steps
    sysm = run.system
    dl1, dl2 = path_noise(sysm, n, grid.h, rng)
    if shared_slow_noise is not None:
        s = np.asarray(shared_slow_noise, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.shape != dl1.shape:
            raise DomainError(f"shared slow noise has shape {s.shape}, expected {dl1.shape}")
        dl1 = s
    rec_idx = np.arange(n + 1, dtype=np.int64)
    _, xs, _, ys, bad = _run_block(
        run, dl1[:, None, :], dl2[:, None, :], run.x0[None, :], run.y0[None, :], 1, rec_idx, False, None, backend
    )
    if bad.any():
        raise NonFiniteError("non-finite state in coupled path", path_index=0)
    return Path(grid, xs[:, 0]), Path(grid, ys[:, 0])


def paths_to_csv(path_x: Path, path_y: Path, target=None):
    """CSV with columns ``t, x_1.., y_1..``."""
    return write_paths_csv(path_x.grid, [("x", path_x.states), ("y", path_y.states)], target)


def _fast_only(f, x, y0, n_steps, ratio, scale, h, spec2, n, stream):
    """Fast component with the slow state frozen at ``x``; returns ``Y`` at the end."""
    y = np.tile(np.asarray(y0, dtype=float), (n, 1))
    if n_steps == 0:
        return y
    noise = np.empty((n_steps, n, spec2.dim))
    for i in range(n):
        noise[:, i] = _draw_increments(spec2, h, stream.child(i).generator(), n_steps)
    xs = np.tile(np.asarray(x, dtype=float), (n, 1))
    for k in range(n_steps):
        y = y + ratio * f(xs, y) + scale * noise[k]
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("non-finite fast state")
    return y


def rescaled_fast_law_check(
    system: SlowFastSystem,
    epsilon: float,
    t: float,
    n: int,
    rng: RngStream,
    *,
    x0=0.0,
    y0=0.0,
    fast_step: float = 0.05,
    compare_system: Optional[SlowFastSystem] = None,
) -> float:
    """KS distance between ``Y^eps`` at slow time ``t*eps`` and the unit-scale
    fast process at time ``t`` driven by fresh noise.

    The slow state is frozen at ``x0``.  ``compare_system`` swaps the
    dynamics of the unit-scale sample (negative controls).
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if t < 0:
        raise DomainError("t must be non-negative")
    if fast_step > 1.0 / (STABILITY_RATIO * system.beta) * (1 + 1e-12):
        raise StiffnessError("fast step too large for the dissipative drift")
    n_steps = int(round(t / fast_step))
    if abs(n_steps * fast_step - t) > 1e-9 * max(1.0, t):
        raise DomainError(f"t={t} is not a multiple of the fast step {fast_step}")
    x0 = _state(x0, system.d1, "x0")
    y0 = _state(y0, system.d2, "y0")
    other = compare_system if compare_system is not None else system
    h = epsilon * fast_step
    a = _fast_only(system.f, x0, y0, n_steps, h / epsilon, epsilon ** (-1.0 / system.alpha), h,
                   system.noise2, n, rng.child(0))
    b = _fast_only(other.f, x0, y0, n_steps, fast_step, 1.0, fast_step, other.noise2, n, rng.child(1))
    return ks_statistic(a[:, 0], b[:, 0])


def fast_moment_bound_scan(run: MultiscaleRun, p: float, times, n_paths: int, rng: RngStream, workers: int = 1):
    """``E|Y_t|^p`` estimates at each requested time, one :class:`EnsembleStat` each."""
    if not 1.0 <= p < run.system.alpha:
        raise DomainError(f"p must lie in [1, alpha), got {p}")
    res = simulate_ensemble(run, n_paths, rng, record_times=times, workers=workers)
    order = np.argsort(np.asarray(times, dtype=float), kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    norms = np.sqrt(np.sum(res.y**2, axis=-1)) ** p
    return [EnsembleStat.from_values(norms[inv[j]]) for j in range(len(times))]
