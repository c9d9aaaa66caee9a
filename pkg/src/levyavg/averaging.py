"""Frozen fast dynamics ``dY = f(x, Y) dt + dL2`` with the slow state held
fixed: invariant-measure and averaged-drift estimation, contraction and
ergodicity checks, and the averaged slow equation."""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .engine import DriftField, EnsembleStat, Path, TimeGrid, euler_path, format_float, map_blocks
from .errors import DegenerateFit, DomainError, InterpolationRangeError, NonFiniteError, StiffnessError
from .rng import RngStream
from .stable import StableSpec, _draw_increments

STABILITY_RATIO = 20.0
BURN_IN_RATES = 10.0
# noise is drawn per path in chunks of this many steps
_CHUNK = 2048


@dataclass(frozen=True)
class FrozenSpec:
    """Fast dynamics with the slow state frozen at ``x``.

    ``beta`` is the dissipativity constant of ``f``; ``beta=0`` is accepted
    for pure-noise runs, which then skip every rule tied to ``1/beta``.
    """

    x: object
    f: DriftField
    noise: StableSpec
    beta: float = 1.0
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.beta < 0:
            raise DomainError(f"dissipativity constant must be non-negative, got {self.beta}")
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        if self.check and self.beta > 0:
            from .multiscale import check_dissipativity

            check_dissipativity(self.f, self.x.size, self.noise.dim, self.beta)

    @property
    def dim(self) -> int:
        return self.noise.dim

    @property
    def burn_in(self) -> float:
        return BURN_IN_RATES / self.beta

    def check_step(self, h: float):
        if self.beta > 0 and h > 1.0 / (STABILITY_RATIO * self.beta) * (1.0 + 1e-12):
            raise StiffnessError(f"step {h:g} exceeds 1/(20 beta) = {1.0 / (STABILITY_RATIO * self.beta):g}")

    def drift(self, y, x=None):
        xs = self.x if x is None else x
        return np.asarray(self.f(np.broadcast_to(xs, y.shape[:-1] + xs.shape[-1:]), y), dtype=float)


def _y0(spec, y0):
    a = np.atleast_1d(np.asarray(y0, dtype=float))
    if a.shape != (spec.dim,):
        raise DomainError(f"y0 must have {spec.dim} components, got shape {a.shape}")
    return a


def _start(spec, y0, B):
    a = np.asarray(y0, dtype=float)
    if a.ndim == 2:
        if a.shape != (B, spec.dim):
            raise DomainError(f"per-path starts must have shape {(B, spec.dim)}, got {a.shape}")
        return a.copy()
    return np.tile(_y0(spec, a), (B, 1))


def run_frozen(spec: FrozenSpec, copies, h: float, n_steps: int, streams, visit):
    """Step synchronously coupled copies of the frozen dynamics.

    ``copies`` is a list of ``(x, y0)`` pairs, ``y0`` either one state or
    one row per path; each copy of path ``i`` is driven by the increments of
    ``streams[i]``.  ``visit(k, ys)`` is called at every node
    ``k = 0..n_steps`` with the list of ``(B, d2)`` states.
    """
    gens = [s.generator() for s in streams]
    B = len(gens)
    xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x, _ in copies]
    ys = [_start(spec, y0, B) for _, y0 in copies]
    visit(0, ys)
    k = 0
    while k < n_steps:
        m = min(_CHUNK, n_steps - k)
        noise = np.stack([_draw_increments(spec.noise, h, g, m) for g in gens], axis=1)
        for j in range(m):
            ys = [y + h * spec.drift(y, x) + noise[j] for x, y in zip(xs, ys)]
            visit(k + j + 1, ys)
        k += m
        for y in ys:
            ok = np.isfinite(y).all(axis=1)
            if not ok.all():
                i = int(np.flatnonzero(~ok)[0])
                raise NonFiniteError(f"non-finite frozen state in path {i} before step {k}", path_index=i, step=k)
    return ys


def simulate_frozen(spec: FrozenSpec, y0, grid: TimeGrid, rng: RngStream) -> Path:
    """Euler path of ``dY = f(x, Y) dt + dL2`` on ``grid``."""
    spec.check_step(grid.h)
    states = np.empty((grid.n_steps + 1, spec.dim))

    def visit(k, ys):
        states[k] = ys[0][0]

    run_frozen(spec, [(spec.x, y0)], grid.h, grid.n_steps, [rng], visit)
    return Path(grid, states)


def frozen_ensemble(spec: FrozenSpec, y0, grid: TimeGrid, n_paths: int, rng: RngStream, record_times,
                    workers: int = 1, block: int = 1024) -> np.ndarray:
    """States at ``record_times`` of ``n_paths`` independent frozen paths, shape ``(m, n, d2)``.

    Path ``i`` uses ``rng.child(i)``.
    """
    spec.check_step(grid.h)
    idx = [grid.index_of(t) for t in record_times]
    where = {}
    for j, k in enumerate(idx):
        where.setdefault(k, []).append(j)

    def do_block(start, stop):
        out = np.empty((len(idx), stop - start, spec.dim))

        def visit(k, ys):
            for j in where.get(k, ()):
                out[j] = ys[0]

        run_frozen(spec, [(spec.x, y0)], grid.h, max(idx, default=0),
                   [rng.child(i) for i in range(start, stop)], visit)
        return out

    return np.concatenate(map_blocks(do_block, n_paths, block, workers), axis=1)


@dataclass
class ContractionCurve:
    """Distance of two synchronously coupled frozen paths.

    ``single`` is one realization; ``mean``/``stderr`` average over paths.
    """

    times: np.ndarray
    single: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray

    def decay_rate(self, t_min: float = 1.0, floor: float = 1e-300) -> float:
        """Slope of ``log mean`` against ``t`` for ``t >= t_min``."""
        sel = (self.times >= t_min) & (self.mean > floor)
        if sel.sum() < 2:
            raise DegenerateFit("fewer than two positive points after t_min")
        return float(np.polyfit(self.times[sel], np.log(self.mean[sel]), 1)[0])


def contraction_check(spec: FrozenSpec, y1, y2, T: float, rng: RngStream, *, x_alt=None, h: float = 0.01,
                      n_paths: int = 100, workers: int = 1) -> ContractionCurve:
    """Track ``|Y^{x,y1}_t - Y^{x_alt,y2}_t|`` under shared noise.

    ``x_alt`` defaults to the frozen state of ``spec``.
    """
    spec.check_step(h)
    grid = TimeGrid.from_step(T, h)
    h = grid.h
    x2 = spec.x if x_alt is None else np.atleast_1d(np.asarray(x_alt, dtype=float))

    def do_block(start, stop):
        dist = np.empty((grid.n_steps + 1, stop - start))

        def visit(k, ys):
            d = ys[0] - ys[1]
            dist[k] = np.sqrt(np.sum(d * d, axis=1))

        run_frozen(spec, [(spec.x, y1), (x2, y2)], h, grid.n_steps,
                   [rng.child(i) for i in range(start, stop)], visit)
        return dist

    dist = np.concatenate(map_blocks(do_block, n_paths, 256, workers), axis=1)
    se = dist.std(axis=1, ddof=1) / np.sqrt(n_paths) if n_paths > 1 else np.zeros(grid.n_steps + 1)
    return ContractionCurve(grid.times, dist[:, 0].copy(), dist.mean(axis=1), se)


def _time_averages(spec, g, y0, h, n_burn, n_total, streams):
    """Per-path trapezoidal time average of ``g(Y)`` over nodes ``n_burn..n_total``."""
    acc = np.zeros(len(streams))

    def visit(k, ys):
        if k < n_burn:
            return
        w = 0.5 if k in (n_burn, n_total) else 1.0
        acc[:] += w * np.asarray(g(ys[0]), dtype=float).reshape(len(streams), -1)[:, 0]

    run_frozen(spec, [(spec.x, y0)], h, n_total, streams, visit)
    return acc / (n_total - n_burn)


def ergodic_average_bbar(spec: FrozenSpec, b: DriftField, T: float, rng: RngStream, *, burn_in: Optional[float] = None,
                         n_reps: int = 32, h: float = 0.01, y0=None, workers: int = 1) -> EnsembleStat:
    """Estimate ``bbar(x) = int b(x, y) mu^x(dy)`` by time averages over replicas.

    Each replica averages ``b(x, Y_t)`` over ``[burn_in, T]``; the replica
    means give the estimate and its standard error.  Only the first component
    of ``b`` is averaged when ``d1 > 1``; use :class:`MemoBbar` for vectors.
    """
    burn = spec.burn_in if burn_in is None else float(burn_in)
    if spec.beta > 0 and T < burn + BURN_IN_RATES / spec.beta - 1e-12:
        raise DomainError(f"T={T} must be at least burn_in + 10/beta = {burn + BURN_IN_RATES / spec.beta}")
    spec.check_step(h)
    grid = TimeGrid.from_step(T, h)
    n_burn = int(np.ceil(burn / grid.h - 1e-9))
    y0 = np.zeros(spec.dim) if y0 is None else y0
    xs = spec.x

    def g(y):
        return np.asarray(b(np.broadcast_to(xs, (y.shape[0], xs.size)), y), dtype=float)

    parts = map_blocks(
        lambda s, e: _time_averages(spec, g, y0, grid.h, n_burn, grid.n_steps, [rng.child(i) for i in range(s, e)]),
        n_reps, 64, workers,
    )
    return EnsembleStat.from_values(np.concatenate(parts))


@dataclass
class InvariantMeasureEstimate:
    """Samples approximating the invariant measure of the frozen dynamics.

    ``samples`` has shape ``(n_chains, per_chain, d2)``; chain means give
    batch-means standard errors for :meth:`mean_of`.
    """

    x: np.ndarray
    samples: np.ndarray
    burn_in: float
    spacing: float

    def mean_of(self, g: Callable) -> EnsembleStat:
        c, m, d = self.samples.shape
        vals = np.asarray(g(self.samples.reshape(c * m, d)), dtype=float).reshape(c, m)
        return EnsembleStat.from_values(vals.mean(axis=1))

    @property
    def flat(self) -> np.ndarray:
        return self.samples.reshape(-1, self.samples.shape[-1])


def estimate_invariant_measure(spec: FrozenSpec, n_chains: int, per_chain: int, rng: RngStream, *,
                               burn_in: Optional[float] = None, spacing: Optional[float] = None,
                               h: float = 0.01, y0=None, workers: int = 1) -> InvariantMeasureEstimate:
    """Sample ``n_chains`` independent chains after ``burn_in``, every ``spacing``."""
    if spec.beta <= 0:
        raise DomainError("invariant measure requires beta > 0")
    burn = spec.burn_in if burn_in is None else float(burn_in)
    gap = 1.0 / spec.beta if spacing is None else float(spacing)
    if burn < BURN_IN_RATES / spec.beta - 1e-12 or gap < 1.0 / spec.beta - 1e-12:
        raise DomainError("burn_in must be >= 10/beta and spacing >= 1/beta")
    spec.check_step(h)
    n_burn = int(np.ceil(burn / h - 1e-9))
    n_gap = int(np.ceil(gap / h - 1e-9))
    n_total = n_burn + (per_chain - 1) * n_gap
    y0 = np.zeros(spec.dim) if y0 is None else y0

    def do_block(start, stop):
        out = np.empty((stop - start, per_chain, spec.dim))

        def visit(k, ys):
            if k >= n_burn and (k - n_burn) % n_gap == 0:
                out[:, (k - n_burn) // n_gap] = ys[0]

        run_frozen(spec, [(spec.x, y0)], h, n_total, [rng.child(i) for i in range(start, stop)], visit)
        return out

    samples = np.concatenate(map_blocks(do_block, n_chains, 256, workers), axis=0)
    return InvariantMeasureEstimate(spec.x, samples, n_burn * h, n_gap * h)


def birkhoff_average(spec: FrozenSpec, g: Callable, T: float, rng: RngStream, *, h: float = 0.01,
                     n_batches: int = 20, y0=None) -> EnsembleStat:
    """Time average of ``g(Y)`` along one long path after burn-in.

    The standard error comes from ``n_batches`` consecutive batch means.
    """
    burn = spec.burn_in
    spec.check_step(h)
    n_burn = int(np.ceil(burn / h - 1e-9))
    n_total = int(np.ceil(T / h - 1e-9))
    per = (n_total - n_burn) // n_batches
    if per < 1:
        raise DomainError("horizon too short for the requested batches")
    sums = np.zeros(n_batches)

    def visit(k, ys):
        j = (k - n_burn - 1) // per
        if k > n_burn and j < n_batches:
            sums[j] += float(np.asarray(g(ys[0]), dtype=float).ravel()[0])

    run_frozen(spec, [(spec.x, np.zeros(spec.dim) if y0 is None else y0)], h, n_burn + per * n_batches, [rng], visit)
    return EnsembleStat.from_values(sums / per)


@dataclass
class ErgodicityCurve:
    """``P_t g(y0) - mu(g)`` estimates with the plateau they are measured against."""

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    plateau: EnsembleStat
    rate: Optional[float]
    used: np.ndarray


def ergodicity_decay(spec: FrozenSpec, g: Callable, y0, times, n: int, rng: RngStream, *, h: float = 0.01,
                     workers: int = 1) -> ErgodicityCurve:
    """Distance of ``E g(Y_t^{x,y0})`` to the long-run plateau and its decay rate.

    The plateau is the ensemble mean of ``g`` at four times the largest
    requested time on the same paths.  The rate is minus the slope of
    ``log|difference|`` over points whose difference exceeds three standard
    errors; ``None`` when fewer than two such points exist.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise DomainError("times must be non-negative and increasing")
    t_plateau = 4.0 * times[-1]
    grid = TimeGrid.from_step(t_plateau, h)
    grid_t = [grid.h * round(t / grid.h) for t in times]
    states = frozen_ensemble(spec, y0, grid, n, rng, list(grid_t) + [t_plateau], workers=workers)
    gv = np.asarray(g(states.reshape(-1, spec.dim)), dtype=float).reshape(states.shape[0], n)
    plateau = EnsembleStat.from_values(gv[-1])
    diff = gv[:-1] - gv[-1]
    vals = diff.mean(axis=1)
    se = diff.std(axis=1, ddof=1) / np.sqrt(n)
    used = np.abs(vals) > 3.0 * se
    rate = None
    if used.sum() >= 2:
        rate = float(-np.polyfit(times[used], np.log(np.abs(vals[used])), 1)[0])
    return ErgodicityCurve(times, vals, se, plateau, rate, used)


def simulate_averaged(bbar, grid: TimeGrid, x0, slow_noise) -> Path:
    """Euler path of ``dXbar = bbar(Xbar) dt + dL1`` on the given slow increments.

    ``bbar`` maps a state ``(d1,)`` to a drift ``(d1,)``; a
    :class:`BbarTable` raises :class:`InterpolationRangeError` when the path
    leaves its domain.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    drift = bbar if isinstance(bbar, DriftField) else DriftField(bbar, (x0.size,), x0.size)
    return euler_path(drift, x0, grid, slow_noise)


@dataclass
class BbarTable:
    """Averaged drift tabulated on a uniform grid, linearly interpolated (``d1 = 1``)."""

    x: np.ndarray
    values: np.ndarray
    stderr: np.ndarray

    @classmethod
    def tabulate(cls, system, x_grid, rng: RngStream, *, T: float = 40.0, burn_in: Optional[float] = None,
                 n_reps: int = 32, h: float = 0.01, workers: int = 1) -> "BbarTable":
        """Estimate ``bbar`` at each node with common random numbers across nodes.

        Sharing ``rng`` between nodes correlates neighbouring estimates,
        which keeps finite-difference slopes of the table smooth.
        """
        if system.d1 != 1:
            raise DomainError("tabulation supports d1 = 1; use MemoBbar otherwise")
        xg = np.asarray(x_grid, dtype=float)
        if xg.ndim != 1 or xg.size < 2 or np.any(np.diff(xg) <= 0):
            raise DomainError("x_grid must be increasing with at least two nodes")
        vals, ses = [], []
        for xv in xg:
            st = ergodic_average_bbar(system.frozen(xv), system.b, T, rng, burn_in=burn_in, n_reps=n_reps,
                                      h=h, workers=workers)
            vals.append(st.mean)
            ses.append(st.stderr)
        return cls(xg, np.array(vals), np.array(ses))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.x[0], self.x[-1]
        if np.any(x < lo) or np.any(x > hi) or not np.all(np.isfinite(x)):
            bad = x[(x < lo) | (x > hi) | ~np.isfinite(x)].ravel()[0]
            raise InterpolationRangeError(f"x={bad} outside the tabulated range [{lo}, {hi}]")
        return np.interp(x, self.x, self.values)

    @property
    def max_stderr(self) -> float:
        return float(self.stderr.max())

    def to_csv(self, target=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_1", "bbar_1", "stderr"])
        for r in zip(self.x, self.values, self.stderr):
            w.writerow([format_float(v) for v in r])
        text = buf.getvalue()
        if target is None:
            return text
        with open(target, "w", newline="") as fh:
            fh.write(text)

    @classmethod
    def from_csv(cls, source) -> "BbarTable":
        if "\n" in source:
            rows = list(csv.DictReader(io.StringIO(source)))
        else:
            with open(source, newline="") as fh:
                rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"x_1", "bbar_1", "stderr"}:
            raise DomainError("bbar table must have columns x_1, bbar_1, stderr")
        return cls(*(np.array([float(r[k]) for r in rows]) for k in ("x_1", "bbar_1", "stderr")))


class MemoBbar:
    """On-demand averaged drift for ``d1 > 1`` with a per-key memo.

    Every key is estimated from the same stream, so values do not depend on
    query order and concurrent writers store identical results.
    """

    def __init__(self, system, rng: RngStream, *, T: float = 40.0, n_reps: int = 32, h: float = 0.01):
        self.system = system
        self.rng = rng
        self.T = T
        self.n_reps = n_reps
        self.h = h
        self._memo = {}
        self._lock = threading.Lock()

    def _one(self, x):
        key = tuple(float(v) for v in x)
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        spec = self.system.frozen(np.array(key))
        comps = []
        for i in range(self.system.d1):
            b_i = DriftField(lambda xx, yy, i=i: np.asarray(self.system.b(xx, yy))[..., i:i + 1], (self.system.d1, self.system.d2), 1)
            comps.append(ergodic_average_bbar(spec, b_i, self.T, self.rng, n_reps=self.n_reps, h=self.h).mean)
        val = np.array(comps)
        with self._lock:
            self._memo.setdefault(key, val)
        return val

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self._one(x)
        return np.stack([self._one(r) for r in x])

    def __len__(self):
        return len(self._memo)


@dataclass
class GrowthFit:
    T: np.ndarray
    moments: list
    slope: float


def frozen_sup_moment_growth(spec: FrozenSpec, y0, p: float, T_list, n: int, rng: RngStream, *, h: float = 0.05,
                             workers: int = 1) -> GrowthFit:
    """Slope of ``log E[sup_{[0,T]} |Y|^p]`` against ``log T``.

    All horizons are read off the same paths run to the largest ``T``.
    """
    T_arr = np.asarray(T_list, dtype=float)
    if T_arr.ndim != 1 or T_arr.size < 2:
        raise DegenerateFit("at least two horizons are needed for a slope")
    if np.any(np.diff(T_arr) <= 0) or T_arr[0] <= 0:
        raise DomainError("T_list must be positive and increasing")
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    spec.check_step(h)
    grid = TimeGrid.from_step(T_arr[-1], h)
    idx = {grid.index_of(grid.h * round(t / grid.h)): j for j, t in enumerate(T_arr)}

    def do_block(start, stop):
        run_max = np.zeros(stop - start)
        out = np.empty((T_arr.size, stop - start))

        def visit(k, ys):
            np.maximum(run_max, np.sqrt(np.sum(ys[0] ** 2, axis=1)), out=run_max)
            j = idx.get(k)
            if j is not None:
                out[j] = run_max

        run_frozen(spec, [(spec.x, y0)], grid.h, grid.n_steps, [rng.child(i) for i in range(start, stop)], visit)
        return out

    sups = np.concatenate(map_blocks(do_block, n, 512, workers), axis=1) ** p
    stats_ = [EnsembleStat.from_values(s) for s in sups]
    means = np.array([s.mean for s in stats_])
    if np.any(means <= 0):
        raise DegenerateFit("zero moment; slope undefined")
    slope = float(np.polyfit(np.log(T_arr), np.log(means), 1)[0])
    return GrowthFit(T_arr, stats_, slope)
