"""Uniform time grids, Euler stepping for additive-noise SDEs, path
containers and ensemble Monte Carlo reductions."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, GridMismatchError, NonFiniteError
from .rng import RngStream


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, T]`` with ``n_steps`` steps of size ``h = T / n_steps``."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise DomainError(f"horizon T must be positive, got {self.T}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_step(cls, T: float, h: float) -> "TimeGrid":
        """Finest grid on [0, T] whose step does not exceed ``h``."""
        if not h > 0:
            raise DomainError(f"step must be positive, got {h}")
        n = int(np.ceil(T / h * (1.0 - 1e-12)))
        return cls(T, max(n, 1))

    @property
    def h(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        # endpoint pinned to T; interior nodes k*T/n
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def index_of(self, t: float) -> int:
        """Node index of time ``t``; ``t`` must sit on the grid."""
        k = t / self.h
        kr = int(round(k))
        if abs(k - kr) > 1e-9 * max(1.0, k) or not 0 <= kr <= self.n_steps:
            raise DomainError(f"time {t} is not a node of {self}")
        return kr


@dataclass(frozen=True)
class DriftField:
    """Deterministic coefficient field evaluated on arrays of states.

    ``func`` receives one array per input (shape ``(..., d_i)``) and returns
    shape ``(..., out_dim)``.
    """

    func: Callable
    in_dims: tuple
    out_dim: int
    lipschitz: Optional[float] = None
    name: str = ""

    def __call__(self, *states):
        return self.func(*states)


@dataclass
class Path:
    grid: TimeGrid
    states: np.ndarray
    blown_up: bool = False

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.states.shape[0] != self.grid.n_steps + 1:
            raise DomainError("path length does not match its grid")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def to_csv(self, target=None, prefix="x") -> Optional[str]:
        """Write columns ``t, x_1..x_d``; returns the text when ``target`` is None."""
        return write_paths_csv(self.grid, [(prefix, self.states)], target)


def format_float(v) -> str:
    return repr(float(v))


def write_paths_csv(grid: TimeGrid, blocks, target=None):
    """CSV with a time column followed by every ``(prefix, states)`` block."""
    header = ["t"]
    cols = []
    for prefix, states in blocks:
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        header += [f"{prefix}_{i + 1}" for i in range(states.shape[1])]
        cols.append(states)
    data = np.hstack([grid.times[:, None]] + cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in data:
        w.writerow([format_float(v) for v in row])
    text = buf.getvalue()
    if target is None:
        return text
    with open(target, "w", newline="") as fh:
        fh.write(text)
    return None


@dataclass
class EnsembleStat:
    """Monte Carlo mean with standard error ``std / sqrt(n_paths)``.

    ``values`` keeps the per-path data when the producer retained it.
    """

    mean: object
    stderr: float
    n_paths: int
    values: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_values(cls, values, keep=True) -> "EnsembleStat":
        v = np.asarray(values, dtype=float)
        n = v.shape[0]
        if n < 2:
            raise DomainError("at least two paths are needed for a standard error")
        mean = v.mean(axis=0)
        se = v.std(axis=0, ddof=1) / np.sqrt(n)
        if v.ndim == 1:
            mean, se = float(mean), float(se)
        else:
            se = float(np.sqrt(np.sum(se**2)))
        return cls(mean, se, n, v if keep else None)


def check_finite(states, what="state"):
    """Raise :class:`NonFiniteError` naming the first non-finite path index."""
    states = np.asarray(states)
    ok = np.isfinite(states)
    if ok.all():
        return
    if states.ndim > 1:
        ok = ok.reshape(states.shape[0], -1).all(axis=1)
        idx = int(np.flatnonzero(~ok)[0])
    else:
        idx = int(np.flatnonzero(~ok)[0])
    raise NonFiniteError(f"non-finite {what} in path {idx}", path_index=idx)


def euler_path(drift: DriftField, x0, grid: TimeGrid, noise) -> Path:
    """Euler scheme ``X_{k+1} = X_k + drift(X_k) h + dL_k``.

    Raises :class:`NonFiniteError` on overflow; large but finite values are kept.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    noise = np.asarray(noise, dtype=float)
    if noise.ndim == 1:
        noise = noise[:, None]
    if noise.shape != (grid.n_steps, x.size):
        raise DomainError(f"noise has shape {noise.shape}, expected {(grid.n_steps, x.size)}")
    h = grid.h
    states = np.empty((grid.n_steps + 1, x.size))
    states[0] = x
    for k in range(grid.n_steps):
        x = x + h * np.asarray(drift(x), dtype=float) + noise[k]
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"non-finite state at step {k + 1}", path_index=0, step=k + 1)
        states[k + 1] = x
    return Path(grid, states)


def sup_norm_error(p1: Path, p2: Path, p: float) -> float:
    """``(max_k |p1_k - p2_k|)**p`` with the Euclidean norm at each node."""
    if p1.grid != p2.grid:
        raise GridMismatchError(f"grids differ: {p1.grid} vs {p2.grid}")
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    d = p1.states - p2.states
    return float(np.max(np.sqrt(np.sum(d * d, axis=1)))) ** p


def ensemble_mc(path_functional, n_paths: int, base_stream: RngStream, workers: int = 1) -> EnsembleStat:
    """Mean and standard error of ``path_functional(stream)`` over independent paths.

    Path ``i`` receives ``base_stream.child(i)``.  Values are reduced in path
    order, so the result does not depend on ``workers``.
    """
    if n_paths < 2:
        raise DomainError("n_paths must be >= 2")

    def one(i):
        try:
            v = np.asarray(path_functional(base_stream.child(i)), dtype=float)
        except NonFiniteError as exc:
            raise NonFiniteError(str(exc), path_index=i, step=exc.step) from exc
        if not np.all(np.isfinite(v)):
            raise NonFiniteError(f"non-finite functional value in path {i}", path_index=i)
        return v

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(one, range(n_paths)))
    else:
        vals = [one(i) for i in range(n_paths)]
    return EnsembleStat.from_values(np.array(vals))


def map_blocks(fn, n_items: int, block: int, workers: int = 1):
    """Apply ``fn(start, stop)`` over contiguous blocks; results in block order."""
    bounds = [(s, min(s + block, n_items)) for s in range(0, n_items, block)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda b: fn(*b), bounds))
    return [fn(s, e) for s, e in bounds]
