"""Monte Carlo corrector ``Phi(x, y) = int_0^inf [E b(x, Y_t^{x,y}) - bbar(x)] dt``
and simulation-based checks of the Poisson equation it solves.

The generator of the frozen dynamics is never assembled.  Correctness is
tested through the Markov identity

    Phi(x, y) - E Phi(x, Y_t^{x,y}) = int_0^t [E b(x, Y_s^{x,y}) - bbar(x)] ds.

By default the integrand uses a control variate: each path is paired with a
synchronously coupled copy started from a burned-in (approximately
stationary) state, whose ``E b`` equals ``bbar(x)``.  The paired difference
contracts like ``e^{-beta t}``, which removes the stationary fluctuations
from the time integral without changing its expectation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .averaging import run_frozen
from .engine import format_float, map_blocks
from .errors import DegenerateFit, DomainError, StepTooSmall, TruncationError
from .rng import RngStream

DEFAULT_STEP = 0.01


def truncation_time(y, tol: float, beta: float) -> float:
    """Cut-off ``(2/beta) ln((1 + |y|)/tol)`` where the integrand tail drops below ``tol``."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    return 2.0 / beta * np.log((1.0 + float(np.linalg.norm(np.atleast_1d(y)))) / tol)


@dataclass
class PoissonSolution:
    """Corrector estimate at one point.

    ``stderr`` is the conservative bound ``sum_k w_k se_k`` over quadrature
    nodes; ``stderr_path`` is the standard error of the mean of per-path
    integrals, which is exact for this estimator.
    """

    x: np.ndarray
    y: np.ndarray
    value: np.ndarray
    T_star: float
    n_paths: int
    stderr: float
    stderr_path: float
    tail: float
    per_path: Optional[np.ndarray] = None

    def scaled(self, factor: float) -> "PoissonSolution":
        """Copy with the value multiplied by ``factor`` (negative controls)."""
        pp = None if self.per_path is None else self.per_path * factor
        return PoissonSolution(self.x, self.y, self.value * factor, self.T_star, self.n_paths,
                               self.stderr * abs(factor), self.stderr_path * abs(factor), self.tail, pp)


def _vec(v, d, name):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.shape != (d,):
        raise DomainError(f"{name} must have {d} components, got shape {a.shape}")
    return a


def _trap_weights(n_nodes, h):
    w = np.full(n_nodes, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _integrand_paths(system, x, starts, h, n_steps, streams, control, bbar_x):
    """Integrand ``b(x, Y_t) - b(x, Ytilde_t)`` (or ``- bbar(x)``) per node and path.

    ``starts`` has shape ``(B, d2)``.  Returns the array ``(n_steps + 1, B, d1)``
    and the final states of the primary copies.
    """
    spec = system.frozen(x)
    B = len(streams)
    xs = np.broadcast_to(spec.x, (B, system.d1))
    out = np.empty((n_steps + 1, B, system.d1))

    def bval(y):
        return np.asarray(system.b(xs, y), dtype=float).reshape(B, system.d1)

    if control:
        n_burn = int(np.ceil(spec.burn_in / h - 1e-9))
        tilde = run_frozen(spec, [(spec.x, np.zeros(system.d2))], h, n_burn,
                           [s.child(1) for s in streams], lambda k, ys: None)[0]

        def visit(k, ys):
            out[k] = bval(ys[0]) - bval(ys[1])

        copies = [(spec.x, starts), (spec.x, tilde)]
    else:
        def visit(k, ys):
            out[k] = bval(ys[0]) - bbar_x

        copies = [(spec.x, starts)]
    final = run_frozen(spec, copies, h, n_steps, [s.child(0) for s in streams], visit)
    return out, final[0]


def _integrals(system, x, starts, h, n_steps, rng, control, bbar_x, workers, block=512):
    """Per-path trapezoidal integrals and the node curve (means, stderrs)."""
    B = starts.shape[0]
    w = _trap_weights(n_steps + 1, h)

    def do_block(s, e):
        g, _ = _integrand_paths(system, x, starts[s:e], h, n_steps, [rng.child(i) for i in range(s, e)],
                                control, bbar_x)
        return np.tensordot(w, g, axes=(0, 0)), g.sum(axis=1), (g * g).sum(axis=1)

    parts = map_blocks(do_block, B, block, workers)
    per_path = np.concatenate([p[0] for p in parts])
    s1 = sum(p[1] for p in parts)
    s2 = sum(p[2] for p in parts)
    mean = s1 / B
    var = np.maximum(s2 - B * mean * mean, 0.0) / max(B - 1, 1)
    return per_path, mean, np.sqrt(var / B), w


def _combined(se_vec):
    se_vec = np.atleast_1d(se_vec)
    return float(np.sqrt(np.sum(se_vec**2)))


def _resolve(system, x, bbar, control):
    x = _vec(x, system.d1, "x")
    if control:
        return x, None
    fn = bbar if bbar is not None else system.bbar
    if fn is None:
        raise DomainError("an averaged drift is required when the control variate is off")
    return x, np.atleast_1d(np.asarray(fn(x), dtype=float))


def phi_estimate(system, x, y, tol: float, n_paths: int, rng: RngStream, *, h: float = DEFAULT_STEP,
                 control: bool = True, bbar=None, T_star: Optional[float] = None, workers: int = 1) -> PoissonSolution:
    """Trapezoidal quadrature of the Monte Carlo integrand on ``[0, T_star]``.

    ``T_star`` defaults to :func:`truncation_time`.  Raises
    :class:`TruncationError` when the integrand at ``T_star`` exceeds
    ``tol`` by more than three standard errors.
    """
    if h > 1.0 / (20.0 * system.beta) * (1 + 1e-12):
        raise DomainError("quadrature step must be at most 1/(20 beta)")
    x, bbar_x = _resolve(system, x, bbar, control)
    y = _vec(y, system.d2, "y")
    T = truncation_time(y, tol, system.beta) if T_star is None else float(T_star)
    n_steps = max(int(np.ceil(T / h - 1e-9)), 1)
    starts = np.tile(y, (n_paths, 1))
    per_path, mean, se, w = _integrals(system, x, starts, h, n_steps, rng, control, bbar_x, workers)
    tail = float(np.linalg.norm(mean[-1]))
    if tail > tol + 3.0 * _combined(se[-1]):
        raise TruncationError(f"integrand {tail:.3g} at T*={n_steps * h:g} exceeds tol={tol:g}")
    value = per_path.mean(axis=0)
    bound = _combined(np.tensordot(w, se, axes=(0, 0)))
    se_path = _combined(per_path.std(axis=0, ddof=1) / np.sqrt(n_paths))
    return PoissonSolution(x, y, value, n_steps * h, n_paths, bound, se_path, tail, per_path)


@dataclass
class DynkinResult:
    residual: float
    stderr: float
    phi_y: float
    mean_phi_end: float
    integral: float

    @property
    def z(self) -> float:
        return self.residual / self.stderr if self.stderr > 0 else (0.0 if self.residual == 0 else np.inf)


def dynkin_residual(system, x, y, t: float, tol: float, n: int, rng: RngStream, *, h: float = DEFAULT_STEP,
                    control: bool = True, bbar=None, phi_scale: float = 1.0, workers: int = 1) -> DynkinResult:
    """``|Phi(x,y) - E Phi(x, Y_t) - int_0^t (E b - bbar) ds|`` with combined standard error.

    Streams: ``rng.child(0)`` for ``Phi(x, y)``, ``rng.child(1)`` for the
    outer paths to time ``t``, ``rng.child(2)`` for one fresh inner corrector
    path per endpoint.  ``phi_scale`` multiplies both corrector values
    (a wrong corrector for negative controls).
    """
    x, bbar_x = _resolve(system, x, bbar, control)
    y = _vec(y, system.d2, "y")
    T_star = truncation_time(y, tol, system.beta)
    if t < 0 or t > T_star / 2.0:
        raise DomainError(f"t must lie in [0, T*/2] = [0, {T_star / 2:g}]")
    phi = phi_estimate(system, x, y, tol, n, rng.child(0), h=h, control=control, bbar=bbar, workers=workers)
    a = phi.per_path[:, 0] * phi_scale

    n_t = int(round(t / h))
    if abs(n_t * h - t) > 1e-9 * max(1.0, t):
        raise DomainError(f"t={t} is not a multiple of the step {h}")
    outer = rng.child(1)
    if n_t > 0:
        w = _trap_weights(n_t + 1, h)

        def do_block(s, e):
            g, last = _integrand_paths(system, x, np.tile(y, (e - s, 1)), h, n_t,
                                       [outer.child(i) for i in range(s, e)], control, bbar_x)
            return np.tensordot(w, g[..., 0], axes=(0, 0)), last

        parts = map_blocks(do_block, n, 512, workers)
        c = np.concatenate([p[0] for p in parts])
        ends = np.concatenate([p[1] for p in parts])
    else:
        c = np.zeros(n)
        ends = np.tile(y, (n, 1))

    # one inner corrector path per endpoint, each on its own stream
    inner_T = max(T_star, truncation_time(np.max(np.abs(ends)), tol, system.beta))
    inner_steps = int(np.ceil(inner_T / h - 1e-9))
    b_inner, _, _, _ = _integrals(system, x, ends, h, inner_steps, rng.child(2), control, bbar_x, workers)
    d = b_inner[:, 0] * phi_scale + c
    resid = float(abs(a.mean() - d.mean()))
    se = float(np.sqrt(a.var(ddof=1) / a.size + d.var(ddof=1) / d.size))
    return DynkinResult(resid, se, float(a.mean()), float((b_inner[:, 0] * phi_scale).mean()), float(c.mean()))


@dataclass
class GrowthProbe:
    magnitudes: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    exponent: Optional[float]
    degenerate: bool

    @property
    def status(self) -> str:
        return "degenerate: zero corrector" if self.degenerate else f"exponent {self.exponent:.4g}"


def phi_growth_probe(system, x, y_magnitudes, tol: float, n: int, rng: RngStream, *, direction=None,
                     h: float = DEFAULT_STEP, workers: int = 1) -> GrowthProbe:
    """Fit ``log|Phi(x, r u)|`` against ``log r`` over the magnitudes ``r``.

    All points share ``rng`` (common random numbers).  When no value exceeds
    ``tol + 3 stderr`` the probe reports a degenerate zero corrector.
    """
    mags = np.asarray(y_magnitudes, dtype=float)
    if mags.ndim != 1 or mags.size < 2 or np.any(mags <= 0):
        raise DomainError("y_magnitudes must hold at least two positive values")
    u = np.zeros(system.d2)
    u[0] = 1.0
    if direction is not None:
        u = _vec(direction, system.d2, "direction")
        u = u / np.linalg.norm(u)
    vals, ses = [], []
    for r in mags:
        sol = phi_estimate(system, x, r * u, tol, n, rng, h=h, workers=workers)
        vals.append(float(np.linalg.norm(sol.value)))
        ses.append(sol.stderr_path)
    vals, ses = np.array(vals), np.array(ses)
    degenerate = bool(np.all(vals <= tol + 3.0 * ses))
    exponent = None
    if not degenerate:
        if np.any(vals <= 0):
            raise DegenerateFit("a corrector value is exactly zero; exponent undefined")
        exponent = float(np.polyfit(np.log(mags), np.log(vals), 1)[0])
    return GrowthProbe(mags, vals, ses, exponent, degenerate)


@dataclass
class Derivative:
    value: float
    stderr: float
    step: float


def _fd_step(y):
    return 1e-2 * (1.0 + float(np.linalg.norm(y)))


def phi_gradient_probe(system, x, y, axis: str, tol: float, n: int, rng: RngStream, *, index: int = 0,
                       component: int = 0, h: float = DEFAULT_STEP, workers: int = 1) -> Derivative:
    """Central difference of ``Phi`` in ``y[index]`` (``axis='y'``) or ``x[index]`` (``axis='x'``).

    Both evaluations share ``rng``; the step is ``1e-2 (1 + |y|)``.  Raises
    :class:`StepTooSmall` when the paired standard error exceeds half the
    difference.
    """
    if axis not in ("x", "y"):
        raise DomainError("axis must be 'x' or 'y'")
    x = _vec(x, system.d1, "x")
    y = _vec(y, system.d2, "y")
    d = _fd_step(y)
    e = np.zeros(system.d1 if axis == "x" else system.d2)
    e[index] = d
    if axis == "x":
        pts = [(x + e, y), (x - e, y)]
    else:
        pts = [(x, y + e), (x, y - e)]
    # evaluate both points at the cut-off of the farther one so the quadratures match
    T = max(truncation_time(p[1], tol, system.beta) for p in pts)
    sols = [phi_estimate(system, px, py, tol, n, rng, h=h, T_star=T, workers=workers) for px, py in pts]
    diff = sols[0].per_path[:, component] - sols[1].per_path[:, component]
    mean = float(diff.mean())
    se = float(diff.std(ddof=1) / np.sqrt(diff.size))
    if se > 0.5 * abs(mean):
        raise StepTooSmall(f"difference {mean:.3g} is below the noise floor (stderr {se:.3g})")
    return Derivative(mean / (2.0 * d), se / (2.0 * d), d)


@dataclass
class HolderProbe:
    deltas: np.ndarray
    increments: np.ndarray
    exponent: float


def phi_holder_probe(system, x1, y, deltas, tol: float, n: int, rng: RngStream, *, index: int = 0,
                     h: float = DEFAULT_STEP, workers: int = 1) -> HolderProbe:
    """Hoelder exponent of ``x -> d Phi / d x`` from increments over ``|x1 - x2| = delta``.

    Every gradient evaluation shares ``rng``, so the increments are not
    swamped by independent Monte Carlo noise.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 1 or deltas.size < 2 or np.any(deltas <= 0):
        raise DomainError("deltas must hold at least two positive values")
    x1 = _vec(x1, system.d1, "x1")
    e = np.zeros(system.d1)
    e[index] = 1.0

    def grad(xv):
        try:
            return phi_gradient_probe(system, xv, y, "x", tol, n, rng, index=index, h=h, workers=workers).value
        except StepTooSmall:
            return 0.0

    g1 = grad(x1)
    inc = np.array([abs(grad(x1 + dl * e) - g1) for dl in deltas])
    if np.any(inc <= 0):
        raise DegenerateFit("zero gradient increment; exponent undefined")
    slope = float(np.polyfit(np.log(deltas), np.log(inc), 1)[0])
    return HolderProbe(deltas, inc, slope)


def corrector_scan(system, points, tol: float, n: int, rng: RngStream, *, h: float = DEFAULT_STEP, workers: int = 1):
    """:class:`PoissonSolution` for each ``(x, y)`` in ``points``, all on ``rng``."""
    return [phi_estimate(system, px, py, tol, n, rng, h=h, workers=workers) for px, py in points]


def scan_to_csv(solutions, target=None):
    """CSV with columns ``x_1.., y_1.., phi_1.., stderr``."""
    if not solutions:
        raise DomainError("empty scan")
    d1, d2 = solutions[0].x.size, solutions[0].y.size
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x_{i + 1}" for i in range(d1)] + [f"y_{i + 1}" for i in range(d2)]
               + [f"phi_{i + 1}" for i in range(d1)] + ["stderr"])
    for s in solutions:
        w.writerow([format_float(v) for v in (*s.x, *s.y, *s.value, s.stderr)])
    text = buf.getvalue()
    if target is None:
        return text
    with open(target, "w", newline="") as fh:
        fh.write(text)
