"""Strong and weak averaging-error curves over a geometric epsilon grid and
log-log rate fitting with bootstrap confidence intervals."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .engine import TimeGrid, format_float
from .errors import DegenerateFit, DomainError
from .multiscale import MultiscaleRun, SlowFastSystem, simulate_ensemble
from .rng import RngStream

log = logging.getLogger(__name__)

MAX_RELATIVE_STDERR = 0.2


def _cos_first(x):
    return np.cos(x[..., 0])


@dataclass
class RateExperiment:
    """Frame of a rate experiment: system, epsilon grid and Monte Carlo budget.

    ``h_factor`` fixes the step rule ``h = eps / h_factor``.  ``bbar``
    overrides the system's averaged drift (e.g. with a tabulated one).
    """

    system: SlowFastSystem
    eps_list: np.ndarray
    p: float = 1.0
    T: float = 1.0
    phi: Callable = _cos_first
    n_paths: int = 10_000
    h_factor: float = 50.0
    x0: object = 0.0
    y0: object = 0.0
    bbar: Optional[Callable] = None

    def __post_init__(self):
        e = np.asarray(self.eps_list, dtype=float)
        if e.ndim != 1 or e.size < 4:
            raise DomainError("eps_list needs at least 4 values")
        if np.any(e <= 0) or np.any(np.diff(e) >= 0):
            raise DomainError("eps_list must be positive and strictly decreasing")
        if self.h_factor < 20:
            raise DomainError("h_factor below the stability rule (20)")
        self.eps_list = e

    def grid_for(self, eps: float) -> TimeGrid:
        return TimeGrid.from_step(self.T, eps / self.h_factor)


@dataclass
class RateCurve:
    """Error estimates per epsilon; ``values`` keeps per-path data for bootstrapping."""

    kind: str
    eps: np.ndarray
    error: np.ndarray
    stderr: np.ndarray
    n_paths: np.ndarray
    h: np.ndarray
    excluded: np.ndarray
    values: Optional[list] = field(default=None, repr=False)

    def rows(self):
        return list(zip(self.eps, self.error, self.stderr))

    def to_csv(self, target=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "error", "stderr", "n_paths", "h"])
        for e, err, se, n, h in zip(self.eps, self.error, self.stderr, self.n_paths, self.h):
            w.writerow([format_float(e), format_float(err), format_float(se), int(n), format_float(h)])
        text = buf.getvalue()
        if target is None:
            return text
        with open(target, "w", newline="") as fh:
            fh.write(text)

    @classmethod
    def from_csv(cls, source, kind="strong"):
        rows = list(csv.DictReader(io.StringIO(source) if "\n" in source else open(source)))
        col = lambda k, t=float: np.array([t(r[k]) for r in rows])
        return cls(kind, col("eps"), col("error"), col("stderr"), col("n_paths", int), col("h"),
                   np.zeros(len(rows), dtype=bool))

    def error_of(self, values):
        m = values.mean()
        return m if self.kind == "strong" else abs(m)


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    ci_low: float
    ci_high: float
    excluded_points: list = field(default_factory=list)

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r_squared,
            "ci": [self.ci_low, self.ci_high],
            "excluded_points": list(self.excluded_points),
        }

    def to_json(self, target=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if target is None:
            return text
        with open(target, "w") as fh:
            fh.write(text + "\n")


def _comparison_stride(grid: TimeGrid, n_compare: int) -> int:
    if grid.n_steps % n_compare == 0:
        return grid.n_steps // n_compare
    log.warning("grid with %d steps is not a refinement of the %d-node comparison grid; "
                "comparing at every node", grid.n_steps, n_compare)
    return 1


def strong_error_curve(exp: RateExperiment, rng: RngStream, workers: int = 1, keep_values: bool = True) -> RateCurve:
    """``E[sup_t |X^eps_t - Xbar_t|^p]`` per epsilon under synchronous coupling.

    ``X^eps`` and ``Xbar`` share their slow increments on each per-epsilon
    grid; the maximum is taken over the nodes of the coarsest grid, which every
    finer grid refines.
    """
    if not 1.0 <= exp.p < exp.system.alpha:
        raise DomainError(f"p must lie in [1, alpha), got {exp.p}")
    n_compare = exp.grid_for(exp.eps_list[0]).n_steps
    out = {k: [] for k in ("error", "stderr", "n", "h", "excl", "vals")}
    for k, eps in enumerate(exp.eps_list):
        grid = exp.grid_for(eps)
        run = MultiscaleRun(exp.system, eps, grid, exp.x0, exp.y0)
        res = simulate_ensemble(
            run, exp.n_paths, rng.child(k), with_bar=True, bbar=exp.bbar,
            cmp_stride=_comparison_stride(grid, n_compare), workers=workers,
        )
        vals = res.sup_diff**exp.p
        err = float(vals.mean())
        se = float(vals.std(ddof=1) / np.sqrt(vals.size))
        excl = se > MAX_RELATIVE_STDERR * err
        if excl:
            log.warning("eps=%g: stderr %.3g exceeds %d%% of error %.3g; point excluded from fits",
                        eps, se, int(100 * MAX_RELATIVE_STDERR), err)
        for key, v in zip(out, (err, se, exp.n_paths, grid.h, excl, vals)):
            out[key].append(v)
    return RateCurve("strong", exp.eps_list.copy(), np.array(out["error"]), np.array(out["stderr"]),
                     np.array(out["n"]), np.array(out["h"]), np.array(out["excl"]),
                     out["vals"] if keep_values else None)


def weak_error_curve(exp: RateExperiment, t_eval: float, rng: RngStream, workers: int = 1, keep_values: bool = True) -> RateCurve:
    """``|E phi(X^eps_t) - E phi(Xbar_t)|`` per epsilon from paired differences.

    Sharing the slow noise leaves the difference of expectations unchanged and
    shrinks its variance.  Points with error below three standard errors are
    flagged as excluded.
    """
    if not 0 < t_eval <= exp.T:
        raise DomainError("t_eval must lie in (0, T]")
    out = {k: [] for k in ("error", "stderr", "n", "h", "excl", "vals")}
    for k, eps in enumerate(exp.eps_list):
        grid = TimeGrid.from_step(t_eval, eps / exp.h_factor)
        run = MultiscaleRun(exp.system, eps, grid, exp.x0, exp.y0)
        res = simulate_ensemble(run, exp.n_paths, rng.child(k), record_times=[t_eval], with_bar=True,
                                bbar=exp.bbar, workers=workers)
        diff = np.asarray(exp.phi(res.x[0]), dtype=float) - np.asarray(exp.phi(res.xbar[0]), dtype=float)
        err = float(abs(diff.mean()))
        se = float(diff.std(ddof=1) / np.sqrt(diff.size))
        excl = err <= 3.0 * se
        if excl:
            log.warning("eps=%g: error %.3g below 3 stderr (%.3g); point excluded from fits", eps, err, se)
        for key, v in zip(out, (err, se, exp.n_paths, grid.h, excl, diff)):
            out[key].append(v)
    return RateCurve("weak", exp.eps_list.copy(), np.array(out["error"]), np.array(out["stderr"]),
                     np.array(out["n"]), np.array(out["h"]), np.array(out["excl"]),
                     out["vals"] if keep_values else None)


def _ols(x, y):
    xm = x.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - y.mean())) / sxx
    intercept = y.mean() - slope * xm
    resid = y - (intercept + slope * x)
    dof = x.size - 2
    se = np.sqrt(np.sum(resid**2) / dof / sxx) if dof > 0 else 0.0
    return slope, intercept, resid, se


def _as_curve(curve):
    if isinstance(curve, RateCurve):
        return curve
    arr = np.asarray(curve, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise DegenerateFit("curve must be rows of (eps, error[, stderr])")
    se = arr[:, 2] if arr.shape[1] > 2 else np.zeros(arr.shape[0])
    n = arr.shape[0]
    return RateCurve("strong", arr[:, 0], arr[:, 1], se, np.zeros(n, int), np.zeros(n), np.zeros(n, bool))


def fit_loglog(curve, n_bootstrap: int = 1000, seed: int = 0, level: float = 0.95, drop_excluded: bool = True) -> RateFit:
    """Least-squares slope of ``ln error`` against ``ln eps`` with a bootstrap CI.

    The interval is the hull of a studentized residual bootstrap over the
    points and, when per-path values are retained, a percentile bootstrap
    over paths within each epsilon.
    """
    c = _as_curve(curve)
    keep = ~c.excluded if drop_excluded else np.ones(c.eps.size, dtype=bool)
    excluded = [float(e) for e in c.eps[~keep]]
    eps, err = c.eps[keep], c.error[keep]
    if eps.size < 4:
        raise DegenerateFit(f"only {eps.size} usable points; at least 4 are required")
    if np.any(err <= 0):
        raise DegenerateFit("errors must be positive for a log-log fit")
    x, y = np.log(eps), np.log(err)
    slope, intercept, resid, se = _ols(x, y)
    sst = np.sum((y - y.mean()) ** 2)
    r2 = float(min(max(1.0 - np.sum(resid**2) / sst, 0.0), 1.0)) if sst > 0 else 1.0

    gen = np.random.default_rng(seed)
    a = (1.0 - level) / 2.0
    lo, hi = slope, slope
    if se > 0:
        lev = 1.0 / x.size + (x - x.mean()) ** 2 / np.sum((x - x.mean()) ** 2)
        mod = resid / np.sqrt(1.0 - lev)
        mod -= mod.mean()
        fitted = intercept + slope * x
        tstats = []
        for _ in range(n_bootstrap):
            ys = fitted + gen.choice(mod, size=mod.size, replace=True)
            s_b, _, _, se_b = _ols(x, ys)
            if se_b > 0:
                tstats.append((s_b - slope) / se_b)
        if tstats:
            q_lo, q_hi = np.quantile(tstats, [a, 1.0 - a])
            lo, hi = slope - q_hi * se, slope - q_lo * se

    if c.values is not None:
        vals = [v for v, k in zip(c.values, keep) if k]
        slopes = []
        for _ in range(n_bootstrap):
            e_b = np.array([c.error_of(v[gen.integers(0, v.size, v.size)]) for v in vals])
            if np.all(e_b > 0):
                slopes.append(_ols(x, np.log(e_b))[0])
        if slopes:
            p_lo, p_hi = np.quantile(slopes, [a, 1.0 - a])
            lo, hi = min(lo, p_lo), max(hi, p_hi)
    return RateFit(float(slope), float(intercept), r2, float(min(lo, slope)), float(max(hi, slope)), excluded)
