"""Exactly solvable example ``b(x, y) = y``, ``f(x, y) = -y``, ``x0 = y0 = 0``.

Here ``X^eps_t - Xbar_t = Z^eps_t = int_0^t Y^eps_s ds`` is symmetric
alpha-stable with scale

    sigma(eps, t) = eps^(1 - 1/alpha) * [int_0^t (1 - exp(-r/eps))^alpha dr]^(1/alpha),

so ``E|Z^eps_t|^p = C_{alpha,p} sigma(eps, t)^p`` with ``C_{alpha,p} = E|S|^p``
for a standard symmetric stable ``S``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._backend import kernels
from .engine import EnsembleStat, Path, TimeGrid, format_float, map_blocks
from .errors import DegenerateFit, DomainError
from .rng import RngStream
from .stable import _sym_standard, check_alpha

# beyond this many fast time units the integrand below is under 1e-26
_TAIL_CUT = 60.0


@dataclass(frozen=True)
class OracleParams:
    alpha: float
    eps: float
    t: float
    p: float = 1.0

    def __post_init__(self):
        check_alpha(self.alpha)
        if not (self.eps > 0 and self.t > 0):
            raise DomainError("eps and t must be positive")
        if not 0 < self.p < self.alpha:
            raise DomainError(f"p must lie in (0, alpha), got {self.p}")


def scale_integral(alpha: float, eps: float, t: float) -> float:
    """``int_0^t (1 - exp(-r/eps))^alpha dr`` to relative tolerance 1e-10.

    Written as ``t - eps * int_0^{t/eps} [1 - (1 - e^-u)^alpha] du``; the
    second integrand decays like ``alpha e^-u`` so the subtraction is benign.
    """
    u_max = t / eps
    def g(u):
        return -np.expm1(alpha * np.log1p(-np.exp(-u))) if u > 0 else 1.0

    upper = min(u_max, _TAIL_CUT)
    if u_max < 1.0:
        # short horizon: integrate the original form directly, no cancellation
        val, _ = integrate.quad(lambda r: (-np.expm1(-r / eps)) ** alpha, 0.0, t, epsabs=0.0, epsrel=1e-12, limit=200)
        return float(val)
    comp, _ = integrate.quad(g, 0.0, upper, epsabs=0.0, epsrel=1e-12, limit=200)
    return float(t - eps * comp)


def sigma_scale(params: OracleParams) -> float:
    """Stable scale of ``Z^eps_t`` under the ``exp(-t|h|^alpha)`` convention."""
    a, e = params.alpha, params.eps
    return e ** (1.0 - 1.0 / a) * scale_integral(a, e, params.t) ** (1.0 / a)


def stationary_scale(alpha: float) -> float:
    """Scale ``(1/alpha)^(1/alpha)`` of the stationary law of ``dY = -Y dt + dL``."""
    alpha = check_alpha(alpha)
    return (1.0 / alpha) ** (1.0 / alpha)


def step_noise_scale(alpha: float, ratio: float) -> float:
    """Scale of ``int_0^r e^{-(r-s)} dL_s`` for ``r = h/eps`` fast time units."""
    return (-np.expm1(-alpha * ratio) / alpha) ** (1.0 / alpha)


def sample_stationary_ou(alpha: float, n: int, rng) -> np.ndarray:
    """Exact draws from the stationary law of ``dY = -Y dt + dL``."""
    from .rng import as_generator

    return stationary_scale(alpha) * _sym_standard(check_alpha(alpha), as_generator(rng), int(n))


def exact_ou_path(alpha: float, eps: float, grid: TimeGrid, rng: RngStream) -> Path:
    """``Y^eps`` on ``grid`` from the exact recursion ``Y' = e^{-h/eps} Y + xi``, ``Y_0 = 0``."""
    alpha = check_alpha(alpha)
    if not eps > 0:
        raise DomainError("eps must be positive")
    r = grid.h / eps
    xi = step_noise_scale(alpha, r) * _sym_standard(alpha, rng.generator(), grid.n_steps)
    decay = np.exp(-r)
    y = np.empty(grid.n_steps + 1)
    y[0] = 0.0
    for k in range(grid.n_steps):
        y[k + 1] = decay * y[k] + xi[k]
    return Path(grid, y)


def exact_ou_ensemble(alpha: float, eps: float, grid: TimeGrid, n_paths: int, rng: RngStream,
                      workers: int = 1, block: int = 1024, backend=None):
    """``(Z, Y_T)`` for ``n_paths`` exact OU paths; ``Z`` is the trapezoid of ``Y`` over the grid.

    Path ``i`` draws its increments from ``rng.child(i)``.
    """
    alpha = check_alpha(alpha)
    backend = kernels if backend is None else backend
    r = grid.h / eps
    scale = step_noise_scale(alpha, r)
    decay = float(np.exp(-r))
    n = grid.n_steps

    def do_block(start, stop):
        noise = np.empty((n, stop - start))
        for j, i in enumerate(range(start, stop)):
            noise[:, j] = scale * _sym_standard(alpha, rng.child(i).generator(), n)
        return backend.ou_exact_block(noise, 0.0, decay, grid.h)

    parts = map_blocks(do_block, n_paths, block, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def direct_moment(alpha: float, p: float, n: int, rng: RngStream) -> EnsembleStat:
    """``E|S|^p`` over standard symmetric stable draws."""
    s = _sym_standard(check_alpha(alpha), rng.generator(), int(n))
    return EnsembleStat.from_values(np.abs(s) ** p, keep=False)


@dataclass
class OracleCheck:
    """Moment ratios ``E|Z^eps_t|^p / sigma^p`` per epsilon plus summary fits."""

    alpha: float
    p: float
    t: float
    eps: np.ndarray
    moment: np.ndarray
    moment_stderr: np.ndarray
    sigma: np.ndarray
    ratio: np.ndarray
    ratio_stderr: np.ndarray
    direct: EnsembleStat
    slope: float
    slope_eps: np.ndarray = field(default=None)

    @property
    def spread(self) -> float:
        """``max ratio / min ratio``."""
        return float(self.ratio.max() / self.ratio.min())

    @property
    def spread_bound(self) -> float:
        """``1 + 5 * (largest relative standard error of a ratio)``."""
        return float(1.0 + 5.0 * np.max(self.ratio_stderr / self.ratio))

    def ratio_vs_direct(self) -> np.ndarray:
        """``|ratio - C_direct| / combined stderr`` per epsilon."""
        comb = np.sqrt(self.ratio_stderr**2 + self.direct.stderr**2)
        return np.abs(self.ratio - self.direct.mean) / comb

    def to_csv(self, target=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "ratio", "stderr"])
        for e, r, s in zip(self.eps, self.ratio, self.ratio_stderr):
            w.writerow([format_float(e), format_float(r), format_float(s)])
        text = buf.getvalue()
        if target is None:
            return text
        with open(target, "w", newline="") as fh:
            fh.write(text)

    def summary(self) -> dict:
        return {
            "alpha": self.alpha,
            "p": self.p,
            "t": self.t,
            "slope": self.slope,
            "expected_slope": self.p * (1.0 - 1.0 / self.alpha),
            "slope_eps": [float(e) for e in self.slope_eps],
            "ratio_spread": self.spread,
            "ratio_spread_bound": self.spread_bound,
            "direct_moment": self.direct.mean,
            "direct_moment_stderr": self.direct.stderr,
        }

    def to_json(self, target=None):
        text = json.dumps(self.summary(), indent=2, sort_keys=True)
        if target is None:
            return text
        with open(target, "w") as fh:
            fh.write(text + "\n")


def oracle_moment_check(alpha: float, p: float, t: float, eps_list, n: int, rng: RngStream, *,
                        steps_per_eps: int = 20, n_direct: int = None, workers: int = 1) -> OracleCheck:
    """Estimate ``E|Z^eps_t|^p`` from exact OU paths and compare with ``sigma^p``.

    ``steps_per_eps`` sets ``h = eps / steps_per_eps`` (at least 20).  The
    slope of ``log E|Z|^p`` against ``log eps`` uses the points with
    ``eps <= t/8``.  Streams: ``rng.child(k)`` for the k-th epsilon and
    ``rng.child(len(eps_list))`` for the direct moment.
    """
    OracleParams(alpha, 1.0, t, p)
    if not 1.0 <= p < alpha:
        raise DomainError(f"p must lie in [1, alpha), got {p}")
    if steps_per_eps < 20:
        raise DomainError("steps_per_eps must be at least 20")
    eps = np.asarray(eps_list, dtype=float)
    mom, mse, sig = [], [], []
    for k, e in enumerate(eps):
        grid = TimeGrid.from_step(t, e / steps_per_eps)
        z, _ = exact_ou_ensemble(alpha, e, grid, n, rng.child(k), workers=workers)
        st = EnsembleStat.from_values(np.abs(z) ** p, keep=False)
        mom.append(st.mean)
        mse.append(st.stderr)
        sig.append(sigma_scale(OracleParams(alpha, e, t, p)))
    mom, mse, sig = np.array(mom), np.array(mse), np.array(sig)
    direct = direct_moment(alpha, p, n if n_direct is None else n_direct, rng.child(len(eps)))
    sel = eps <= t / 8.0 * (1 + 1e-12)
    if sel.sum() < 2:
        raise DegenerateFit("need at least two epsilons with eps <= t/8 for the slope")
    slope = float(np.polyfit(np.log(eps[sel]), np.log(mom[sel]), 1)[0])
    return OracleCheck(alpha, p, t, eps, mom, mse, sig, mom / sig**p, mse / sig**p, direct, slope, eps[sel])
