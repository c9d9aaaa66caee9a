"""Built-in one-dimensional slow-fast test problems.

Each problem has dissipativity constant 1 and an analytic averaged drift.

========== ======================= ====================== ==========================
name       slow drift b(x, y)      fast drift f(x, y)     averaged drift
========== ======================= ====================== ==========================
linear     -x + y                  x - y                  0
example    y                       -y                     0
bounded    sin x + sin y           -y                     sin x
saturating y                       -y - y^3 / (1 + y^2)   0
decoupled  -x                      -y                     -x
xcoupled   sin(x + y)              sin x - y              e^{-1/alpha} sin(x + sin x)
========== ======================= ====================== ==========================

The codes match the compiled kernels.
"""

import numpy as np

from ._fallback import BOUNDED, DECOUPLED, EXAMPLE, LINEAR, SATURATING, XCOUPLED
from .engine import DriftField
from .errors import DomainError

CODES = {
    "linear": LINEAR,
    "example": EXAMPLE,
    "bounded": BOUNDED,
    "saturating": SATURATING,
    "decoupled": DECOUPLED,
    "xcoupled": XCOUPLED,
}


def _slow(name, fn, lip):
    return DriftField(fn, (1, 1), 1, lipschitz=lip, name=name)


def _fast(name, fn, lip):
    return DriftField(fn, (1, 1), 1, lipschitz=lip, name=name)


def _avg(name, fn, lip):
    return DriftField(fn, (1,), 1, lipschitz=lip, name=name)


def coefficients(name: str, alpha: float):
    """``(b, f, bbar)`` drift fields of a named problem."""
    if name == "linear":
        return (
            _slow("-x+y", lambda x, y: -x + y, np.sqrt(2.0)),
            _fast("x-y", lambda x, y: x - y, np.sqrt(2.0)),
            _avg("0", lambda x: np.zeros_like(x), 0.0),
        )
    if name == "example":
        return (
            _slow("y", lambda x, y: y + 0.0 * x, 1.0),
            _fast("-y", lambda x, y: -y + 0.0 * x, 1.0),
            _avg("0", lambda x: np.zeros_like(x), 0.0),
        )
    if name == "bounded":
        return (
            _slow("sin x + sin y", lambda x, y: np.sin(x) + np.sin(y), np.sqrt(2.0)),
            _fast("-y", lambda x, y: -y + 0.0 * x, 1.0),
            _avg("sin x", np.sin, 1.0),
        )
    if name == "saturating":
        return (
            _slow("y", lambda x, y: y + 0.0 * x, 1.0),
            _fast("-y-y^3/(1+y^2)", lambda x, y: -y - y * y * y / (1.0 + y * y) + 0.0 * x, 2.125),
            _avg("0", lambda x: np.zeros_like(x), 0.0),
        )
    if name == "decoupled":
        return (
            _slow("-x", lambda x, y: -x + 0.0 * y, 1.0),
            _fast("-y", lambda x, y: -y + 0.0 * x, 1.0),
            _avg("-x", lambda x: -x, 1.0),
        )
    if name == "xcoupled":
        c = np.exp(-1.0 / alpha)
        return (
            _slow("sin(x+y)", lambda x, y: np.sin(x + y), np.sqrt(2.0)),
            _fast("sin x - y", lambda x, y: np.sin(x) - y, np.sqrt(2.0)),
            _avg("e^{-1/a} sin(x+sin x)", lambda x: c * np.sin(x + np.sin(x)), 2.0 * c),
        )
    raise DomainError(f"unknown test problem {name!r}; choose from {sorted(CODES)}")


def kernel_params(name: str, alpha: float) -> tuple:
    if name == "xcoupled":
        return (float(np.exp(-1.0 / alpha)),)
    return ()


def get_problem(name: str, alpha: float):
    """:class:`~levyavg.multiscale.SlowFastSystem` for a named problem."""
    from .multiscale import SlowFastSystem

    b, f, bbar = coefficients(name, alpha)
    return SlowFastSystem(
        b=b,
        f=f,
        beta=1.0,
        alpha=alpha,
        bbar=bbar,
        kernel_code=CODES[name],
        kernel_params=kernel_params(name, alpha),
        name=name,
        gamma=0.75,
        delta=0.5,
    )
