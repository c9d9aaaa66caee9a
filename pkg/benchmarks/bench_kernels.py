"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time of each kernel on both backends and the speed-up.
"""

import argparse
import timeit

import numpy as np

from levyavg import _fallback
from levyavg.problems import CODES

try:
    from levyavg import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def cases():
    g = np.random.default_rng(0)
    u = g.random(1_000_000) + 2.0**-54
    w = g.standard_exponential(1_000_000)
    n, B = 5000, 256
    dl1 = 1e-3 * g.standard_cauchy((n, B))
    dl2 = 1e-3 * g.standard_cauchy((n, B))
    x0, y0 = np.zeros(B), np.zeros(B)
    rec = np.array([n], dtype=np.int64)
    noise = g.standard_normal((n, B))
    yield "cms 1e6 draws", lambda k: k.cms_symmetric(1.5, u, w)
    yield "kanter 1e6 draws", lambda k: k.kanter_positive(0.75, u, w)
    for name in ("linear", "xcoupled"):
        params = np.array([np.exp(-1 / 1.5)]) if name == "xcoupled" else np.zeros(0)
        yield (f"coupled {name} 5000x256",
               lambda k, c=CODES[name], p=params: k.coupled_block(c, p, x0, y0, dl1, dl2, 1e-3, 0.02, 3.0, 1, rec, True))
    yield "exact OU 5000x256", lambda k: k.ou_exact_block(noise, 0.0, 0.98, 1e-3)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not built; run `python3 setup.py build_ext --inplace`")
        return
    print(f"{'kernel':28s} {'cython [s]':>11s} {'numpy [s]':>11s} {'speed-up':>9s}")
    for label, fn in cases():
        tc = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        print(f"{label:28s} {tc:11.4f} {tp:11.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
