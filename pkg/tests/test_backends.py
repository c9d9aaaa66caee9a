"""The compiled kernels and the numpy fallback compute the same thing."""

import os

import numpy as np
import pytest

from levyavg import _fallback, backend_name
from levyavg.problems import CODES, kernel_params

kernels = pytest.importorskip("levyavg._kernels")

RTOL = 1e-12


def _uw(n, seed=0):
    g = np.random.default_rng(seed)
    return g.random(n) + 2.0**-54, g.standard_exponential(n)


@pytest.mark.skipif(os.environ.get("LEVYAVG_PURE_PYTHON", "") not in ("", "0"), reason="fallback forced")
def test_compiled_backend_selected():
    assert backend_name == "cython"


@pytest.mark.parametrize("alpha", [1.05, 1.5, 1.95])
def test_cms_agrees(alpha):
    u, w = _uw(100_000)
    a = kernels.cms_symmetric(alpha, u, w)
    b = _fallback.cms_symmetric(alpha, u, w)
    assert np.allclose(a, b, rtol=RTOL, atol=0)


@pytest.mark.parametrize("a", [0.55, 0.75, 0.95])
def test_kanter_agrees(a):
    u, w = _uw(100_000, 1)
    assert np.allclose(kernels.kanter_positive(a, u, w), _fallback.kanter_positive(a, u, w), rtol=RTOL, atol=0)


@pytest.mark.parametrize("name", sorted(CODES))
@pytest.mark.parametrize("with_bar", [True, False])
def test_coupled_block_agrees(name, with_bar):
    g = np.random.default_rng(2)
    n, B = 400, 16
    dl1 = 0.01 * g.standard_cauchy((n, B))
    dl2 = 0.01 * g.standard_cauchy((n, B))
    x0, y0 = g.normal(size=B), g.normal(size=B)
    rec = np.array([0, 100, 400], dtype=np.int64)
    params = np.asarray(kernel_params(name, 1.5), dtype=float)
    args = (CODES[name], params, x0, y0, dl1, dl2, 1e-3, 0.02, 3.0, 4, rec, with_bar)
    got = kernels.coupled_block(*args)
    ref = _fallback.coupled_block(*args)
    for a, b in zip(got[:4], ref[:4]):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12)
    assert np.array_equal(got[4], ref[4])


def test_coupled_block_flags_nonfinite_path():
    n, B = 10, 4
    dl1 = np.zeros((n, B))
    dl2 = np.zeros((n, B))
    dl1[3, 2] = np.inf
    rec = np.array([n], dtype=np.int64)
    for impl in (kernels, _fallback):
        bad = impl.coupled_block(CODES["linear"], np.zeros(0), np.zeros(B), np.zeros(B), dl1, dl2, 1e-3, 0.02, 1.0, 1,
                                 rec, True)[4]
        assert bad[2] == 1 and bad.sum() == 1


def test_ou_exact_block_agrees():
    g = np.random.default_rng(3)
    noise = g.standard_normal((500, 64))
    a = kernels.ou_exact_block(noise, 0.5, 0.97, 0.01)
    b = _fallback.ou_exact_block(noise, 0.5, 0.97, 0.01)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=RTOL, atol=1e-15)


def test_pure_python_switch(tmp_path):
    import subprocess
    import sys

    code = "import levyavg; print(levyavg.backend_name)"
    env = {"LEVYAVG_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
