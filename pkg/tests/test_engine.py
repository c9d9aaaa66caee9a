import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyavg import (
    DomainError,
    DriftField,
    EnsembleStat,
    GridMismatchError,
    NonFiniteError,
    Path,
    RngStream,
    TimeGrid,
    ensemble_mc,
    euler_path,
    sup_norm_error,
)
from levyavg.engine import check_finite, map_blocks, write_paths_csv


@given(st.floats(0.01, 100.0), st.floats(1e-4, 1.0))
@settings(max_examples=100, deadline=None)
def test_grid_from_step_invariants(T, h):
    g = TimeGrid.from_step(T, h)
    assert g.h <= h * (1 + 1e-9)
    assert g.times[-1] == g.T
    assert g.times[0] == 0.0
    assert g.times.size == g.n_steps + 1
    # not finer than needed
    assert g.n_steps == 1 or (g.n_steps - 1) * h < T * (1 + 1e-9)


def test_grid_index_of():
    g = TimeGrid(1.0, 64)
    assert g.index_of(0.5) == 32
    assert g.index_of(1.0) == 64
    with pytest.raises(DomainError):
        g.index_of(0.51)
    with pytest.raises(DomainError):
        g.index_of(2.0)


@pytest.mark.parametrize("T,n", [(0.0, 1), (-1.0, 2), (1.0, 0), (1.0, 2.5)])
def test_grid_domain(T, n):
    with pytest.raises(DomainError):
        TimeGrid(T, n)


def test_euler_linear_drift_closed_form():
    # X_{k+1} = (1 + a h) X_k without noise
    g = TimeGrid(2.0, 40)
    a = -0.7
    p = euler_path(DriftField(lambda x: a * x, (1,), 1), 1.3, g, np.zeros(40))
    assert np.allclose(p.states[:, 0], 1.3 * (1 + a * g.h) ** np.arange(41), rtol=1e-14)


def test_euler_adds_noise_verbatim():
    g = TimeGrid(1.0, 5)
    noise = np.arange(1.0, 6.0)
    p = euler_path(DriftField(lambda x: 0 * x, (1,), 1), 0.0, g, noise)
    assert np.array_equal(p.states[:, 0], np.concatenate([[0.0], np.cumsum(noise)]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_euler_reports_overflow_not_clamps():
    g = TimeGrid(1.0, 3)
    with pytest.raises(NonFiniteError) as err:
        euler_path(DriftField(lambda x: x, (1,), 1), 0.0, g, np.array([1e308, 1e308, 1e308]))
    assert err.value.step is not None


def test_euler_noise_shape_checked():
    with pytest.raises(DomainError):
        euler_path(DriftField(lambda x: x, (1,), 1), [0.0, 0.0], TimeGrid(1.0, 3), np.zeros((3, 1)))


def test_sup_norm_error():
    g = TimeGrid(1.0, 2)
    a = Path(g, [[0.0, 0.0], [3.0, 4.0], [1.0, 0.0]])
    b = Path(g, np.zeros((3, 2)))
    assert sup_norm_error(a, b, 1.0) == 5.0
    assert sup_norm_error(a, b, 1.5) == pytest.approx(5.0**1.5)
    with pytest.raises(GridMismatchError):
        sup_norm_error(a, Path(TimeGrid(1.0, 4), np.zeros((5, 2))), 1.0)
    with pytest.raises(DomainError):
        sup_norm_error(a, b, 0.5)


def test_ensemble_stat():
    st_ = EnsembleStat.from_values([1.0, 2.0, 3.0, 4.0])
    assert st_.mean == 2.5
    assert st_.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    with pytest.raises(DomainError):
        EnsembleStat.from_values([1.0])


def test_ensemble_mc_is_worker_independent():
    f = lambda s: s.generator().standard_normal()
    a = ensemble_mc(f, 50, RngStream(0, 1), workers=1)
    b = ensemble_mc(f, 50, RngStream(0, 1), workers=3)
    assert np.array_equal(a.values, b.values)


def test_ensemble_mc_names_failing_path():
    def f(s):
        return np.inf if s.path == (7,) else 1.0

    with pytest.raises(NonFiniteError) as err:
        ensemble_mc(f, 10, RngStream(0))
    assert err.value.path_index == 7


def test_check_finite_index():
    s = np.zeros((5, 2))
    s[3, 1] = np.nan
    with pytest.raises(NonFiniteError) as err:
        check_finite(s)
    assert err.value.path_index == 3


def test_map_blocks_order():
    out = map_blocks(lambda a, b: list(range(a, b)), 10, 3, workers=4)
    assert sum(out, []) == list(range(10))


def test_csv_round_trip_exact():
    g = TimeGrid(1.0, 3)
    vals = np.array([0.1, 1 / 3, -2e-300, 7.0])
    text = write_paths_csv(g, [("x", vals)])
    rows = [r.split(",") for r in text.strip().split("\n")]
    assert rows[0] == ["t", "x_1"]
    assert np.array_equal(np.array([float(r[1]) for r in rows[1:]]), vals)
