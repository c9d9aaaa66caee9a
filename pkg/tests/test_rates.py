import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyavg import DegenerateFit, DomainError, RateCurve, RateExperiment, RngStream, fit_loglog, get_problem
from levyavg.rates import strong_error_curve, weak_error_curve

ALPHA = 1.5
EPS6 = 2.0 ** -np.arange(3, 9)


def _synthetic(seed, slope=1 / 3, n=2000, const=2.0):
    g = np.random.default_rng(seed)
    vals = [g.exponential(const * e**slope, n) for e in EPS6]
    err = np.array([v.mean() for v in vals])
    se = np.array([v.std(ddof=1) / np.sqrt(n) for v in vals])
    return RateCurve("strong", EPS6, err, se, np.full(6, n), EPS6 / 50, np.zeros(6, bool), vals)


@given(st.floats(-2.0, 2.0), st.floats(0.01, 100.0))
@settings(max_examples=50, deadline=None)
def test_exact_power_law_recovered(slope, const):
    rows = np.column_stack([EPS6, const * EPS6**slope])
    fit = fit_loglog(rows, n_bootstrap=50)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert np.log(const) == pytest.approx(fit.intercept, abs=1e-8)
    if abs(slope) > 1e-6:  # constant data make R^2 meaningless
        assert fit.r_squared == pytest.approx(1.0)
    assert fit.ci_low <= fit.slope <= fit.ci_high


def test_ci_coverage_on_synthetic_curves():
    # nominal 95%; the hull of two bootstraps is designed to over-cover slightly
    hits = 0
    reps = 100
    for r in range(reps):
        fit = fit_loglog(_synthetic(r), n_bootstrap=200, seed=r)
        hits += fit.ci_low <= 1 / 3 <= fit.ci_high
    assert hits / reps >= 0.9


def test_ci_shrinks_with_paths():
    wide = fit_loglog(_synthetic(0, n=500), seed=0)
    narrow = fit_loglog(_synthetic(0, n=20_000), seed=0)
    assert narrow.ci_high - narrow.ci_low < wide.ci_high - wide.ci_low


def test_fit_is_deterministic_in_seed():
    c = _synthetic(1)
    assert fit_loglog(c, seed=3).to_dict() == fit_loglog(c, seed=3).to_dict()


def test_degenerate_fits():
    with pytest.raises(DegenerateFit):
        fit_loglog(np.column_stack([EPS6[:3], EPS6[:3]]))
    rows = np.column_stack([EPS6, EPS6])
    rows[2, 1] = 0.0
    with pytest.raises(DegenerateFit):
        fit_loglog(rows)
    with pytest.raises(DegenerateFit):
        fit_loglog(np.ones(5))


def test_excluded_points_dropped_and_reported():
    c = _synthetic(2)
    c.excluded[:3] = True
    with pytest.raises(DegenerateFit):
        fit_loglog(c)
    c.excluded[:] = False
    c.excluded[0] = True
    fit = fit_loglog(c, n_bootstrap=50)
    assert fit.excluded_points == [EPS6[0]]
    assert set(json.loads(fit.to_json())) == {"slope", "intercept", "r2", "ci", "excluded_points"}
    assert fit_loglog(c, n_bootstrap=50, drop_excluded=False).excluded_points == []


def test_curve_csv_round_trip():
    c = _synthetic(3)
    back = RateCurve.from_csv(c.to_csv())
    assert np.array_equal(back.eps, c.eps) and np.array_equal(back.error, c.error)
    assert np.array_equal(back.stderr, c.stderr) and np.array_equal(back.n_paths, c.n_paths)
    assert c.to_csv().splitlines()[0] == "eps,error,stderr,n_paths,h"


def test_experiment_validation():
    sysm = get_problem("linear", ALPHA)
    with pytest.raises(DomainError):
        RateExperiment(sysm, [0.1, 0.05, 0.025])
    with pytest.raises(DomainError):
        RateExperiment(sysm, [0.1, 0.2, 0.05, 0.025])
    with pytest.raises(DomainError):
        RateExperiment(sysm, EPS6, h_factor=10)


def test_strong_curve_zero_for_decoupled_problem():
    exp = RateExperiment(get_problem("decoupled", ALPHA), EPS6[:4], n_paths=20)
    curve = strong_error_curve(exp, RngStream(0))
    assert np.all(curve.error == 0.0)


def test_strong_curve_decreases_and_is_reproducible():
    exp = RateExperiment(get_problem("linear", ALPHA), 2.0 ** -np.arange(2, 6), n_paths=400)
    a = strong_error_curve(exp, RngStream(1))
    b = strong_error_curve(exp, RngStream(1), workers=2)
    assert np.array_equal(a.error, b.error)
    assert a.error[0] > a.error[-1]
    assert np.all(a.h <= a.eps / 50 * (1 + 1e-12))
    with pytest.raises(DomainError):
        strong_error_curve(RateExperiment(exp.system, exp.eps_list, p=1.6, n_paths=4), RngStream(1))


def test_weak_curve_flags_noisy_points():
    exp = RateExperiment(get_problem("bounded", ALPHA), 2.0 ** -np.arange(2, 6), n_paths=200,
                         x0=np.pi / 2, y0=-2.0)
    curve = weak_error_curve(exp, 1.0, RngStream(2))
    assert np.array_equal(curve.excluded, curve.error <= 3 * curve.stderr)
    with pytest.raises(DomainError):
        weak_error_curve(exp, 2.0, RngStream(2))
