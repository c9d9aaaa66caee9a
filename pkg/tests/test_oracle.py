import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyavg import DegenerateFit, DomainError, OracleParams, RngStream, TimeGrid, exact_ou_path, sigma_scale
from levyavg.oracle import (
    direct_moment,
    exact_ou_ensemble,
    oracle_moment_check,
    sample_stationary_ou,
    scale_integral,
    stationary_scale,
    step_noise_scale,
)
from levyavg.stable import ks_critical, ks_statistic

# 30-digit mpmath quadrature of int_0^t (1 - e^{-r/eps})^alpha dr
SCALE_CASES = [
    (1.5, 0.1, 1.0, 0.87196957939613994, 0.42364383348421528),
    (1.5, 0.01, 1.0, 0.98719627694453224, 0.21360053651880462),
    (1.2, 0.25, 2.0, 1.719723361689573, 1.2470163871439391),
    (1.8, 2.0, 1.0, 0.074705882995000033, 0.32201574791039448),
]
MOMENT_1_5_P1 = 1.705465240152388


@pytest.mark.parametrize("alpha,eps,t,integral,sigma", SCALE_CASES)
def test_scale_against_independent_quadrature(alpha, eps, t, integral, sigma):
    assert scale_integral(alpha, eps, t) == pytest.approx(integral, rel=1e-10)
    assert sigma_scale(OracleParams(alpha, eps, t)) == pytest.approx(sigma, rel=1e-10)


@given(st.floats(1.05, 1.95), st.floats(1e-4, 10.0), st.floats(0.05, 5.0))
@settings(max_examples=60, deadline=None)
def test_scale_integral_bounds_and_limits(alpha, eps, t):
    v = scale_integral(alpha, eps, t)
    # 0 < integrand < 1 and the integrand is increasing in r
    assert 0 < v < t
    if t / eps > 60:
        # the gap to t tends to eps * int_0^inf [1 - (1 - e^-u)^alpha] du, which lies in (0, alpha]
        assert 0 < (t - v) / eps <= alpha + 1e-9


@given(st.floats(1.05, 1.95), st.floats(0.05, 3.0))
@settings(max_examples=40, deadline=None)
def test_sigma_small_eps_asymptote(alpha, t):
    eps = 1e-6
    s = sigma_scale(OracleParams(alpha, eps, t))
    assert s == pytest.approx(eps ** (1 - 1 / alpha) * t ** (1 / alpha), rel=1e-4)


def test_sigma_monotone_in_eps():
    s = [sigma_scale(OracleParams(1.5, e, 1.0)) for e in 2.0 ** -np.arange(2, 10)]
    assert np.all(np.diff(s) < 0)


def test_params_domain():
    with pytest.raises(DomainError):
        OracleParams(1.5, 0.1, 1.0, p=1.5)
    with pytest.raises(DomainError):
        OracleParams(1.5, 0.0, 1.0)


def test_step_noise_scale_limits():
    assert step_noise_scale(1.5, 50.0) == pytest.approx(stationary_scale(1.5), rel=1e-15)
    # small r: scale ~ r^(1/alpha)
    assert step_noise_scale(1.5, 1e-8) == pytest.approx(1e-8 ** (1 / 1.5), rel=1e-6)


def test_exact_recursion_is_stationary_from_stationary_start():
    # one exact step from the stationary law stays stationary
    alpha = 1.5
    y0 = sample_stationary_ou(alpha, 20_000, RngStream(0))
    r = 0.3
    xi = step_noise_scale(alpha, r) * sample_stationary_ou(alpha, 20_000, RngStream(1)) / stationary_scale(alpha)
    y1 = np.exp(-r) * y0 + xi
    ref = sample_stationary_ou(alpha, 20_000, RngStream(2))
    assert ks_statistic(y1, ref) < ks_critical(20_000, 20_000, 0.001)


def test_exact_path_and_ensemble_agree():
    g = TimeGrid(1.0, 40)
    p = exact_ou_path(1.5, 0.05, g, RngStream(3).child(0))
    z, yT = exact_ou_ensemble(1.5, 0.05, g, 1, RngStream(3))
    assert yT[0] == pytest.approx(p.states[-1, 0], rel=1e-12)
    trap = g.h * (p.states[:, 0].sum() - 0.5 * (p.states[0, 0] + p.states[-1, 0]))
    assert z[0] == pytest.approx(trap, rel=1e-10)


def test_ensemble_worker_independent():
    g = TimeGrid(1.0, 20)
    a = exact_ou_ensemble(1.5, 0.1, g, 300, RngStream(4), workers=1, block=64)
    b = exact_ou_ensemble(1.5, 0.1, g, 300, RngStream(4), workers=3, block=64)
    assert np.array_equal(a[0], b[0])


def test_direct_moment_matches_closed_form():
    st_ = direct_moment(1.5, 1.0, 400_000, RngStream(5))
    assert abs(st_.mean - MOMENT_1_5_P1) <= 4 * st_.stderr


def test_moment_check_ratio_is_constant():
    eps = 2.0 ** -np.arange(2, 6)
    chk = oracle_moment_check(1.5, 1.0, 1.0, eps, 20_000, RngStream(6))
    assert chk.spread <= chk.spread_bound
    assert np.all(chk.ratio_vs_direct() <= 4.0)
    assert list(chk.slope_eps) == list(eps[1:])
    assert chk.to_csv().splitlines()[0] == "eps,ratio,stderr"
    assert chk.summary()["expected_slope"] == pytest.approx(1 / 3)


def test_moment_check_arguments():
    with pytest.raises(DomainError):
        oracle_moment_check(1.5, 1.0, 1.0, [0.1, 0.05], 10, RngStream(0), steps_per_eps=10)
    with pytest.raises(DomainError):
        oracle_moment_check(1.5, 0.5, 1.0, [0.1, 0.05], 10, RngStream(0))
    with pytest.raises(DegenerateFit):
        oracle_moment_check(1.5, 1.0, 1.0, [0.5, 0.25, 0.125], 10, RngStream(0))
