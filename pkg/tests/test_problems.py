import numpy as np
import pytest

from levyavg import DomainError, RngStream, get_problem
from levyavg.averaging import ergodic_average_bbar
from levyavg.multiscale import check_dissipativity
from levyavg.problems import CODES

ALPHA = 1.5


@pytest.mark.parametrize("name", sorted(CODES))
def test_problem_is_dissipative_with_metadata(name):
    p = get_problem(name, ALPHA)
    check_dissipativity(p.f, 1, 1, p.beta, n=5000, seed=1)
    assert p.beta == 1.0 and (p.gamma, p.delta) == (0.75, 0.5)
    assert p.name == name


@pytest.mark.parametrize("name,x", [("linear", 0.7), ("bounded", 1.1), ("saturating", -0.4), ("decoupled", 2.0),
                                    ("xcoupled", -0.8)])
def test_analytic_averaged_drift(name, x):
    p = get_problem(name, ALPHA)
    st = ergodic_average_bbar(p.frozen(x), p.b, 50.0, RngStream(0, len(name)), n_reps=24)
    assert abs(st.mean - float(p.bbar(np.array([x]))[0])) <= 4 * st.stderr + 1e-2


def test_unknown_problem():
    with pytest.raises(DomainError):
        get_problem("nope", ALPHA)
