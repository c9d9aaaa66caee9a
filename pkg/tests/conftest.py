import numpy as np
import pytest

from levyavg import RngStream


@pytest.fixture
def stream():
    return RngStream(12345, 7)


def zscore(estimate, target, stderr):
    return abs(estimate - target) / stderr


def cf_stat(x, freq):
    """Mean of ``cos(freq x)`` and its standard error."""
    c = np.cos(freq * np.asarray(x))
    return c.mean(), c.std(ddof=1) / np.sqrt(c.size)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
