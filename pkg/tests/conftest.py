import math

import numpy as np
import pytest

from transmittance import Constant, GaussianMix, Interval, LinearRamp, SineSum, exact_optical_depth

UNIT = Interval(0.0, 1.0)


def scaled_to(prof, tau, interval=UNIT):
    return prof.scaled(tau / exact_optical_depth(prof, interval))


def test_fields(tau):
    """The four closed-form profiles used by the unbiasedness suite, at optical depth ``tau``."""
    return {
        "constant": Constant(tau),
        "ramp": scaled_to(LinearRamp(0.2, 2.0), tau),
        "sine": scaled_to(SineSum(((0.6, 7.0, 0.3), (0.3, 19.0, 1.1)), 1.0), tau),
        "gauss": scaled_to(GaussianMix(((1.5, 0.4, 0.1), (0.7, 0.8, 0.05)), 0.3), tau),
    }


test_fields.__test__ = False


def within_se(values, target, k=4.0):
    values = np.asarray(values)
    se = values.std(ddof=1) / math.sqrt(len(values))
    return abs(values.mean() - target) <= k * se + 1e-15, values.mean(), se


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
