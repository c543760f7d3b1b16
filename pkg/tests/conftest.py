import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kkmass.geometry import Chart, MetricField  # noqa: E402


def identity_background(n):
    def g0(X):
        return np.broadcast_to(np.eye(n), (X.shape[0], n, n)).copy()

    def dg0(X):
        return np.zeros((X.shape[0], n, n, n))

    return g0, dg0


def custom_metric(fn, dim_base=3, fiber_periods=(), r_min=0.0, tau=np.inf, d1=None):
    """MetricField from a plain evaluator; identity background, FD derivatives unless ``d1``."""
    chart = Chart(dim_base, len(fiber_periods), tuple(fiber_periods), r_min)
    g0, dg0 = identity_background(chart.dim)
    return MetricField(chart, fn, d1, g0, dg0, tau, "custom", {})


@pytest.fixture
def round_sphere_field():
    """Stereographic sphere of radius 2 times a line, with no background."""
    rho = 2.0

    def g(X):
        c = 4 * rho**4 / (rho**2 + X[:, 0] ** 2 + X[:, 1] ** 2) ** 2
        out = np.zeros((X.shape[0], 3, 3))
        out[:, 0, 0] = c
        out[:, 1, 1] = c
        out[:, 2, 2] = 1.0
        return out

    return MetricField(Chart(3), g, name="round_sphere"), rho


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and getattr(mod, "LINES", None):
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
