import numpy as np
import pytest
from hypothesis import settings

from ntype_phd.phd import FilterConfig

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

FOOTBALL_BOX = np.array([[0.0, 720.0], [0.0, 576.0], [5.0, 100.0], [5.0, 100.0]])


def make_cfg(p_D, sigma_v=5.0, sigma_r=6.0, lambda_c=10.0, **kw):
    p_D = np.atleast_2d(np.asarray(p_D, dtype=float))
    return FilterConfig.constant_velocity(
        len(p_D), sigma_v=sigma_v, sigma_r=sigma_r, p_D=p_D, p_S=0.99, lambda_c=lambda_c, clutter_box=FOOTBALL_BOX, **kw
    )


@pytest.fixture
def cfg1():
    return make_cfg([[0.93]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
