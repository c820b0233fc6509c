import sys

import numpy as np
import pytest

from opioid_residence.model import EpidemicParams


@pytest.fixture
def params():
    return EpidemicParams()


def random_params(rng, addiction_free=True):
    """Random valid rates; mu_star drawn above mu."""
    mu = rng.uniform(0, 0.05)
    kw = dict(
        alpha=rng.uniform(0, 1),
        beta=rng.uniform(0, 1),
        xi=0.0 if addiction_free else rng.uniform(0, 1),
        varepsilon=rng.uniform(0.1, 8),
        delta=rng.uniform(0, 1),
        mu=mu,
        mu_star=mu + rng.uniform(0, 0.05),
        gamma=0.0 if addiction_free else rng.uniform(0, 0.1),
        zeta=rng.uniform(0, 2),
        nu=rng.uniform(0, 1),
        sigma=rng.uniform(0, 1),
    )
    return EpidemicParams(**kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
