"""Shared fixtures: preset runs are expensive, so they are cached once per
session (see _runs.py). The acceptance module calls the cache directly so
each run's wall time is charged inside the budget of the criterion that
first needs it; these fixtures serve the remaining test modules.
"""

import pytest

from _runs import preset_result


@pytest.fixture(scope="session")
def decay_result():
    return preset_result("decay_exponential")


@pytest.fixture(scope="session")
def blowup_result():
    return preset_result("blowup")


@pytest.fixture(scope="session")
def conservation_result():
    return preset_result("conservation")


@pytest.fixture(scope="session")
def polynomial_result():
    return preset_result("decay_polynomial")
