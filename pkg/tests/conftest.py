import warnings

import numpy as np
import pytest

from wavegate.errors import MaxLevelWarning

ACCEPTANCE_RESULTS = []


def record(criterion: str, passed, detail: str = "") -> None:
    """``passed`` is True, False, or None for a criterion that was skipped."""
    ACCEPTANCE_RESULTS.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_RESULTS:
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"{criterion}: {status}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_max_level():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxLevelWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
