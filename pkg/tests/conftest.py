import numpy as np
import pytest

from depthground import DepthMap, SolverConfig
from depthground.evalkit import SceneParams, generate_scene


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ramp_mde():
    """Dense 32x48 prior between 0.5 and 2.0 m with some texture."""
    yy, xx = np.mgrid[0:32, 0:48].astype(float)
    return DepthMap.dense(0.5 + 1.5 * (xx / 47) * (0.6 + 0.4 * yy / 31) + 0.05 * np.sin(yy / 3))


@pytest.fixture(scope="session")
def small_scene():
    # piecewise distortion, holes and corruption on objects
    return generate_scene(3, SceneParams(height=64, width=96))


@pytest.fixture(scope="session")
def small_config():
    return SolverConfig(patch_size=16)


_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def report_criterion():
    """Record one acceptance verdict line; all lines are echoed in the terminal summary."""

    def record(label: str, passed: bool, detail: str) -> bool:
        line = f"{label}: {'PASS' if passed else 'FAIL'} ({detail})"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
