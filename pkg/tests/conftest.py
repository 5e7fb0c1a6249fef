import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dfecs.geometry import N_KEYPOINTS, RawFrame, build_template
from dfecs.synthetic import face_template

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def face():
    return face_template()


@pytest.fixture
def neutral_frame(face):
    return RawFrame("ref", 0, True, face, np.ones(N_KEYPOINTS, bool))


@pytest.fixture
def template(neutral_frame):
    return build_template(neutral_frame)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one criterion's outcome for the end-of-run summary."""
    results = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(number, ok, detail):
        results[number] = (ok, detail)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
