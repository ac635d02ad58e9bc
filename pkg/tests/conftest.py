import pytest

from shipfreq import kernels
from shipfreq.model import ModelParams

REFERENCE = dict(c=1.0, q=100.0, f=10.0, delta=0.3, r=0.12, r1=0.05)


@pytest.fixture
def reference():
    return ModelParams(**REFERENCE)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
