import numpy as np
import pytest

from nodalbetti.models import SpectralModel


BUILTIN = [
    SpectralModel.bargmann_fock(2),
    SpectralModel.bargmann_fock(3),
    SpectralModel.berry(2),
    SpectralModel.berry(3),
    SpectralModel.band_limited(2, 0.5),
    SpectralModel.band_limited(3, 0.0),
    SpectralModel.kostlan(50, 2),
]


@pytest.fixture(params=BUILTIN, ids=lambda m: m.identifier)
def builtin_model(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS.values():
        terminalreporter.write_line(line)
