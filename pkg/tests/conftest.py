import functools

import numpy as np
import pytest

from gendev import kernels, problems


@functools.lru_cache(maxsize=None)
def corpus(name: str):
    return problems.CORPUS[name]()


@pytest.fixture
def rng():
    return np.random.default_rng(20241017)


@pytest.fixture
def sphere():
    return corpus("sphere")


@pytest.fixture
def cylinder():
    return corpus("cylinder")


@pytest.fixture
def flat():
    return corpus("flat")


@pytest.fixture(params=["numpy", "numba"])
def each_backend(request):
    if request.param == "numba" and not kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    before = kernels.backend()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(before)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in name and rep.when == "call":
                number = int(name.split("test_criterion_")[1].split("_")[0])
                rows.append((number, "PASS" if outcome == "passed" else "FAIL"))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, status in sorted(rows):
        detail = ACCEPTANCE.get(number, "")
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}".rstrip())
