import numpy as np
import pytest

from hsicagg import Sample

ACCEPTANCE_RESULTS = []


def record_criterion(number, name, passed, detail):
    ACCEPTANCE_RESULTS.append((number, name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:>2} {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sample(rng, n, p=1, q=1):
    return Sample(rng.standard_normal((n, p)), rng.standard_normal((n, q)))
