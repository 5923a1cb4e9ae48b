import numpy as np
import pytest
from hypothesis import settings

from abvortex.geometry import VortexPair

settings.register_profile("abvortex", deadline=None, derandomize=True, max_examples=20)
settings.load_profile("abvortex")


@pytest.fixture(scope="session")
def figure_pair():
    """Configuration of the published surface plots."""
    return VortexPair(1.0 / 3.0, 2.0 / 3.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def acceptance_report(request):
    """Record one ``PASS``/``FAIL`` line per acceptance criterion."""
    def record(number, title, checks):
        failed = [c for c in checks if not c[3]]
        status = "FAIL" if failed else "PASS"
        detail = "; ".join(f"{name} {value:.2e} (tol {tol:.0e})" for name, value, tol, _ in failed)
        line = f"{status} criterion {number}: {title}" + (f" [{detail}]" if detail else "")
        print(line)
        request.config.stash[ACCEPTANCE_LINES].append(line)
        return failed
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = sorted(config.stash[ACCEPTANCE_LINES], key=lambda l: int(l.split()[2].rstrip(":")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
