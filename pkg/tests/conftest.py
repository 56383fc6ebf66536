import pytest

from factcheck import FixtureBackend, NliDistribution

_criterion_results = []


def pytest_runtest_makereport(item, call):
    if call.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if call.excinfo is None:
        status = "PASS"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        status = "SKIP"
    else:
        status = "FAIL"
    _criterion_results.append((status, marker.args[0]))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance criteria")
    for status, name in _criterion_results:
        terminalreporter.write_line(f"{status}: {name}")


def dist(c: float, n: float, e: float) -> NliDistribution:
    return NliDistribution(p_contradiction=c, p_neutral=n, p_entailment=e)


ENTAIL = dist(0.02, 0.08, 0.90)
FAIL_CONTRA = dist(0.70, 0.20, 0.10)
FAIL_NEUTRAL = dist(0.10, 0.60, 0.30)
UNIFORM = dist(1 / 3, 1 / 3, 1 / 3)


@pytest.fixture
def entail_all_backend():
    """Backend that entails everything; handy for OK-path tests."""
    return FixtureBackend({}, default=ENTAIL)


class CountingBackend:
    """Wrapper that records every classify call for cache-transparency tests."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = []

    def classify(self, pairs):
        self.calls.append(tuple(pairs))
        return self.inner.classify(pairs)

    def stats(self):
        return self.inner.stats()

    @property
    def pairs_seen(self):
        return sum(len(c) for c in self.calls)
