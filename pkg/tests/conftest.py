import random

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return random.Random(12345)


# acceptance criteria report: one PASS/FAIL line per criterion

_CRITERIA: dict = {}


class _Criterion:
    def __init__(self, number: int, capsys):
        self.number = number
        self.capsys = capsys
        self.details: list[str] = []

    def check(self, ok: bool, detail: str) -> None:
        self.details.append(("" if ok else "FAILED ") + detail)
        assert ok, detail


@pytest.fixture
def criterion(request, capsys):
    number = request.node.get_closest_marker("criterion").args[0]
    c = _Criterion(number, capsys)
    yield c
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  " + "; ".join(c.details)
    _CRITERIA[number] = line
    with capsys.disabled():
        print("\n" + line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
