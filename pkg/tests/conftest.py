import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_VERDICTS: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


class Criterion:
    """Collects named sub-checks for one acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.checks: list = []
        self.done = False

    def check(self, ok, what: str) -> bool:
        self.checks.append((bool(ok), what))
        return bool(ok)

    def line(self, error: str | None = None) -> str:
        failed = [w for ok, w in self.checks if not ok]
        status = "PASS" if not failed and error is None else "FAIL"
        text = f"criterion {self.number:2d}: {status}  {self.title} ({len(self.checks)} checks)"
        if failed:
            text += "; failed: " + "; ".join(failed)
        if error is not None:
            text += f"; error: {error}"
        return text

    def verdict(self):
        self.done = True
        line = self.line()
        _VERDICTS[self.number] = line
        print(line)
        failed = [w for ok, w in self.checks if not ok]
        assert not failed, line


@pytest.fixture
def criterion(request):
    made: list = []

    def make(number: int, title: str) -> Criterion:
        c = Criterion(number, title)
        made.append(c)
        return c

    yield make
    for c in made:
        if not c.done:
            _VERDICTS[c.number] = c.line(error="did not finish")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
