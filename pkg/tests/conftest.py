import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_VERDICTS = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict():
    """Record and assert one acceptance criterion; the summary lists them all."""
    def record(number, ok, detail, skipped=False):
        status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
        line = f"criterion {number:>2}: {status}  {detail}"
        _VERDICTS[number] = line
        print(line)
        if skipped:
            pytest.skip(detail)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[k])
