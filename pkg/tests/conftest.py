import os

import numpy as np
import pytest

from techbubble.timeseries import RngStream

# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))


@pytest.fixture
def acceptance():
    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
    return record


@pytest.fixture
def gen():
    return RngStream(12345, 0).generator()


def random_walk(seed: int, n: int, stream: int = 0) -> np.ndarray:
    return np.cumsum(RngStream(seed, stream).generator().standard_normal(n))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
