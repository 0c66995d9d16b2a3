from functools import lru_cache

import pytest

from surfsynth import driver

CONFIGS = [
    ("square", "pair3"),
    ("square", "center4"),
    ("heavy-square", "pair3"),
    ("heavy-square", "center4"),
    ("hexagon", "pair3"),
    ("heavy-hexagon", "pair3"),
]


@lru_cache(maxsize=None)
def synthesized(arch: str, d: int, mode: str = "pair3"):
    return driver.synth(arch, d, mode)


@pytest.fixture
def synth_cached():
    return synthesized


# acceptance verdicts, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
