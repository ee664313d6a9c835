import sys
from pathlib import Path

import numpy as np
import pytest

from automatte import kernels

# lets test modules import the shared reference implementations in oracles.py
sys.path.insert(0, str(Path(__file__).parent))


def disk_mask(n=128, r=40):
    yy, xx = np.mgrid[:n, :n]
    c = (n - 1) / 2
    return (yy - c) ** 2 + (xx - c) ** 2 <= r * r


def disk_image(n=128, r=40):
    return (disk_mask(n, r)[..., None] * 255).repeat(3, axis=2).astype(np.uint8)


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    """Every importable kernel backend module."""
    return kernels.available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def criterion(capsys):
    """Record a numbered acceptance check; the line is echoed now and in the summary."""

    def record(num: int, name: str, ok: bool, detail: str = ""):
        ACCEPTANCE.append((num, name, bool(ok), detail))
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {name} {detail}".rstrip())
        assert ok, f"criterion {num} ({name}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:2d}. {name}  {detail}".rstrip())
