import os
from pathlib import Path

import pytest

MNIST_DIR = Path(os.environ.get("BACKDOORLAB_MNIST", "/root/data/mnist"))


def mnist_available():
    return (MNIST_DIR / "t10k-labels-idx1-ubyte").exists() or (MNIST_DIR / "t10k-labels-idx1-ubyte.gz").exists()


@pytest.fixture(scope="session")
def mnist_dir():
    if not mnist_available():
        pytest.skip(f"MNIST IDX files not found in {MNIST_DIR} (set BACKDOORLAB_MNIST)")
    return MNIST_DIR


# one line per acceptance criterion, echoed in the terminal summary so they
# survive output capturing
ACCEPTANCE_LINES = []


def report_criterion(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
