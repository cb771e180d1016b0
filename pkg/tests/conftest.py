import numpy as np
import pytest


def white_square(size=64, side=20, top=22, left=22, channels=1, invert=False):
    img = np.zeros((channels, size, size), np.float32)
    img[:, top : top + side, left : left + side] = 1.0
    return 1.0 - img if invert else img


@pytest.fixture
def square_image():
    return white_square()


@pytest.fixture
def square_mask():
    m = np.zeros((64, 64), bool)
    m[22:42, 22:42] = True
    return m


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
