import itertools

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def oracle_pair_count(mask):
    """Independent reference: walk every cell and look right and down."""
    rows, cols = len(mask), len(mask[0])
    total = 0
    for i, j in itertools.product(range(rows), range(cols)):
        if mask[i][j]:
            continue
        if j + 1 < cols and not mask[i][j + 1]:
            total += 1
        if i + 1 < rows and not mask[i + 1][j]:
            total += 1
    return total


def rectangle_mask(n, rows, cols, top=0, left=0):
    mask = np.ones((n, n), dtype=np.int8)
    mask[top:top + rows, left:left + cols] = 0
    return mask


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
