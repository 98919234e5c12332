import numpy as np
import pytest

from dascl.polar_core import PolarCodeSpec


def make_code(N, info, good=()):
    """Code with an explicit information set and good set (good first in the order)."""
    info = [int(i) for i in info]
    good = [int(i) for i in good]
    frozen = np.ones(N, dtype=bool)
    frozen[info] = False
    good_mask = np.zeros(N, dtype=bool)
    good_mask[good] = True
    bad = [i for i in info if i not in set(good)]
    order = good + bad + [i for i in range(N) if frozen[i]]
    return PolarCodeSpec(N, len(info), frozen, np.array(order), good_mask)


ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
