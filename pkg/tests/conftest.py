import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def record(criterion, ok, detail=""):
    """Collect a PASS/FAIL line for the acceptance summary."""
    prev = ACCEPTANCE.get(criterion)
    ok = ok and (prev is None or prev[0])
    details = ([prev[1]] if prev and prev[1] else []) + ([detail] if detail else [])
    ACCEPTANCE[criterion] = (ok, "; ".join(details))
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda c: int(str(c).split(".")[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
