import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm((a - b).ravel()) / max(np.linalg.norm(b.ravel()), 1e-300))


_CRITERIA = []


@pytest.fixture
def criterion():
    """``criterion(num, title, ok, detail)`` records one acceptance line and asserts ``ok``."""

    def record(num, title, ok, detail="", gating=True):
        tag = "PASS" if ok else ("FAIL" if gating else "MISS (non-gating)")
        line = f"criterion {num:>2} {tag}: {title} [{detail}]"
        _CRITERIA.append((num, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA):
        terminalreporter.write_line(line)
