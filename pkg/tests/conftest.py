import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report ----------------------------------------------------------------

_CELLS = {}    # criterion number -> [(cell, ok, detail)]


class Recorder:
    def __init__(self, store):
        self.store = store

    def __call__(self, criterion, cell, ok, detail=""):
        self.store.setdefault(criterion, []).append((cell, bool(ok), detail))
        print(f"criterion {criterion} {cell}: {'PASS' if ok else 'FAIL'} {detail}")
        return bool(ok)


@pytest.fixture(scope="session")
def record():
    return Recorder(_CELLS)


def pytest_terminal_summary(terminalreporter):
    if not _CELLS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CELLS):
        cells = _CELLS[n]
        bad = [c for c in cells if not c[1]]
        line = f"criterion {n:2d}: {'FAIL' if bad else 'PASS'}  ({len(cells) - len(bad)}/{len(cells)} cells)"
        if bad:
            line += "  failing: " + "; ".join(f"{c} {d}".strip() for c, _, d in bad)
        tr.write_line(line)
