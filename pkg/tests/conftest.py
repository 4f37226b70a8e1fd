import numpy as np
import pytest

from arenarank.core import BattleRecord, ModelRef


def rec(a, b, a_wins=True, **kw):
    return BattleRecord(ModelRef(a), ModelRef(b), 1 if a_wins else 0, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_records(rng, n_models, n_records):
    ids = [f"m{i}" for i in range(n_models)]
    out = []
    for _ in range(n_records):
        i, j = rng.choice(n_models, 2, replace=False)
        out.append(rec(ids[i], ids[j], bool(rng.integers(2))))
    return ids, out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
