import numpy as np
import pytest

from edpm.core import Dataset, default_hyperparameters
from edpm.simstudy import DgpConfig, generate_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def small_data():
    r = np.random.default_rng(7)
    return generate_dataset(DgpConfig(p=2, n=40), r)


@pytest.fixture
def small_hp(small_data):
    return default_hyperparameters(small_data)


@pytest.fixture
def tiny_data():
    y = np.array([0.1, 1.9, 5.0])
    X = np.array([[0.0], [2.0], [5.2]])
    return Dataset(y=y, X=X)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One CRITERION k: PASS/FAIL line per acceptance criterion."""
    import re

    pat = re.compile(r"test_criterion_(\d+)")
    results = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            m = pat.search(getattr(rep, "nodeid", ""))
            if m and getattr(rep, "when", "call") == "call":
                results[int(m.group(1))] = (
                    "PASS" if status == "passed" else "FAIL")
    if results:
        terminalreporter.write_line("")
        for k in sorted(results):
            terminalreporter.write_line(f"CRITERION {k}: {results[k]}")
