import numpy as np
import pytest

from s2sa.model import ModelParams


def random_model(vocab_size, emb_dim, hidden_dim, seed=0, scale=0.5):
    return ModelParams.initialize(vocab_size, emb_dim, hidden_dim, seed=seed, scale=scale)


@pytest.fixture
def small_model():
    return random_model(9, 3, 3, seed=11)


@pytest.fixture
def np_rng():
    return np.random.default_rng(2024)


ACCEPTANCE_RESULTS = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        ACCEPTANCE_RESULTS.append((name, report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}  ({duration:.1f}s)")
