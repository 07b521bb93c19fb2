import numpy as np
import pytest

from gchp.events import Dataset, MarkKind
from gchp.graph import GraphSpec, build_batch
from gchp.hawkes import sample_params, simulate_corpus

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Record a one-line PASS/FAIL verdict shown in the terminal summary."""

    def emit(ok: bool, text: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {text}")
        print(ACCEPTANCE_LINES[-1])
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_corpus():
    return simulate_corpus(sample_params(4, 3), 12.0, 6, 11)


@pytest.fixture(scope="session")
def small_batch(small_corpus):
    return build_batch(small_corpus, GraphSpec(m=5, bandwidth=0.6))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def categorical(seqs, K):
    return Dataset(seqs, MarkKind.categorical(K))
