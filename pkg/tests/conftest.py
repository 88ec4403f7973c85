import numpy as np
import pytest

from losml.dataset import ColumnSchema
from losml.synth import SynthSpec, synthesize_dataset


@pytest.fixture(scope="session")
def small_synth():
    return synthesize_dataset(SynthSpec(n_rows=600, seed=3))


@pytest.fixture
def tiny_schema():
    return [
        ColumnSchema("Age Group", "categorical"),
        ColumnSchema("Total Costs", "currency"),
        ColumnSchema("Length of Stay", "los", required=True),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_text(path, text):
    path.write_text(text)
    return path


# Acceptance tests append (criterion, status, detail) here; the summary hook
# prints one line per criterion at the end of the session.
ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, status, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {detail}")
