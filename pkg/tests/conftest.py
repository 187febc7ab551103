import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from csc_decomp.charkb import Vocab, build_confusion_index, load_char_table, sample_table_path  # noqa: E402
from csc_decomp.corpus import synthetic_char_table  # noqa: E402

DATA = Path(__file__).resolve().parent / "data"

# lines printed by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sample_table():
    return load_char_table(sample_table_path())


@pytest.fixture(scope="session")
def sample_index(sample_table):
    vocab = Vocab.from_chars(r.ch for r in sample_table)
    return build_confusion_index(vocab, sample_table)


@pytest.fixture(scope="session")
def synth_index():
    table = synthetic_char_table(30, seed=7, overlap=0.5)
    return build_confusion_index(Vocab.from_chars(r.ch for r in table), table)
