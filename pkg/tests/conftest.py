import json
from pathlib import Path

import numpy as np
import pytest

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def load_shipped(kind):
    """Decoded JSON of a shipped scenario config, by kind."""
    return json.loads((CONFIGS / f"{kind}.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def shipped():
    return load_shipped


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
