import sys
from pathlib import Path

import numpy as np
import pytest

from rdlab.imageio import load_image

DATA = Path(__file__).parent / "data"
CORPUS = DATA / "corpus"


@pytest.fixture(scope="session")
def corpus_paths():
    paths = sorted(p for p in CORPUS.iterdir() if p.suffix in (".ppm", ".pgm"))
    assert len(paths) >= 8
    return paths


@pytest.fixture(scope="session")
def corpus(corpus_paths):
    return [load_image(p) for p in corpus_paths]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
