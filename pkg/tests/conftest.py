import numpy as np
import pytest

from modalpix.dataset import SyntheticSpec, generate_synthetic, split
from modalpix.pixel_encoder import LayoutSpec, TextEncoder
from modalpix.text_embedding import SkipGramConfig, build_vocab, tokenize, train_skipgram


@pytest.fixture(scope="session")
def tiny_data():
    """32x32 synthetic set, small enough for fast training checks."""
    spec = SyntheticSpec(num_classes=3, samples_per_class=20, image_size=(32, 32), seed=1)
    records, k = generate_synthetic(spec)
    train, test = split(records, 0.75, seed=2)
    corpus = [tokenize(r.text) for r in records]
    table = train_skipgram(corpus, build_vocab(corpus), SkipGramConfig(dim=36, epochs=2, seed=3))
    layout = LayoutSpec(pixels_per_word=12, block_scale=2, grid_width=16, max_words=4)
    return {"train": train, "test": test, "k": k, "encode": TextEncoder(table, layout), "size": (32, 32)}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# PASS/FAIL lines recorded by the acceptance suite, echoed after the run
CRITERIA_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES):
            terminalreporter.write_line(line)
