import random

import pytest

from latefuse.model import Corpus, Document


WORDS = [
    "amber", "basin", "cedar", "delta", "ember", "fjord", "grove", "heron",
    "inlet", "joule", "knoll", "lumen", "marsh", "nadir", "ochre", "pivot",
    "quill", "ridge", "shale", "tundra",
]


def make_text(rng: random.Random, n_words: int) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(n_words))


@pytest.fixture
def toy_corpus() -> Corpus:
    """20 deterministic documents over a 20-word vocabulary."""
    rng = random.Random(1234)
    docs = [Document(f"d{i:02d}", make_text(rng, rng.randint(5, 30))) for i in range(20)]
    return Corpus(docs)
