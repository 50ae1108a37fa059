import numpy as np
import pytest

from incongruity.corpus import prepare_corpus
from incongruity.model import ModelConfig
from incongruity.synthgen import generate_splits, partition_corpus
from incongruity.textenc import build_vocab, load_embeddings
from incongruity.toy import make_toy_corpus, make_toy_embeddings, write_embeddings
from incongruity.training import TrainConfig, train

# Settings for the two-topic toy task used by the acceptance suite.
TOY_SEED = 1
TOY_RATIOS = (0.7, 0.1, 0.15, 0.05)
TOY_EPOCHS = 10
TOY_EMBED_SCALE = 0.5

_RESULTS = []


def record_criterion(number, ok, detail):
    """Remember one acceptance line; all of them are echoed after the run."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    _RESULTS.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_RESULTS):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def toy_dataset(seed=TOY_SEED):
    articles = prepare_corpus(make_toy_corpus(n_articles=600, vocab_size=200, sentences=(8, 15), seed=seed))
    split = partition_corpus(articles, TOY_RATIOS, seed)
    return split, generate_splits(split, 0.5, ("III", "IV"), seed, cross_category=True)


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory):
    """Train once on the toy task with the default (paper) hyperparameters."""
    import time

    tmp = tmp_path_factory.mktemp("toy")
    split, data = toy_dataset()
    vocab = build_vocab(data["train"])
    emb_path = tmp / "vectors.txt"
    write_embeddings(make_toy_embeddings(dim=300, vocab_size=200, scale=TOY_EMBED_SCALE, seed=TOY_SEED), emb_path)
    table = load_embeddings(emb_path, vocab, 300, TOY_SEED)
    t0 = time.perf_counter()
    result = train(data["train"], data["dev"], vocab, table.matrix, ModelConfig(),
                   TrainConfig(epochs=TOY_EPOCHS, seed=TOY_SEED))
    elapsed = time.perf_counter() - t0
    return {"split": split, "data": data, "vocab": vocab, "table": table, "result": result,
            "model": result.model, "seconds": elapsed, "tmp": tmp}
