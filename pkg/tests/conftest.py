import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from urldet.model import ModelConfig, UrlClassifier, collate
from urldet.tokenizer import tokenize, train_bpe

CORPUS = [
    "http://www.google.com/search?q=maps",
    "https://github.com/torvalds/linux",
    "http://example.org/index.html",
    "https://mail.contactmail.com/inbox",
    "http://login-secure.paypal.com.verify-account.net/signin",
    "http://phish-bank3.ru/update?id=77",
    "https://en.wikipedia.org/wiki/URL",
    "http://cdn2.static-host.io/asset.js",
]


@pytest.fixture(scope="session")
def tiny_vocab():
    return train_bpe(CORPUS, 300)


@pytest.fixture(scope="session")
def tiny_config(tiny_vocab):
    return ModelConfig(vocab_size=tiny_vocab.size, max_len=16, d_model=16,
                       n_layers=2, n_heads=2, d_ff=32, d_char=8)


@pytest.fixture()
def tiny_model(tiny_config):
    gen = torch.Generator().manual_seed(7)
    return UrlClassifier(tiny_config, gen)


@pytest.fixture()
def tiny_batch(tiny_vocab, tiny_config):
    seqs = [tokenize(u, tiny_vocab, max_len=tiny_config.max_len)
            for u in CORPUS[:4]]
    return collate(seqs, [0, 0, 1, 1])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
