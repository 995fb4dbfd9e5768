import os

# Keep model loading strictly local; never consult a hub.
os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_DISABLE_TELEMETRY", "1")

import numpy as np
import pytest
import torch
from tokenizers import Regex, Tokenizer, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

WORDS = (
    "the a this that old young river stone garden window traveler keeper letter "
    "morning evening road house light shadow walked opened carried remembered "
    "watched waited spoke turned found under over beside through with without and "
    "but while because slowly quietly almost never again once twice soon then"
).split()


def make_fixture_text(n_chars: int = 2600, seed: int = 123) -> str:
    """Deterministic prose-like text long enough for ~2000+ char tokens."""
    rng = np.random.default_rng(seed)
    pieces = []
    total = 0
    while total < n_chars:
        sent = " ".join(WORDS[i] for i in rng.integers(0, len(WORDS), size=8))
        sent = sent.capitalize() + ". "
        pieces.append(sent)
        total += len(sent)
    return "".join(pieces)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A saved character-level causal LM, loadable by identifier (path)."""
    text = make_fixture_text()
    chars = sorted(set(text))
    vocab = {ch: i for i, ch in enumerate(chars)}
    vocab["<unk>"] = len(vocab)
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Split(Regex(r"[\s\S]"), behavior="isolated")
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="<unk>")

    torch.manual_seed(7)
    config = GPT2Config(
        vocab_size=len(vocab),
        n_positions=256,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=None,
        eos_token_id=None,
    )
    model = GPT2LMHeadModel(config)
    out = tmp_path_factory.mktemp("tiny-model")
    model.save_pretrained(out)
    fast.save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def fixture_text():
    return make_fixture_text()
