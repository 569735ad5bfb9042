import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

WORDS = ["is", "a", "superclass", "subclass", "of", "an", "ascendant",
         "descendant", "science", "physics", "chemistry", "biology",
         "optics", "mechanics", "atoms", "waves", "genes", "cells",
         "light", "root", "node", "alpha", "beta", "gamma", "delta"]


def build_tiny_model(outdir: str) -> str:
    """A 2-layer 32-dim BERT with random seeded weights and a small
    WordPiece vocabulary, saved to disk so everything loads offline."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    vocab = (["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", ","] + WORDS
             + list("abcdefghijklmnopqrstuvwxyz0123456789")
             + [f"##{c}" for c in "abcdefghijklmnopqrstuvwxyz0123456789"])
    os.makedirs(outdir, exist_ok=True)
    vocab_path = os.path.join(outdir, "vocab.txt")
    with open(vocab_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(vocab) + "\n")
    tokenizer = BertTokenizerFast(vocab_file=vocab_path, do_lower_case=True)
    tokenizer.save_pretrained(outdir)
    config = BertConfig(vocab_size=len(vocab), hidden_size=32,
                        num_hidden_layers=2, num_attention_heads=2,
                        intermediate_size=64, max_position_embeddings=64)
    torch.manual_seed(0)
    BertModel(config).save_pretrained(outdir)
    return outdir


@pytest.fixture(scope="session")
def tiny_model(tmp_path_factory):
    return build_tiny_model(str(tmp_path_factory.mktemp("tinybert")))
