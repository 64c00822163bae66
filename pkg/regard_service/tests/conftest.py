from pathlib import Path

import pytest
import torch
from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

# A tiny randomly initialized 4-class checkpoint: the conformance suite
# exercises the wire contract, not classifier quality. The real deployment
# points REGARD_MODEL_PATH at a published regard checkpoint instead.
VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "person", "was", "is", "they", "their",
    "respected", "renowned", "success", "struggle", "discrimination",
    "challenges", "praised", "community", "work", "business",
    "##s", "##ed", "##ing",
] + list("abcdefghijklmnopqrstuvwxyz")


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("tiny_regard_model")
    (path / "vocab.txt").write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(path / "vocab.txt"))
    tokenizer.save_pretrained(path)

    labels = {0: "negative", 1: "neutral", 2: "positive", 3: "other"}
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=128,
        num_labels=4,
        id2label=labels,
        label2id={v: k for k, v in labels.items()},
    )
    torch.manual_seed(0)
    model = BertForSequenceClassification(config)
    model.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def no_other_model_dir(tmp_path_factory, model_dir) -> str:
    """Three-class variant: the wire contract must report other = 0."""
    path = tmp_path_factory.mktemp("tiny_regard_model_3cls")
    (path / "vocab.txt").write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    BertTokenizer(str(path / "vocab.txt")).save_pretrained(path)

    labels = {0: "negative", 1: "neutral", 2: "positive"}
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=128,
        num_labels=3,
        id2label=labels,
        label2id={v: k for k, v in labels.items()},
    )
    torch.manual_seed(1)
    BertForSequenceClassification(config).save_pretrained(path)
    return str(path)
