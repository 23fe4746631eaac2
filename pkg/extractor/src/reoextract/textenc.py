"""Word features from caption text: tokenize per the checkpoint's
preprocessing, embed, run the bidirectional GRU, and average the forward
and backward hidden states per word."""

from __future__ import annotations

import re

import numpy as np
import torch

from .checkpoint import Checkpoint

_SIMPLE_TOKEN = re.compile(r"[a-z0-9']+")


def tokenize(text: str, tokenizer: str = "simple") -> list[str]:
    if tokenizer != "simple":
        raise ValueError(f"unknown tokenizer {tokenizer!r}")
    return _SIMPLE_TOKEN.findall(text.lower())


def word_features(text: str, ckpt: Checkpoint) -> np.ndarray:
    """M x D float32 matrix, one row per token.

    Out-of-vocabulary tokens map to index 0 (<unk>); an empty caption is
    encoded as a single <unk> token so downstream shapes stay valid.
    """
    tokens = tokenize(text, ckpt.tokenizer)
    index = ckpt.word_index
    ids = [index.get(tok, 0) for tok in tokens] or [0]
    with torch.no_grad():
        emb = ckpt.encoder.embed(torch.tensor([ids], dtype=torch.long))
        out, _ = ckpt.encoder.rnn(emb)
    d = ckpt.dim
    avg = (out[0, :, :d] + out[0, :, d:]) / 2.0
    return avg.numpy().astype(np.float32)
