"""Checkpoint schema for the extractor.

A checkpoint is a single torch file holding the text encoder (embedding +
bidirectional GRU), the linear layer that maps region descriptors into the
joint embedding space, the vocabulary, and the region/descriptor
configuration. The extractor runs whatever weights the checkpoint carries.

``build_demo_checkpoint`` constructs a small self-contained checkpoint with
a hand-built visual lexicon: color and attribute words are embedded along
the matching descriptor axes (hue profile, saturation, brightness,
texture), object words as blends of those axes, and function words in
dimensions no image feature occupies. The GRU is wired as a pass-through
(update gate saturated off, new-gate input weights identity), so word
features keep their embedding direction while still flowing through the
real recurrent encoder path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .regions import DESCRIPTOR_DIM, HUE_BINS

DEMO_DIM = 32
_SAT, _VAL, _TEX = HUE_BINS, HUE_BINS + 1, HUE_BINS + 2
_RGB0 = HUE_BINS + 3
_POS0 = HUE_BINS + 6
_HASH0 = HUE_BINS + 8  # dims 20.. : lexical space, never produced by images


@dataclass
class Checkpoint:
    name: str
    dim: int
    embed_dim: int
    vocab: list[str]
    tokenizer: str
    image_size: int
    fc_weight: np.ndarray  # (dim, DESCRIPTOR_DIM)
    fc_bias: np.ndarray  # (dim,)
    encoder: nn.Module  # embed + rnn, eval mode

    @property
    def word_index(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.vocab)}


class _TextEncoder(nn.Module):
    def __init__(self, vocab_size: int, embed_dim: int, dim: int):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, embed_dim)
        self.rnn = nn.GRU(embed_dim, dim, batch_first=True, bidirectional=True)


def save_checkpoint(path, name, vocab, state_dict, dim, embed_dim, tokenizer="simple", image_size=384) -> None:
    torch.save(
        {
            "name": name,
            "dim": int(dim),
            "embed_dim": int(embed_dim),
            "vocab": list(vocab),
            "tokenizer": tokenizer,
            "image_size": int(image_size),
            "descriptor_dim": DESCRIPTOR_DIM,
            "state_dict": state_dict,
        },
        path,
    )


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if blob.get("descriptor_dim") != DESCRIPTOR_DIM:
        raise ValueError(
            f"checkpoint descriptor_dim {blob.get('descriptor_dim')} does not match "
            f"this extractor's descriptor ({DESCRIPTOR_DIM})"
        )
    state = blob["state_dict"]
    encoder = _TextEncoder(len(blob["vocab"]), blob["embed_dim"], blob["dim"])
    encoder.load_state_dict({k: v for k, v in state.items() if k.startswith(("embed.", "rnn."))})
    encoder.eval()
    return Checkpoint(
        name=blob["name"],
        dim=blob["dim"],
        embed_dim=blob["embed_dim"],
        vocab=list(blob["vocab"]),
        tokenizer=blob["tokenizer"],
        image_size=blob["image_size"],
        fc_weight=state["fc.weight"].numpy().astype(np.float64),
        fc_bias=state["fc.bias"].numpy().astype(np.float64),
        encoder=encoder,
    )


# ---------------------------------------------------------------------------
# Demo checkpoint

# word -> [(axis, weight)]; axes: "h0".."h11" hue bins, "sat", "bright", "tex",
# "r"/"g"/"b" mean-color. Function words get hashed lexical directions instead.
_LEXICON = {
    "red": [("h0", 1.0), ("h11", 0.4), ("sat", 0.3)],
    "orange": [("h1", 1.0), ("h0", 0.5), ("h2", 0.3), ("sat", 0.2)],
    "brown": [("h0", 0.4), ("h1", 1.0), ("h2", 0.5), ("bright", -0.15)],
    "tan": [("h0", 0.3), ("h1", 1.0), ("h2", 0.6), ("bright", 0.15)],
    "yellow": [("h2", 1.0), ("h1", 0.3), ("sat", 0.3)],
    "green": [("h4", 1.0), ("h3", 0.5), ("h5", 0.3)],
    "teal": [("h5", 1.0), ("h6", 0.4)],
    "cyan": [("h6", 1.0), ("h5", 0.4)],
    "blue": [("h8", 1.0), ("h7", 0.6)],
    "purple": [("h9", 1.0), ("h10", 0.4)],
    "magenta": [("h10", 1.0), ("h11", 0.3)],
    "pink": [("h11", 0.8), ("h10", 0.4), ("bright", 0.4)],
    "white": [("bright", 1.0), ("sat", -0.8), ("r", 0.25), ("g", 0.25), ("b", 0.25)],
    "black": [("bright", -1.0), ("sat", -0.3)],
    "gray": [("sat", -1.0), ("tex", -0.2)],
    "grey": [("sat", -1.0), ("tex", -0.2)],
    "dark": [("bright", -1.0), ("sat", -0.2)],
    "bright": [("bright", 1.0)],
    "colorful": [("sat", 1.0)],
    "striped": [("tex", 1.0), ("h1", 0.3)],
    "tabby": [("h0", 0.4), ("h1", 1.0), ("h2", 0.4), ("tex", 0.5)],
    "furry": [("tex", 0.9), ("h1", 0.4)],
    "textured": [("tex", 1.0)],
    "detailed": [("tex", 0.9)],
    "smooth": [("tex", -1.0)],
    "plain": [("tex", -0.8), ("sat", -0.4)],
    "cat": [("h0", 0.4), ("h1", 1.0), ("h2", 0.5), ("tex", 0.3)],
    "kitten": [("h0", 0.4), ("h1", 1.0), ("h2", 0.5), ("tex", 0.3)],
    "animal": [("h0", 0.35), ("h1", 0.8), ("h2", 0.45), ("tex", 0.3)],
    "dog": [("h0", 0.4), ("h1", 0.9), ("h2", 0.4), ("tex", 0.3)],
    "person": [("h0", 0.4), ("h1", 0.8), ("h2", 0.4), ("bright", 0.15), ("tex", 0.1)],
    "woman": [("h0", 0.4), ("h1", 0.8), ("h2", 0.4), ("bright", 0.15), ("tex", 0.1)],
    "man": [("h0", 0.4), ("h1", 0.8), ("h2", 0.4), ("bright", 0.15), ("tex", 0.1)],
    "face": [("h0", 0.4), ("h1", 0.9), ("h2", 0.5), ("bright", 0.1)],
    "astronaut": [("bright", 0.6), ("sat", -0.3), ("h1", 0.2)],
    "suit": [("bright", 0.6), ("sat", -0.5)],
    "space": [("bright", 0.4), ("sat", -0.4)],
    "coffee": [("h0", 0.5), ("h1", 1.0), ("bright", -0.3)],
    "cup": [("h1", 0.5), ("bright", 0.25), ("sat", -0.15)],
    "drink": [("h0", 0.3), ("h1", 0.6), ("bright", -0.1)],
    "table": [("h0", 0.5), ("h1", 1.0), ("h2", 0.4), ("bright", -0.1)],
    "wooden": [("h0", 0.5), ("h1", 1.0), ("h2", 0.4), ("bright", -0.1)],
    "wood": [("h0", 0.5), ("h1", 1.0), ("h2", 0.4), ("bright", -0.1)],
    "flag": [("h0", 0.5), ("h8", 0.5), ("bright", 0.3), ("sat", 0.4)],
    "sky": [("h7", 0.6), ("h8", 0.4), ("bright", 0.5)],
    "grass": [("h4", 0.8), ("h3", 0.4)],
    "fur": [("tex", 0.8), ("h1", 0.5), ("h0", 0.3)],
    "eyes": [("tex", 0.4), ("h4", 0.3), ("h2", 0.3)],
    "background": [("sat", -0.3), ("bright", 0.2)],
}

# Broad "anything visual" words: a little of every hue plus mild texture.
_BROAD_WORDS = ("photo", "image", "picture", "scene", "view", "shot")

_FUNCTION_WORDS = (
    "<unk> a an the of on in at by with and or is are was were this that its to "
    "from for sitting standing resting posing looking wearing holding close up "
    "indoors outdoors her his"
).split()

_AXES = {f"h{k}": k for k in range(HUE_BINS)}
_AXES.update({"sat": _SAT, "bright": _VAL, "tex": _TEX, "r": _RGB0, "g": _RGB0 + 1, "b": _RGB0 + 2})


def _hash_direction(word: str, dims: int) -> np.ndarray:
    digest = hashlib.sha256(word.encode("utf-8")).digest()
    raw = np.frombuffer((digest * ((dims * 4) // len(digest) + 1))[: dims * 4], dtype="<u4")
    vec = raw.astype(np.float64) / 2**32 - 0.5
    return vec / np.linalg.norm(vec)


def _word_target(word: str) -> np.ndarray:
    target = np.zeros(DEMO_DIM)
    if word in _LEXICON:
        for axis, weight in _LEXICON[word]:
            target[_AXES[axis]] += weight
    elif word in _BROAD_WORDS:
        # "photo", "picture", ...: only partially visual. A uniform hue
        # blend matches any colorful region, damped by a lexical component
        # no image feature occupies.
        target[:HUE_BINS] = 0.2
        target[_TEX] = 0.1
        target[_SAT] = 0.05
        visual_norm = np.linalg.norm(target)
        target[_HASH0:] = 1.3 * visual_norm * _hash_direction(word, DEMO_DIM - _HASH0)
    else:
        target[_HASH0:] = _hash_direction(word, DEMO_DIM - _HASH0)
    return target / np.linalg.norm(target)


def _passthrough_gru_state(dim: int) -> dict[str, torch.Tensor]:
    w_ih = np.zeros((3 * dim, dim))
    w_ih[2 * dim :, :] = np.eye(dim)  # new-gate input weights = identity
    b_ih = np.zeros(3 * dim)
    b_ih[dim : 2 * dim] = -12.0  # update gate saturated off: h_t = n_t
    zeros_hh = np.zeros((3 * dim, dim))
    state = {}
    for suffix in ("", "_reverse"):
        state[f"rnn.weight_ih_l0{suffix}"] = torch.tensor(w_ih, dtype=torch.float32)
        state[f"rnn.weight_hh_l0{suffix}"] = torch.tensor(zeros_hh, dtype=torch.float32)
        state[f"rnn.bias_ih_l0{suffix}"] = torch.tensor(b_ih, dtype=torch.float32)
        state[f"rnn.bias_hh_l0{suffix}"] = torch.tensor(np.zeros(3 * dim), dtype=torch.float32)
    return state


def _demo_fc() -> tuple[np.ndarray, np.ndarray]:
    """Map the 21-dim descriptor into the 32-dim joint space: hue bins pass
    through amplified, the scalar statistics are centered so that "dark",
    "plain" and friends can anti-correlate."""
    w = np.zeros((DEMO_DIM, DESCRIPTOR_DIM))
    b = np.zeros(DEMO_DIM)
    for k in range(HUE_BINS):
        w[k, k] = 2.0
    w[_SAT, HUE_BINS] = 1.5
    b[_SAT] = -1.5 * 0.35
    w[_VAL, HUE_BINS + 1] = 1.5
    b[_VAL] = -1.5 * 0.5
    w[_TEX, HUE_BINS + 2] = 1.0  # value std
    w[_TEX, HUE_BINS + 3] = 4.0  # edge density
    b[_TEX] = -0.25
    for k in range(3):
        w[_RGB0 + k, HUE_BINS + 4 + k] = 0.4
        b[_RGB0 + k] = -0.2
    w[_POS0, HUE_BINS + 7] = 0.1
    b[_POS0] = -0.05
    w[_POS0 + 1, HUE_BINS + 8] = 0.1
    b[_POS0 + 1] = -0.05
    return w, b


def build_demo_checkpoint(path, name="demo-color-grounding-v1", image_size=384) -> Path:
    """Write the deterministic demo checkpoint; returns the path."""
    vocab = list(
        dict.fromkeys([*_FUNCTION_WORDS, *_BROAD_WORDS, *sorted(_LEXICON)])
    )
    if vocab[0] != "<unk>":
        vocab.remove("<unk>")
        vocab.insert(0, "<unk>")
    embed = np.stack([0.5 * _word_target(w) for w in vocab])
    state = {"embed.weight": torch.tensor(embed, dtype=torch.float32)}
    state.update(_passthrough_gru_state(DEMO_DIM))
    fc_w, fc_b = _demo_fc()
    state["fc.weight"] = torch.tensor(fc_w, dtype=torch.float32)
    state["fc.bias"] = torch.tensor(fc_b, dtype=torch.float32)
    save_checkpoint(
        path, name=name, vocab=vocab, state_dict=state,
        dim=DEMO_DIM, embed_dim=DEMO_DIM, image_size=image_size,
    )
    return Path(path)
