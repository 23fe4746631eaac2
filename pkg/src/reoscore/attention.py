"""Region-grounded context features of a caption.

Given image region features V (N x D) and caption word features H (M x D),
each region i receives a context vector a_i: a softmax-attention-weighted
sum of the word features, where the attention logits are clipped,
column-normalized cosine similarities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .tensor import FeatureTensor

__all__ = [
    "AttentionConfig",
    "ContextFeatures",
    "normalized_similarity",
    "attention_weights",
    "context_features",
]

DEFAULT_LAMBDA = 9.0


@dataclass(frozen=True)
class AttentionConfig:
    """Attention settings. ``lam`` is the softmax temperature; 0 is accepted
    as a diagnostics mode (uniform attention), negatives are rejected."""

    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0.0:
            raise UsageError(f"attention temperature must be finite and >= 0, got {self.lam}")


@dataclass(frozen=True)
class ContextFeatures:
    """Per-region context vectors of one caption, N x D.

    ``source`` is "candidate" or "reference:<index>".
    """

    tensor: FeatureTensor
    source: str = "candidate"

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data


def _rows64(t) -> np.ndarray:
    if isinstance(t, ContextFeatures):
        t = t.tensor
    if isinstance(t, FeatureTensor):
        return t.data.astype(np.float64)
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim != 2:
        raise UsageError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    return arr


def normalized_similarity(V, H) -> np.ndarray:
    """Clipped, column-normalized cosine similarity matrix, N x M.

    Entry (i, j) is max(0, cos(v_i, h_j)) scaled so each word column has
    unit L2 norm over regions. A word whose cosine is non-positive against
    every region gets an all-zero column.
    """
    v = _rows64(V)
    h = _rows64(H)
    if v.shape[1] != h.shape[1]:
        raise UsageError(f"normalized_similarity: dimension mismatch D={v.shape[1]} vs D={h.shape[1]}")

    vn = _unit_rows(v)
    hn = _unit_rows(h)
    cos = np.clip(vn @ hn.T, -1.0, 1.0)
    clipped = np.maximum(cos, 0.0)
    denom = np.sqrt(np.sum(clipped * clipped, axis=0))
    safe = np.where(denom > 0.0, denom, 1.0)
    return clipped / safe


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0.0)


def attention_weights(sims, lam: float) -> np.ndarray:
    """Softmax over word similarities at temperature ``lam``.

    Computed with max-subtraction; the result is non-negative and sums to 1.
    """
    s = np.asarray(sims, dtype=np.float64)
    if s.size == 0:
        raise UsageError("attention_weights: empty similarity vector")
    if not np.isfinite(lam) or lam < 0.0:
        raise UsageError(f"attention temperature must be finite and >= 0, got {lam}")
    z = lam * s
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def context_features(V, H, cfg: AttentionConfig | None = None, source: str = "candidate") -> ContextFeatures:
    """Context vectors a_i = sum_j alpha_ij h_j for every region i, N x D."""
    cfg = cfg or AttentionConfig()
    v = _rows64(V)
    h = _rows64(H)
    sim = normalized_similarity(v, h)
    alpha = attention_weights(sim, cfg.lam)
    return ContextFeatures(tensor=FeatureTensor(alpha @ h), source=source)
