"""Relevance / Extraness / Omission scoring.

Relevance is the mean per-region cosine between a candidate's context
vectors and the ground truth. Extraness and omission decompose the error:
each context vector is split into its component along the ground truth and
the orthogonal residual, and the Mahalanobis length of the explained
component is averaged over regions. All three axes are oriented so that
higher is better.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .attention import ContextFeatures, _rows64
from .errors import UsageError
from .tensor import CovarianceEstimate, CovKind, FeatureTensor, estimate_covariance

__all__ = [
    "Mode",
    "GroundTruthSet",
    "ReoScore",
    "ErrorVectors",
    "ScoringConfig",
    "orthogonal_residual",
    "relevance",
    "extraness",
    "omission",
    "error_vectors",
    "score_instance",
]


class Mode(enum.Enum):
    IMAGE = "image"
    REFERENCE = "reference"
    COMBINED = "combined"


ALL_MODES = (Mode.IMAGE, Mode.REFERENCE, Mode.COMBINED)


@dataclass(frozen=True)
class GroundTruthSet:
    """Ground truth for one image: its region features plus the context
    features of zero or more reference captions. All members share N and D.
    """

    image_regions: FeatureTensor
    reference_contexts: tuple[ContextFeatures, ...] = ()

    def __post_init__(self):
        n, d = self.image_regions.rows, self.image_regions.cols
        object.__setattr__(self, "reference_contexts", tuple(self.reference_contexts))
        for idx, ref in enumerate(self.reference_contexts):
            if ref.tensor.rows != n or ref.tensor.cols != d:
                raise UsageError(
                    f"reference context {idx} has shape "
                    f"({ref.tensor.rows}, {ref.tensor.cols}), expected ({n}, {d})"
                )


@dataclass(frozen=True)
class ReoScore:
    """One candidate's (relevance, extraness, omission) against one
    ground-truth mode. Higher is better on every axis."""

    relevance: float
    extraness: float
    omission: float
    mode: Mode

    def __post_init__(self):
        for name in ("relevance", "extraness", "omission"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise UsageError(f"{name} is not finite: {v}")
        if not -1.0 <= self.relevance <= 1.0:
            raise UsageError(f"relevance out of [-1, 1]: {self.relevance}")
        if self.extraness < 0.0 or self.omission < 0.0:
            raise UsageError("extraness and omission must be non-negative")


@dataclass(frozen=True)
class ErrorVectors:
    """Per-region orthogonal residuals in both directions: ``extra`` carries
    candidate content unexplained by the ground truth, ``missing`` carries
    ground-truth content unexplained by the candidate."""

    extra: FeatureTensor
    missing: FeatureTensor


class RelevanceSim(enum.Enum):
    COSINE = "cosine"
    CLIPPED = "clipped"


class CombineOrder(enum.Enum):
    AVERAGE_THEN_COMBINE = "average-then-combine"
    COMBINE_THEN_AVERAGE = "combine-then-average"


@dataclass(frozen=True)
class ScoringConfig:
    """Batch scoring policy.

    ``ridge=None`` selects the data-driven default (1e-3 of the mean
    per-dimension variance of the stacked candidate+ground-truth rows).
    ``combine_weights`` are the (image, reference) weights of the combined
    mode. With a fixed linear combination the two combine orders produce the
    same numbers; both are implemented for sensitivity studies.
    """

    modes: tuple[Mode, ...] = ALL_MODES
    cov_kind: CovKind = CovKind.DIAGONAL
    ridge: float | None = None
    gamma: float = 0.5
    relevance_sim: RelevanceSim = RelevanceSim.COSINE
    combine_weights: tuple[float, float] = (0.5, 0.5)
    combine_order: CombineOrder = CombineOrder.AVERAGE_THEN_COMBINE

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise UsageError("at least one scoring mode is required")
        w_img, w_ref = self.combine_weights
        total = w_img + w_ref
        if w_img < 0.0 or w_ref < 0.0 or total <= 0.0:
            raise UsageError(f"combine weights must be non-negative with a positive sum, got {self.combine_weights}")


def orthogonal_residual(x, base) -> np.ndarray:
    """x minus its projection onto ``base``.

    A zero base means there is no signal to project onto, so x is returned
    unchanged (everything is residual).
    """
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    bv = np.asarray(base, dtype=np.float64).reshape(-1)
    if xv.shape != bv.shape:
        raise UsageError(f"orthogonal_residual: dimension mismatch {xv.shape} vs {bv.shape}")
    nb2 = np.dot(bv, bv)
    if nb2 == 0.0:
        return xv.copy()
    return xv - (np.dot(xv, bv) / nb2) * bv


def _residual_rows(x: np.ndarray, base: np.ndarray) -> np.ndarray:
    dots = np.einsum("ij,ij->i", x, base)
    nb2 = np.einsum("ij,ij->i", base, base)
    coeff = np.where(nb2 > 0.0, dots / np.where(nb2 > 0.0, nb2, 1.0), 0.0)
    return x - coeff[:, None] * base


def _paired(a, g) -> tuple[np.ndarray, np.ndarray]:
    am = _rows64(a)
    gm = _rows64(g)
    if am.shape != gm.shape:
        raise UsageError(f"shape mismatch: contexts {am.shape} vs ground truth {gm.shape}")
    return am, gm


def relevance(A, G, sim: RelevanceSim = RelevanceSim.COSINE) -> float:
    """Mean per-region similarity between contexts and ground truth."""
    am, gm = _paired(A, G)
    dots = np.einsum("ij,ij->i", am, gm)
    norm2 = np.sqrt(np.einsum("ij,ij->i", am, am) * np.einsum("ij,ij->i", gm, gm))
    cos = np.where(norm2 > 0.0, dots / np.where(norm2 > 0.0, norm2, 1.0), 0.0)
    cos = np.clip(cos, -1.0, 1.0)
    if sim is RelevanceSim.COSINE:
        return float(np.clip(cos.mean(), -1.0, 1.0))
    # Clipped variant: reuse the column-normalization shape of the attention
    # similarity, treating the N per-region cosines as one column.
    clipped = np.maximum(cos, 0.0)
    denom = np.sqrt(np.sum(clipped * clipped))
    if denom == 0.0:
        return 0.0
    return float((clipped / denom).mean())


def _mean_projection_distance(x: np.ndarray, base: np.ndarray, estimate: CovarianceEstimate) -> float:
    """Mean over rows of d(x_i, residual(x_i, base_i)) under ``estimate``."""
    if x.shape[1] != estimate.dim:
        raise UsageError(f"covariance dimension {estimate.dim} does not match feature dimension {x.shape[1]}")
    resid = _residual_rows(x, base)
    return float(estimate.quad_form_sqrt_rows(x - resid).mean())


def extraness(A, G, estimate: CovarianceEstimate) -> float:
    """Mean Mahalanobis distance from each context vector to its orthogonal
    residual against the ground truth. Higher = less extra content."""
    am, gm = _paired(A, G)
    return _mean_projection_distance(am, gm, estimate)


def omission(A, G, estimate: CovarianceEstimate) -> float:
    """Extraness with the roles swapped: distance from each ground-truth
    vector to its residual against the context. Higher = less missing."""
    am, gm = _paired(A, G)
    return _mean_projection_distance(gm, am, estimate)


def error_vectors(A, G) -> ErrorVectors:
    """Per-region residuals in both directions, for validation against
    externally identified true-error features."""
    am, gm = _paired(A, G)
    return ErrorVectors(
        extra=FeatureTensor(_residual_rows(am, gm)),
        missing=FeatureTensor(_residual_rows(gm, am)),
    )


def _pair_covariance(am: np.ndarray, gm: np.ndarray, cfg: ScoringConfig) -> CovarianceEstimate:
    stacked = np.vstack([am, gm])
    if cfg.cov_kind is CovKind.IDENTITY:
        return estimate_covariance(stacked, CovKind.IDENTITY)
    return estimate_covariance(stacked, cfg.cov_kind, ridge=cfg.ridge, gamma=cfg.gamma)


def _score_pair(am: np.ndarray, gm: np.ndarray, cfg: ScoringConfig) -> tuple[float, float, float]:
    s = _pair_covariance(am, gm, cfg)
    return (
        relevance(am, gm, cfg.relevance_sim),
        _mean_projection_distance(am, gm, s),
        _mean_projection_distance(gm, am, s),
    )


def score_instance(candidate: ContextFeatures, gt: GroundTruthSet, cfg: ScoringConfig | None = None) -> dict[Mode, ReoScore]:
    """Score one candidate against its ground truth in the requested modes.

    Image mode scores against the region features; reference mode averages
    per-reference scores; combined mode blends the two per axis. The
    covariance is estimated independently for every (candidate, ground
    truth) pair from their stacked rows.
    """
    cfg = cfg or ScoringConfig()
    am = _rows64(candidate)
    n, d = gt.image_regions.rows, gt.image_regions.cols
    if am.shape != (n, d):
        raise UsageError(f"candidate contexts have shape {am.shape}, ground truth expects ({n}, {d})")

    needs_refs = Mode.REFERENCE in cfg.modes or Mode.COMBINED in cfg.modes
    if needs_refs and not gt.reference_contexts:
        raise UsageError("reference mode requested but the ground truth has no reference captions")

    image_axes = None
    if Mode.IMAGE in cfg.modes or Mode.COMBINED in cfg.modes:
        image_axes = _score_pair(am, gt.image_regions.data.astype(np.float64), cfg)

    per_ref = None
    if needs_refs:
        per_ref = [_score_pair(am, _rows64(ref), cfg) for ref in gt.reference_contexts]

    out: dict[Mode, ReoScore] = {}
    if Mode.IMAGE in cfg.modes:
        out[Mode.IMAGE] = ReoScore(*image_axes, mode=Mode.IMAGE)
    if Mode.REFERENCE in cfg.modes or Mode.COMBINED in cfg.modes:
        ref_axes = tuple(float(np.mean([axes[k] for axes in per_ref])) for k in range(3))
        if Mode.REFERENCE in cfg.modes:
            out[Mode.REFERENCE] = ReoScore(*ref_axes, mode=Mode.REFERENCE)
        if Mode.COMBINED in cfg.modes:
            w_img, w_ref = cfg.combine_weights
            total = w_img + w_ref
            if cfg.combine_order is CombineOrder.AVERAGE_THEN_COMBINE:
                combined = tuple(
                    (w_img * image_axes[k] + w_ref * ref_axes[k]) / total for k in range(3)
                )
            else:
                combined = tuple(
                    float(np.mean([(w_img * image_axes[k] + w_ref * axes[k]) / total for axes in per_ref]))
                    for k in range(3)
                )
            out[Mode.COMBINED] = ReoScore(*combined, mode=Mode.COMBINED)
    return out
