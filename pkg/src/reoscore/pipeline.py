"""Manifest-driven batch scoring: tensors in, per-mode scores out.

Instances are independent; the batch scorer may fan work out across a
thread pool and collects results in manifest order, so parallel output is
identical to serial output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .attention import AttentionConfig, ContextFeatures, context_features
from .errors import UsageError
from .metrics import (
    ErrorVectors,
    GroundTruthSet,
    Mode,
    ReoScore,
    ScoringConfig,
    error_vectors,
    score_instance,
)
from .packio import InstanceManifest, PairJudgment, RatingJudgment, read_tensor
from .harness import (
    CaptionPair,
    RatedInstance,
    ValidationRecord,
    ValidationReport,
    validate_error_identification,
)
from .tensor import FeatureTensor

__all__ = [
    "EvaluationInstance",
    "ScoredInstance",
    "load_instance",
    "score_loaded",
    "score_manifest",
    "rated_instances",
    "caption_pairs",
    "validate_manifest_errors",
    "metric_names",
]


@dataclass(frozen=True)
class EvaluationInstance:
    """One candidate's loaded features, ground truth material, and judgment."""

    manifest: InstanceManifest
    image_regions: FeatureTensor
    candidate_words: FeatureTensor
    reference_words: tuple[FeatureTensor, ...]
    true_extra: FeatureTensor | None = None
    true_missing: FeatureTensor | None = None

    @property
    def instance_id(self) -> str:
        return self.manifest.instance_id


@dataclass(frozen=True)
class ScoredInstance:
    instance_id: str
    scores: dict[Mode, ReoScore]
    judgment: RatingJudgment | PairJudgment | None
    tags: dict


def load_instance(entry: InstanceManifest, with_true_errors: bool = False) -> EvaluationInstance:
    return EvaluationInstance(
        manifest=entry,
        image_regions=read_tensor(entry.image_path),
        candidate_words=read_tensor(entry.candidate_path),
        reference_words=tuple(read_tensor(p) for p in entry.reference_paths),
        true_extra=read_tensor(entry.true_extra_path) if with_true_errors and entry.true_extra_path else None,
        true_missing=read_tensor(entry.true_missing_path) if with_true_errors and entry.true_missing_path else None,
    )


def _contexts(inst: EvaluationInstance, attn: AttentionConfig) -> tuple[ContextFeatures, GroundTruthSet]:
    candidate = context_features(inst.image_regions, inst.candidate_words, attn, source="candidate")
    refs = tuple(
        context_features(inst.image_regions, words, attn, source=f"reference:{k}")
        for k, words in enumerate(inst.reference_words)
    )
    return candidate, GroundTruthSet(image_regions=inst.image_regions, reference_contexts=refs)


def score_loaded(inst: EvaluationInstance, attn: AttentionConfig, cfg: ScoringConfig) -> ScoredInstance:
    candidate, gt = _contexts(inst, attn)
    try:
        scores = score_instance(candidate, gt, cfg)
    except UsageError as exc:
        raise UsageError(f"instance {inst.instance_id}: {exc}") from None
    return ScoredInstance(
        instance_id=inst.instance_id,
        scores=scores,
        judgment=inst.manifest.judgment,
        tags=inst.manifest.tags,
    )


def score_manifest(
    entries: list[InstanceManifest],
    attn: AttentionConfig | None = None,
    cfg: ScoringConfig | None = None,
    jobs: int = 1,
) -> list[ScoredInstance]:
    """Score every manifest entry, in manifest order regardless of ``jobs``."""
    attn = attn or AttentionConfig()
    cfg = cfg or ScoringConfig()

    def work(entry: InstanceManifest) -> ScoredInstance:
        return score_loaded(load_instance(entry), attn, cfg)

    if jobs <= 1 or len(entries) <= 1:
        return [work(e) for e in entries]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, entries))


def metric_names(modes) -> list[str]:
    return [f"{mode.value}.{axis}" for mode in modes for axis in ("relevance", "extraness", "omission")]


def _flat_scores(scored: ScoredInstance) -> dict[str, float]:
    flat = {}
    for mode, score in scored.scores.items():
        flat[f"{mode.value}.relevance"] = score.relevance
        flat[f"{mode.value}.extraness"] = score.extraness
        flat[f"{mode.value}.omission"] = score.omission
    return flat


def rated_instances(scored: list[ScoredInstance]) -> list[RatedInstance]:
    """Rated-corpus view of scored instances; every instance must carry a
    rating judgment."""
    out = []
    for s in scored:
        if not isinstance(s.judgment, RatingJudgment):
            raise UsageError(f"instance {s.instance_id} has no rating judgment")
        out.append(
            RatedInstance(
                instance_id=s.instance_id,
                human_rating=s.judgment.rating,
                scores=_flat_scores(s),
                scale=s.judgment.scale,
            )
        )
    return out


def caption_pairs(scored: list[ScoredInstance]) -> list[CaptionPair]:
    """Pair-corpus view: groups instances by pair id and checks both sides
    agree on category and human choice."""
    sides: dict[str, dict[str, ScoredInstance]] = {}
    judgments: dict[str, PairJudgment] = {}
    for s in scored:
        if not isinstance(s.judgment, PairJudgment):
            raise UsageError(f"instance {s.instance_id} has no pair judgment")
        j = s.judgment
        slot = sides.setdefault(j.pair_id, {})
        if j.position in slot:
            raise UsageError(f"pair {j.pair_id}: duplicate position {j.position!r}")
        slot[j.position] = s
        prev = judgments.get(j.pair_id)
        if prev is not None and (prev.category != j.category or prev.human_choice != j.human_choice):
            raise UsageError(f"pair {j.pair_id}: sides disagree on category or human_choice")
        judgments[j.pair_id] = j

    pairs = []
    for pair_id in sorted(sides):
        slot = sides[pair_id]
        if set(slot) != {"first", "second"}:
            raise UsageError(f"pair {pair_id}: needs exactly a 'first' and a 'second' instance")
        j = judgments[pair_id]
        pairs.append(
            CaptionPair(
                pair_id=pair_id,
                category=j.category,
                human_choice=j.human_choice,
                scores_first=_flat_scores(slot["first"]),
                scores_second=_flat_scores(slot["second"]),
            )
        )
    return pairs


def validate_manifest_errors(
    entries: list[InstanceManifest],
    attn: AttentionConfig | None = None,
    threshold: float = 0.65,
) -> tuple[ValidationReport, list[str]]:
    """Machine-identified residuals (against the image regions) vs the true
    error tensors named in the manifest. Entries without true tensors are
    skipped; their ids are returned for the warning report."""
    attn = attn or AttentionConfig()
    records = []
    skipped = []
    for entry in entries:
        if entry.true_extra_path is None or entry.true_missing_path is None:
            skipped.append(entry.instance_id)
            continue
        inst = load_instance(entry, with_true_errors=True)
        candidate, _ = _contexts(inst, attn)
        identified = error_vectors(candidate, inst.image_regions)
        records.append(
            ValidationRecord(
                instance_id=entry.instance_id,
                identified=identified,
                true_extra=inst.true_extra,
                true_missing=inst.true_missing,
            )
        )
    if not records:
        raise UsageError("no instances carry true-error tensors")
    return validate_error_identification(records, threshold=threshold), skipped
