"""Agreement of metric scores with human judgments.

Provides tie-corrected Kendall rank correlation (tau-b) for 5-point rating
corpora, pairwise accuracy over the HC/HI/HM/MM comparison categories,
cosine validation of machine-identified error vectors against true error
features, and max-min normalization for human-readable report tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedCorrelationError, UsageError
from .metrics import ErrorVectors
from .tensor import FeatureTensor, cosine

__all__ = [
    "PAIR_CATEGORIES",
    "TauCounts",
    "RatedInstance",
    "CaptionPair",
    "ValidationRecord",
    "ValidationReport",
    "CorrelationReport",
    "tau_counts",
    "kendall_tau",
    "kendall_tau_pvalue",
    "pairwise_accuracy",
    "validate_error_identification",
    "minmax_normalize",
    "correlation_report",
]

PAIR_CATEGORIES = ("HC", "HI", "HM", "MM")


# ---------------------------------------------------------------------------
# Kendall tau-b


@dataclass(frozen=True)
class TauCounts:
    """Integer pair-counting statistics behind tau-b.

    n0 = total pairs, n1/n2 = pairs tied in x/y (joint ties included in
    both), n3 = pairs tied in both, c_minus_d = concordant minus discordant.
    """

    n: int
    n0: int
    n1: int
    n2: int
    n3: int
    c_minus_d: int


def _merge_count(ys: list) -> int:
    """Number of strict inversions (y_i > y_j for i < j), by merge sort."""
    n = len(ys)
    work = list(ys)
    buf = [None] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if work[j] < work[i]:
                    buf[k] = work[j]
                    inversions += mid - i
                    j += 1
                else:
                    buf[k] = work[i]
                    i += 1
                k += 1
            buf[k:hi] = work[i:mid] if i < mid else work[j:hi]
            work[lo:hi] = buf[lo:hi]
        width *= 2
    return inversions


def _tie_groups(sorted_vals) -> list[int]:
    sizes = []
    run = 1
    for prev, cur in zip(sorted_vals, sorted_vals[1:]):
        if cur == prev:
            run += 1
        else:
            if run > 1:
                sizes.append(run)
            run = 1
    if run > 1:
        sizes.append(run)
    return sizes


def tau_counts(xs, ys) -> TauCounts:
    """Exact integer statistics for tau-b, computed in O(n log n)."""
    xs = list(xs)
    ys = list(ys)
    if len(xs) != len(ys):
        raise UsageError(f"kendall_tau: length mismatch {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise UsageError(f"kendall_tau: need at least 2 observations, got {n}")

    pairs = sorted(zip(xs, ys))
    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in _tie_groups([p[0] for p in pairs]))
    n3 = sum(t * (t - 1) // 2 for t in _tie_groups(pairs))
    n2 = sum(t * (t - 1) // 2 for t in _tie_groups(sorted(ys)))
    dis = _merge_count([p[1] for p in pairs])
    c_minus_d = n0 - n1 - n2 + n3 - 2 * dis
    return TauCounts(n=n, n0=n0, n1=n1, n2=n2, n3=n3, c_minus_d=c_minus_d)


def kendall_tau(xs, ys) -> float:
    """Tie-corrected Kendall rank correlation (tau-b), in [-1, 1].

    Raises UndefinedCorrelationError when either sequence is all ties.
    """
    c = tau_counts(xs, ys)
    denom_x = c.n0 - c.n1
    denom_y = c.n0 - c.n2
    if denom_x == 0 or denom_y == 0:
        raise UndefinedCorrelationError("kendall_tau is undefined: a sequence is entirely tied")
    return c.c_minus_d / math.sqrt(denom_x * denom_y)


def kendall_tau_pvalue(xs, ys) -> tuple[float, float]:
    """(tau-b, two-sided p) with the tie-corrected normal approximation."""
    xs = list(xs)
    ys = list(ys)
    c = tau_counts(xs, ys)
    denom_x = c.n0 - c.n1
    denom_y = c.n0 - c.n2
    if denom_x == 0 or denom_y == 0:
        raise UndefinedCorrelationError("kendall_tau is undefined: a sequence is entirely tied")
    tau = c.c_minus_d / math.sqrt(denom_x * denom_y)

    n = c.n
    x_groups = _tie_groups(sorted(xs))
    y_groups = _tie_groups(sorted(ys))
    v0 = n * (n - 1) * (2 * n + 5)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in x_groups)
    vu = sum(u * (u - 1) * (2 * u + 5) for u in y_groups)
    v1 = (
        sum(t * (t - 1) for t in x_groups)
        * sum(u * (u - 1) for u in y_groups)
        / (2.0 * n * (n - 1))
    )
    v2 = 0.0
    if n > 2:
        v2 = (
            sum(t * (t - 1) * (t - 2) for t in x_groups)
            * sum(u * (u - 1) * (u - 2) for u in y_groups)
            / (9.0 * n * (n - 1) * (n - 2))
        )
    var = (v0 - vt - vu) / 18.0 + v1 + v2
    if var <= 0.0:
        raise UndefinedCorrelationError("kendall_tau p-value is undefined: zero variance")
    z = c.c_minus_d / math.sqrt(var)
    return tau, math.erfc(abs(z) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Human-judgment containers


@dataclass(frozen=True)
class RatedInstance:
    """One candidate with its human rating and per-metric scores."""

    instance_id: str
    human_rating: float
    scores: dict[str, float] = field(default_factory=dict)
    scale: tuple[float, float] | None = None

    def __post_init__(self):
        if self.scale is not None:
            lo, hi = self.scale
            if not lo <= self.human_rating <= hi:
                raise UsageError(
                    f"instance {self.instance_id}: rating {self.human_rating} outside scale [{lo}, {hi}]"
                )


@dataclass(frozen=True)
class CaptionPair:
    """One human pairwise comparison with both captions' metric scores."""

    pair_id: str
    category: str
    human_choice: str
    scores_first: dict[str, float] = field(default_factory=dict)
    scores_second: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.category not in PAIR_CATEGORIES:
            raise UsageError(f"pair {self.pair_id}: unknown category {self.category!r}")
        if self.human_choice not in ("first", "second"):
            raise UsageError(f"pair {self.pair_id}: human_choice must be 'first' or 'second'")


def pairwise_accuracy(pairs: list[CaptionPair], metric: str) -> dict[str, float]:
    """Percentage of pairs where the metric's preference matches the human
    choice, per category and overall.

    Exact score ties count as half correct. ALL is the unweighted mean of
    the per-category accuracies (over categories that have pairs).
    """
    if not pairs:
        raise UsageError("pairwise_accuracy: no pairs")
    credit: dict[str, float] = {c: 0.0 for c in PAIR_CATEGORIES}
    count: dict[str, int] = {c: 0 for c in PAIR_CATEGORIES}
    for pair in pairs:
        try:
            s1 = pair.scores_first[metric]
            s2 = pair.scores_second[metric]
        except KeyError:
            raise UsageError(f"pair {pair.pair_id}: metric {metric!r} missing") from None
        count[pair.category] += 1
        if s1 == s2:
            credit[pair.category] += 0.5
        else:
            winner = "first" if s1 > s2 else "second"
            if winner == pair.human_choice:
                credit[pair.category] += 1.0
    out = {c: 100.0 * credit[c] / count[c] for c in PAIR_CATEGORIES if count[c] > 0}
    out["ALL"] = float(np.mean([out[c] for c in PAIR_CATEGORIES if c in out]))
    return out


# ---------------------------------------------------------------------------
# Error-identification validation


@dataclass(frozen=True)
class ValidationRecord:
    """Machine-identified error vectors for one instance alongside the true
    (externally identified) error feature tensors."""

    instance_id: str
    identified: ErrorVectors
    true_extra: FeatureTensor
    true_missing: FeatureTensor

    def __post_init__(self):
        shape = (self.identified.extra.rows, self.identified.extra.cols)
        for name, t in (
            ("identified.missing", self.identified.missing),
            ("true_extra", self.true_extra),
            ("true_missing", self.true_missing),
        ):
            if (t.rows, t.cols) != shape:
                raise UsageError(
                    f"instance {self.instance_id}: {name} shape ({t.rows}, {t.cols}) != {shape}"
                )


@dataclass(frozen=True)
class RecordSimilarity:
    instance_id: str
    extra: float
    missing: float
    flagged: bool


@dataclass(frozen=True)
class ValidationReport:
    records: tuple[RecordSimilarity, ...]
    mean_extra: float
    mean_missing: float
    threshold: float

    @property
    def flagged_ids(self) -> tuple[str, ...]:
        return tuple(r.instance_id for r in self.records if r.flagged)


def _mean_row_cosine(identified: FeatureTensor, true: FeatureTensor) -> float:
    a = identified.data.astype(np.float64)
    b = true.data.astype(np.float64)
    return float(np.mean([cosine(a[i], b[i]) for i in range(a.shape[0])]))


def validate_error_identification(records: list[ValidationRecord], threshold: float = 0.65) -> ValidationReport:
    """Mean per-region cosine between machine-identified and true error
    vectors, per record and corpus-wide; records below ``threshold`` on
    either channel are flagged."""
    if not records:
        raise UsageError("validate_error_identification: no records")
    sims = []
    for rec in records:
        extra = _mean_row_cosine(rec.identified.extra, rec.true_extra)
        missing = _mean_row_cosine(rec.identified.missing, rec.true_missing)
        sims.append(
            RecordSimilarity(
                instance_id=rec.instance_id,
                extra=extra,
                missing=missing,
                flagged=extra < threshold or missing < threshold,
            )
        )
    return ValidationReport(
        records=tuple(sims),
        mean_extra=float(np.mean([s.extra for s in sims])),
        mean_missing=float(np.mean([s.missing for s in sims])),
        threshold=threshold,
    )


# ---------------------------------------------------------------------------
# Report helpers


def minmax_normalize(values) -> np.ndarray:
    """(v - min) / (max - min); an all-equal input maps to all 0.5."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 1:
        raise UsageError("minmax_normalize: empty input")
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.full_like(arr, 0.5)
    return (arr - lo) / (hi - lo)


@dataclass(frozen=True)
class CorrelationRow:
    metric: str
    n: int
    tau: float | None
    p_value: float | None
    note: str = ""


@dataclass(frozen=True)
class CorrelationReport:
    rows: tuple[CorrelationRow, ...]

    def as_text(self) -> str:
        width = max([len("metric")] + [len(r.metric) for r in self.rows])
        lines = [f"{'metric':<{width}}  {'n':>6}  {'tau':>8}  {'p-value':>10}"]
        for r in self.rows:
            if r.tau is None:
                lines.append(f"{r.metric:<{width}}  {r.n:>6}  {r.note:>8}  {'':>10}")
            else:
                lines.append(f"{r.metric:<{width}}  {r.n:>6}  {r.tau:>8.4f}  {r.p_value:>10.3g}")
        return "\n".join(lines)


def correlation_report(instances: list[RatedInstance], metrics: list[str]) -> CorrelationReport:
    """Tau-b of every metric against the human ratings.

    A metric whose scores are entirely tied gets an "undefined (all ties)"
    row instead of a number.
    """
    if len(instances) < 2:
        raise UsageError(f"correlation_report: need at least 2 rated instances, got {len(instances)}")
    ratings = [inst.human_rating for inst in instances]
    rows = []
    for metric in metrics:
        try:
            scores = [inst.scores[metric] for inst in instances]
        except KeyError as exc:
            raise UsageError(f"metric {metric!r} missing on instance (key {exc})") from None
        try:
            tau, p = kendall_tau_pvalue(scores, ratings)
            rows.append(CorrelationRow(metric=metric, n=len(instances), tau=tau, p_value=p))
        except UndefinedCorrelationError:
            rows.append(
                CorrelationRow(metric=metric, n=len(instances), tau=None, p_value=None, note="undefined (all ties)")
            )
    return CorrelationReport(rows=tuple(rows))
