"""Operator surface: batch scoring, agreement evaluation, error validation,
and synthetic-corpus generation.

Exit statuses: 0 success, 1 environment/I-O failure, 2 usage or validation
failure. Diagnostics go to stderr as single ``error:``/``warning:`` lines.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

from .attention import DEFAULT_LAMBDA, AttentionConfig
from .errors import UsageError
from .harness import PAIR_CATEGORIES, correlation_report, minmax_normalize, pairwise_accuracy
from .metrics import ALL_MODES, CombineOrder, Mode, RelevanceSim, ScoringConfig
from .tensor import CovKind
from .packio import load_manifest
from .pipeline import caption_pairs, metric_names, rated_instances, score_manifest, validate_manifest_errors
from .synthetic import SyntheticSpec, generate

__all__ = ["RunConfig", "main"]

_AXES = ("relevance", "extraness", "omission")
_COV_FLAGS = {"identity": CovKind.IDENTITY, "diagonal": CovKind.DIAGONAL, "shrinkage": CovKind.SHRINKAGE_FULL}


@dataclass(frozen=True)
class RunConfig:
    """Fully defaulted run settings; an empty flag set is a valid run."""

    manifest: Path | None = None
    modes: tuple[Mode, ...] = ALL_MODES
    lam: float = DEFAULT_LAMBDA
    cov_kind: CovKind = CovKind.DIAGONAL
    ridge: float | None = None
    relevance_sim: RelevanceSim = RelevanceSim.COSINE
    combine_order: CombineOrder = CombineOrder.AVERAGE_THEN_COMBINE
    normalize: bool = False
    out: Path | None = None
    jobs: int = 1
    seed: int = 0

    def attention(self) -> AttentionConfig:
        return AttentionConfig(lam=self.lam)

    def scoring(self) -> ScoringConfig:
        return ScoringConfig(
            modes=self.modes,
            cov_kind=self.cov_kind,
            ridge=self.ridge,
            relevance_sim=self.relevance_sim,
            combine_order=self.combine_order,
        )


def _parse_modes(text: str) -> tuple[Mode, ...]:
    values = [v.strip() for v in text.split(",") if v.strip()]
    try:
        requested = {Mode(v) for v in values}
    except ValueError:
        raise argparse.ArgumentTypeError(f"modes must be a comma list from {{image,reference,combined}}, got {text!r}")
    if not requested:
        raise argparse.ArgumentTypeError("at least one mode is required")
    return tuple(m for m in ALL_MODES if m in requested)


def _parse_ridge(text: str) -> float | None:
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ridge must be a number or 'auto', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("ridge must be non-negative")
    return value


def _run_config(args) -> RunConfig:
    return RunConfig(
        manifest=Path(args.manifest) if getattr(args, "manifest", None) else None,
        modes=args.modes,
        lam=args.lam,
        cov_kind=_COV_FLAGS[args.cov],
        ridge=args.ridge,
        relevance_sim=RelevanceSim(args.relevance_sim),
        combine_order=CombineOrder(args.combine_order),
        normalize=args.normalize,
        out=Path(args.out) if getattr(args, "out", None) else None,
        jobs=args.jobs,
        seed=getattr(args, "seed", 0),
    )


def _add_scoring_flags(p: argparse.ArgumentParser, out_required: bool = False) -> None:
    p.add_argument("--manifest", required=True, help="JSON-lines manifest of the feature pack")
    p.add_argument("--modes", type=_parse_modes, default=ALL_MODES,
                   help="comma list from {image,reference,combined} (default: all)")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                   help="attention softmax temperature (default: %(default)s)")
    p.add_argument("--cov", choices=sorted(_COV_FLAGS), default="diagonal",
                   help="covariance kind for the error distances (default: %(default)s)")
    p.add_argument("--ridge", type=_parse_ridge, default=None, metavar="R|auto",
                   help="covariance ridge; 'auto' scales with the data (default)")
    p.add_argument("--relevance-sim", choices=[v.value for v in RelevanceSim], default="cosine",
                   help="relevance similarity variant (default: %(default)s)")
    p.add_argument("--combine-order", choices=[v.value for v in CombineOrder],
                   default=CombineOrder.AVERAGE_THEN_COMBINE.value,
                   help="how combined mode folds image and reference scores")
    p.add_argument("--normalize", action="store_true",
                   help="also write a max-min normalized companion CSV")
    p.add_argument("--out", required=out_required, default=None, help="output CSV path")
    p.add_argument("--jobs", type=int, default=1, help="parallel scoring workers (default: 1)")


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_score(args) -> None:
    cfg = _run_config(args)
    entries = load_manifest(cfg.manifest)
    scored = score_manifest(entries, cfg.attention(), cfg.scoring(), jobs=cfg.jobs)

    rows = []
    for s in scored:
        for mode in cfg.modes:
            score = s.scores[mode]
            rows.append([s.instance_id, mode.value, _fmt(score.relevance), _fmt(score.extraness), _fmt(score.omission)])
    header = ["instance_id", "mode", *_AXES]
    _write_csv(cfg.out, header, rows)

    if cfg.normalize and rows:
        normalized = [list(r) for r in rows]
        for mode in cfg.modes:
            idx = [i for i, r in enumerate(rows) if r[1] == mode.value]
            for col in range(2, 5):
                norm = minmax_normalize([float(rows[i][col]) for i in idx])
                for j, i in enumerate(idx):
                    normalized[i][col] = _fmt(norm[j])
        companion = cfg.out.with_name(cfg.out.stem + ".normalized" + cfg.out.suffix)
        _write_csv(companion, header, normalized)


def cmd_eval_corr(args) -> None:
    cfg = _run_config(args)
    entries = load_manifest(cfg.manifest)
    scored = score_manifest(entries, cfg.attention(), cfg.scoring(), jobs=cfg.jobs)
    report = correlation_report(rated_instances(scored), metric_names(cfg.modes))
    print(report.as_text())
    if cfg.out:
        rows = [
            [r.metric, r.n, "" if r.tau is None else _fmt(r.tau), "" if r.p_value is None else _fmt(r.p_value), r.note]
            for r in report.rows
        ]
        _write_csv(cfg.out, ["metric", "n", "tau", "p_value", "note"], rows)


def cmd_eval_pairwise(args) -> None:
    cfg = _run_config(args)
    entries = load_manifest(cfg.manifest)
    scored = score_manifest(entries, cfg.attention(), cfg.scoring(), jobs=cfg.jobs)
    pairs = caption_pairs(scored)

    names = metric_names(cfg.modes)
    tables = {name: pairwise_accuracy(pairs, name) for name in names}

    width = max(len("metric"), *(len(n) for n in names))
    cats = [*PAIR_CATEGORIES, "ALL"]
    print(f"{'metric':<{width}}  " + "  ".join(f"{c:>6}" for c in cats))
    for name in names:
        cells = [f"{tables[name][c]:>6.2f}" if c in tables[name] else f"{'n/a':>6}" for c in cats]
        print(f"{name:<{width}}  " + "  ".join(cells))

    if cfg.out:
        rows = [
            [name, c, _fmt(tables[name][c])]
            for name in names
            for c in cats
            if c in tables[name]
        ]
        _write_csv(cfg.out, ["metric", "category", "accuracy"], rows)


def cmd_validate_errors(args) -> None:
    cfg = _run_config(args)
    entries = load_manifest(cfg.manifest)
    report, skipped = validate_manifest_errors(entries, cfg.attention(), threshold=args.threshold)
    if skipped:
        print(f"warning: skipped instances without true-error tensors: {', '.join(skipped)}", file=sys.stderr)

    print(f"{'instance_id':<16}  {'extra':>8}  {'missing':>8}  flagged")
    for rec in report.records:
        print(f"{rec.instance_id:<16}  {rec.extra:>8.4f}  {rec.missing:>8.4f}  {'yes' if rec.flagged else 'no'}")
    print(f"{'MEAN':<16}  {report.mean_extra:>8.4f}  {report.mean_missing:>8.4f}  threshold={report.threshold}")

    if cfg.out:
        rows = [[r.instance_id, _fmt(r.extra), _fmt(r.missing), int(r.flagged)] for r in report.records]
        rows.append(["MEAN", _fmt(report.mean_extra), _fmt(report.mean_missing), ""])
        _write_csv(cfg.out, ["instance_id", "extra_cosine", "missing_cosine", "flagged"], rows)


def cmd_gen_synthetic(args) -> None:
    spec = SyntheticSpec(
        out_dir=Path(args.out),
        seed=args.seed,
        instances=args.instances,
        regions=args.regions,
        words=args.words,
        dim=args.dim,
        levels=args.levels,
        references=args.references,
        max_mix=args.max_mix,
        max_delete=args.max_delete,
        true_errors=args.true_errors,
    )
    manifest = generate(spec)
    print(manifest)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reoscore",
        description="Score captions on relevance/extraness/omission from feature packs "
        "and evaluate agreement with human judgments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score every manifest instance, CSV out")
    _add_scoring_flags(p, out_required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval-corr", help="Kendall tau of each metric against human ratings")
    _add_scoring_flags(p)
    p.set_defaults(func=cmd_eval_corr)

    p = sub.add_parser("eval-pairwise", help="pairwise accuracy per HC/HI/HM/MM category")
    _add_scoring_flags(p)
    p.set_defaults(func=cmd_eval_pairwise)

    p = sub.add_parser("validate-errors", help="cosine of machine-identified vs true error vectors")
    _add_scoring_flags(p)
    p.add_argument("--threshold", type=float, default=0.65, help="flagging threshold (default: %(default)s)")
    p.set_defaults(func=cmd_validate_errors)

    p = sub.add_parser("gen-synthetic", help="write a deterministic synthetic feature pack")
    p.add_argument("--out", required=True, help="output pack directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--regions", type=int, default=36)
    p.add_argument("--words", type=int, default=None)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--references", type=int, default=1)
    p.add_argument("--max-mix", type=float, default=0.8)
    p.add_argument("--max-delete", type=float, default=0.4)
    p.add_argument("--true-errors", action="store_true")
    p.set_defaults(func=cmd_gen_synthetic)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
