"""Extractor command line.

Exit statuses: 0 success, 1 environment failure (missing checkpoint,
unreadable paths), 2 usage errors (argparse).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import build_demo_checkpoint
from .extract import DEFAULT_REGIONS, ExtractionJob, extract


def cmd_extract(args) -> int:
    job = ExtractionJob(
        captions_path=Path(args.captions),
        checkpoint_path=Path(args.checkpoint),
        out_dir=Path(args.out),
        regions=args.regions,
        device=args.device,
    )
    manifest = extract(job)
    print(manifest)
    return 0


def cmd_demo_checkpoint(args) -> int:
    path = build_demo_checkpoint(Path(args.out))
    print(path)
    return 0


def cmd_demo(args) -> int:
    from .demo import run_demo

    return run_demo(Path(args.out), regions=args.regions, scorer=args.scorer)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reoextract",
        description="Produce feature packs (region + word features) from images and captions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="captions JSON-lines + checkpoint -> feature pack")
    p.add_argument("--captions", required=True, help="JSON-lines file: image, candidate, references, judgment")
    p.add_argument("--checkpoint", required=True, help="model checkpoint path")
    p.add_argument("--out", required=True, help="output pack directory")
    p.add_argument("--regions", type=int, default=DEFAULT_REGIONS, help="regions per image (default: %(default)s)")
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("demo-checkpoint", help="write the deterministic demo checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo_checkpoint)

    p = sub.add_parser("demo", help="extract and score a small real-image case study")
    p.add_argument("--out", required=True, help="working directory for images, pack, and scores")
    p.add_argument("--regions", type=int, default=DEFAULT_REGIONS)
    p.add_argument("--scorer", default="reoscore", help="scoring engine CLI executable")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
