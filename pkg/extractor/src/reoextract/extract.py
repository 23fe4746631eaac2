"""Batch extraction: caption records plus images in, feature pack out.

Input is a UTF-8 JSON-lines file, one candidate caption per line:

    {"image": "imgs/cat.png", "candidate": "a brown cat",
     "references": ["a tabby cat resting"], "judgment": {...}, "instance_id": "..."}

``image`` paths resolve relative to the captions file; ``judgment`` (same
schema as the scoring engine's manifests) and ``instance_id`` are optional.
Image and word tensors are cached per unique image path / caption text, so
repeated content is written once and shared by manifest reference.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .checkpoint import Checkpoint, load_checkpoint
from .packwriter import write_manifest, write_tensor
from .regions import region_descriptors
from .textenc import word_features

DEFAULT_REGIONS = 36


@dataclass(frozen=True)
class ExtractionJob:
    captions_path: Path
    checkpoint_path: Path
    out_dir: Path
    regions: int = DEFAULT_REGIONS
    device: str = "cpu"  # reserved; the reference encoders run on CPU

    def __post_init__(self):
        object.__setattr__(self, "captions_path", Path(self.captions_path))
        object.__setattr__(self, "checkpoint_path", Path(self.checkpoint_path))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.regions < 1:
            raise ValueError("regions must be >= 1")


def _image_features(path: Path, ckpt: Checkpoint, n_regions: int) -> np.ndarray:
    with Image.open(path) as img:
        desc = region_descriptors(img, n_regions, image_size=ckpt.image_size)
    return (desc.astype(np.float64) @ ckpt.fc_weight.T + ckpt.fc_bias).astype(np.float32)


def _text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def extract(job: ExtractionJob) -> Path:
    """Run the job; returns the manifest path. Undecodable images are
    skipped with a logged id; all other failures abort."""
    ckpt = load_checkpoint(job.checkpoint_path)
    captions_dir = job.captions_path.resolve().parent
    tensor_dir = job.out_dir / "tensors"
    tensor_dir.mkdir(parents=True, exist_ok=True)

    image_cache: dict[Path, str] = {}
    text_cache: dict[str, str] = {}
    records = []

    lines = job.captions_path.read_text(encoding="utf-8").splitlines()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        image_path = (captions_dir / rec["image"]).resolve()
        instance_id = rec.get("instance_id") or f"{image_path.stem}-{line_no:04d}"

        if image_path not in image_cache:
            try:
                feats = _image_features(image_path, ckpt, job.regions)
            except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
                print(f"warning: skipping {instance_id}: cannot decode {image_path} ({exc})", file=sys.stderr)
                image_cache[image_path] = ""
                continue
            rel = f"tensors/img_{_text_key(str(image_path))}.reof"
            write_tensor(job.out_dir / rel, feats)
            image_cache[image_path] = rel
        elif not image_cache[image_path]:
            print(f"warning: skipping {instance_id}: cannot decode {image_path}", file=sys.stderr)
            continue

        def words_path(text: str) -> str:
            key = _text_key(text)
            if key not in text_cache:
                rel = f"tensors/txt_{key}.reof"
                write_tensor(job.out_dir / rel, word_features(text, ckpt))
                text_cache[key] = rel
            return text_cache[key]

        out_rec = {
            "instance_id": instance_id,
            "image_tensor": image_cache[image_path],
            "candidate_words": words_path(rec["candidate"]),
            "reference_words": [words_path(t) for t in rec.get("references", [])],
            "tags": {"checkpoint": ckpt.name, "regions": job.regions},
        }
        if rec.get("judgment") is not None:
            out_rec["judgment"] = rec["judgment"]
        records.append(out_rec)

    return write_manifest(job.out_dir / "manifest.jsonl", records)
