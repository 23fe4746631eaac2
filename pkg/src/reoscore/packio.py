"""Feature-pack interchange: binary tensor files and JSON-lines manifests.

Tensor file byte layout (all integers little-endian):

    offset 0   magic           4 bytes, b"REOF"
    offset 4   version         uint16, currently 1
    offset 6   dtype code      uint8, 1 = float32 little-endian
    offset 7   ndim            uint8, 2 for feature tensors
    offset 8   dims            ndim x uint32 (rows, cols)
    offset 16  payload         rows*cols float32, row-major

The layout is fully specified so that independently written packs (e.g. by
a feature extractor in another process or language) parse identically.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorpusError, DataError, FormatError
from .harness import PAIR_CATEGORIES
from .tensor import FeatureTensor

__all__ = [
    "MAGIC",
    "VERSION",
    "DTYPE_FLOAT32_LE",
    "RatingJudgment",
    "PairJudgment",
    "InstanceManifest",
    "write_tensor",
    "read_tensor",
    "read_tensor_header",
    "load_manifest",
]

MAGIC = b"REOF"
VERSION = 1
DTYPE_FLOAT32_LE = 1

_PREFIX = struct.Struct("<4sHBB")


def write_tensor(path, tensor: FeatureTensor) -> None:
    """Write a tensor file; byte-deterministic for identical input."""
    header = _PREFIX.pack(MAGIC, VERSION, DTYPE_FLOAT32_LE, 2) + struct.pack(
        "<2I", tensor.rows, tensor.cols
    )
    payload = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def _parse_header(raw: bytes, path) -> tuple[int, int, int]:
    """Validate the fixed header; returns (rows, cols, payload_offset)."""
    if len(raw) < _PREFIX.size:
        raise FormatError(f"{path}: truncated header, {len(raw)} bytes", offset=0)
    magic, version, dtype, ndim = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {VERSION}", offset=4)
    if dtype != DTYPE_FLOAT32_LE:
        raise FormatError(f"{path}: unknown dtype code {dtype}", offset=6)
    if ndim != 2:
        raise FormatError(f"{path}: feature tensors must be 2-D, got ndim={ndim}", offset=7)
    dims_end = _PREFIX.size + 4 * ndim
    if len(raw) < dims_end:
        raise FormatError(f"{path}: truncated dims", offset=_PREFIX.size)
    rows, cols = struct.unpack_from("<2I", raw, _PREFIX.size)
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: invalid dims ({rows}, {cols})", offset=_PREFIX.size)
    return rows, cols, dims_end


def read_tensor_header(path) -> tuple[int, int]:
    """(rows, cols) from a tensor file, validating header and payload length
    without reading the payload."""
    p = Path(path)
    with open(p, "rb") as fh:
        raw = fh.read(_PREFIX.size + 8)
        rows, cols, offset = _parse_header(raw, p)
        size = p.stat().st_size
    expected = offset + rows * cols * 4
    if size != expected:
        raise FormatError(f"{p}: payload length mismatch, expected {expected} bytes, got {size}", offset=offset)
    return rows, cols


def read_tensor(path) -> FeatureTensor:
    """Exact inverse of write_tensor, with full validation."""
    p = Path(path)
    raw = p.read_bytes()
    rows, cols, offset = _parse_header(raw, p)
    expected = rows * cols * 4
    actual = len(raw) - offset
    if actual != expected:
        raise FormatError(
            f"{p}: payload length mismatch, expected {expected} bytes, got {actual}", offset=offset
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=offset)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{p}: non-finite value at element {i} (row {i // cols}, col {i % cols})")
    return FeatureTensor(flat.reshape(rows, cols))


# ---------------------------------------------------------------------------
# Manifests


@dataclass(frozen=True)
class RatingJudgment:
    rating: float
    scale: tuple[float, float]


@dataclass(frozen=True)
class PairJudgment:
    pair_id: str
    position: str
    category: str
    human_choice: str


@dataclass(frozen=True)
class InstanceManifest:
    """One validated manifest record; tensor paths are resolved and their
    headers already checked."""

    instance_id: str
    image_path: Path
    candidate_path: Path
    reference_paths: tuple[Path, ...]
    judgment: RatingJudgment | PairJudgment | None = None
    true_extra_path: Path | None = None
    true_missing_path: Path | None = None
    tags: dict = field(default_factory=dict)
    regions: int = 0
    dim: int = 0


def _parse_judgment(obj, line_no: int, instance_id: str):
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: judgment must be an object (instance {instance_id})")
    kind = obj.get("kind")
    if kind == "rating":
        try:
            rating = float(obj["rating"])
            lo, hi = (float(v) for v in obj["scale"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"line {line_no}: bad rating judgment ({exc}) (instance {instance_id})") from None
        if not lo < hi:
            raise CorpusError(f"line {line_no}: rating scale [{lo}, {hi}] is empty (instance {instance_id})")
        if not lo <= rating <= hi:
            raise CorpusError(
                f"line {line_no}: rating {rating} outside scale [{lo}, {hi}] (instance {instance_id})"
            )
        return RatingJudgment(rating=rating, scale=(lo, hi))
    if kind == "pair":
        try:
            pj = PairJudgment(
                pair_id=str(obj["pair_id"]),
                position=str(obj["position"]),
                category=str(obj["category"]),
                human_choice=str(obj["human_choice"]),
            )
        except KeyError as exc:
            raise CorpusError(f"line {line_no}: pair judgment missing field {exc} (instance {instance_id})") from None
        if pj.position not in ("first", "second"):
            raise CorpusError(f"line {line_no}: bad pair position {pj.position!r} (pair {pj.pair_id})")
        if pj.category not in PAIR_CATEGORIES:
            raise CorpusError(f"line {line_no}: unknown category {pj.category!r} (pair {pj.pair_id})")
        if pj.human_choice not in ("first", "second"):
            raise CorpusError(f"line {line_no}: bad human_choice {pj.human_choice!r} (pair {pj.pair_id})")
        return pj
    raise CorpusError(f"line {line_no}: judgment kind must be 'rating' or 'pair', got {kind!r} (instance {instance_id})")


def _checked_tensor_path(base: Path, rel, line_no: int, instance_id: str, role: str) -> tuple[Path, int, int]:
    if not isinstance(rel, str) or not rel:
        raise CorpusError(f"line {line_no}: {role} must be a non-empty path (instance {instance_id})")
    path = (base / rel).resolve()
    if not path.is_file():
        raise CorpusError(f"{role} {path} does not exist (instance {instance_id})")
    try:
        rows, cols = read_tensor_header(path)
    except FormatError as exc:
        raise CorpusError(f"{role} invalid (instance {instance_id}): {exc}") from None
    return path, rows, cols


def load_manifest(path) -> list[InstanceManifest]:
    """Parse and fully validate a JSON-lines manifest.

    Paths are resolved relative to the manifest's directory; every
    referenced tensor must exist with a valid header, and all tensors must
    share the feature dimension corpus-wide. Either the whole corpus loads
    or a CorpusError pinpoints the problem.
    """
    manifest_path = Path(path)
    base = manifest_path.resolve().parent
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{manifest_path}: not valid UTF-8 ({exc})") from None

    corpus_dim: int | None = None
    dim_owner = ""
    seen_ids: set[str] = set()
    out: list[InstanceManifest] = []

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: malformed JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise CorpusError(f"line {line_no}: expected a JSON object")

        instance_id = obj.get("instance_id")
        if not isinstance(instance_id, str) or not instance_id:
            raise CorpusError(f"line {line_no}: missing or empty 'instance_id'")
        if instance_id in seen_ids:
            raise CorpusError(f"line {line_no}: duplicate instance_id {instance_id!r}")
        seen_ids.add(instance_id)

        for required in ("image_tensor", "candidate_words"):
            if required not in obj:
                raise CorpusError(f"line {line_no}: missing field {required!r} (instance {instance_id})")

        image_path, regions, dim = _checked_tensor_path(base, obj["image_tensor"], line_no, instance_id, "image_tensor")
        shapes: list[tuple[str, int, int]] = [("image_tensor", regions, dim)]

        candidate_path, _, cand_dim = _checked_tensor_path(
            base, obj["candidate_words"], line_no, instance_id, "candidate_words"
        )
        shapes.append(("candidate_words", 0, cand_dim))

        refs_field = obj.get("reference_words", [])
        if not isinstance(refs_field, list):
            raise CorpusError(f"line {line_no}: reference_words must be a list (instance {instance_id})")
        reference_paths = []
        for k, rel in enumerate(refs_field):
            ref_path, _, ref_dim = _checked_tensor_path(base, rel, line_no, instance_id, f"reference_words[{k}]")
            reference_paths.append(ref_path)
            shapes.append((f"reference_words[{k}]", 0, ref_dim))

        true_paths: dict[str, Path | None] = {"true_extra": None, "true_missing": None}
        for role in true_paths:
            if obj.get(role) is not None:
                t_path, t_rows, t_dim = _checked_tensor_path(base, obj[role], line_no, instance_id, role)
                if t_rows != regions:
                    raise CorpusError(
                        f"{role} has {t_rows} rows but the image tensor has {regions} (instance {instance_id})"
                    )
                true_paths[role] = t_path
                shapes.append((role, t_rows, t_dim))

        for role, _, d in shapes:
            if corpus_dim is None:
                corpus_dim = d
                dim_owner = f"{role} of instance {instance_id}"
            elif d != corpus_dim:
                raise CorpusError(
                    f"inconsistent feature dimension: {role} of instance {instance_id} has D={d}, "
                    f"but {dim_owner} set D={corpus_dim}"
                )

        tags = obj.get("tags", {})
        if not isinstance(tags, dict):
            raise CorpusError(f"line {line_no}: tags must be an object (instance {instance_id})")

        out.append(
            InstanceManifest(
                instance_id=instance_id,
                image_path=image_path,
                candidate_path=candidate_path,
                reference_paths=tuple(reference_paths),
                judgment=_parse_judgment(obj.get("judgment"), line_no, instance_id),
                true_extra_path=true_paths["true_extra"],
                true_missing_path=true_paths["true_missing"],
                tags=tags,
                regions=regions,
                dim=dim,
            )
        )
    return out
