"""Deterministic synthetic corpora for tests and demos.

Ground-truth regions are orthonormal unit vectors; a clean candidate gets
one word aligned with each region, so attention locks word i onto region i
and the pipeline recovers the construction almost exactly. Corruption is
then fully controlled:

  corruption flavor      noise is mixed into every word (extra content) and
                         aligned words are deleted (missing content), both
                         growing with the instance's corruption level;
  error-validation flavor  a known region-orthogonal error vector is added
                         per word, and the analytic residuals are written
                         alongside as the true-error tensors.

Same seed, same arguments: bit-identical packs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UsageError
from .packio import write_tensor
from .tensor import FeatureTensor

__all__ = ["SyntheticSpec", "generate"]


@dataclass(frozen=True)
class SyntheticSpec:
    out_dir: Path
    seed: int = 0
    instances: int = 100
    regions: int = 36
    words: int | None = None  # aligned words per candidate; defaults to regions
    dim: int = 64
    levels: int = 5
    references: int = 1
    max_mix: float = 0.8  # noise fraction mixed into words at the top level
    max_delete: float = 0.4  # fraction of aligned words deleted at the top level
    true_errors: bool = False

    def __post_init__(self):
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.regions < 1 or self.dim < self.regions:
            raise UsageError(f"need 1 <= regions <= dim, got regions={self.regions}, dim={self.dim}")
        if self.words is not None and self.words < 1:
            raise UsageError("words must be >= 1")
        if self.levels < 1 or self.instances < 1:
            raise UsageError("levels and instances must be >= 1")
        if not 0.0 <= self.max_mix < 1.0 or not 0.0 <= self.max_delete < 1.0:
            raise UsageError("max_mix and max_delete must be in [0, 1)")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _orthonormal_regions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((d, n)))
    return q.T.copy()


def _orthogonal_noise(rng: np.random.Generator, base: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to ``base``."""
    x = rng.standard_normal(base.shape[0])
    x -= (x @ base) / (base @ base) * base
    return _unit(x)


def generate(spec: SyntheticSpec) -> Path:
    """Write a synthetic pack; returns the manifest path."""
    rng = np.random.default_rng(spec.seed)
    tensor_dir = spec.out_dir / "tensors"
    tensor_dir.mkdir(parents=True, exist_ok=True)

    words = spec.words if spec.words is not None else spec.regions
    lines = []
    for idx in range(spec.instances):
        level = idx % spec.levels
        frac = level / (spec.levels - 1) if spec.levels > 1 else 0.0
        instance_id = f"syn{idx:05d}"

        regions = _orthonormal_regions(rng, spec.regions, spec.dim)
        aligned = regions[np.arange(words) % spec.regions]

        record = {
            "instance_id": instance_id,
            "image_tensor": f"tensors/{instance_id}_img.reof",
            "candidate_words": f"tensors/{instance_id}_cand.reof",
            "reference_words": [f"tensors/{instance_id}_ref{r}.reof" for r in range(spec.references)],
            "judgment": {
                "kind": "rating",
                "rating": float(spec.levels - level),
                "scale": [0.0, float(spec.levels)],
            },
        }

        if spec.true_errors:
            # Error magnitude grows with level; errors stay orthogonal to the
            # region they attach to, so the analytic residuals are exact.
            mag = 0.15 + 0.35 * frac
            errors = np.stack([mag * _orthogonal_noise(rng, aligned[j]) for j in range(words)])
            candidate = aligned + errors
            # residual of g on (g + e) for unit g and e orthogonal to g
            denom = 1.0 + mag * mag
            true_missing = (mag * mag * aligned - errors) / denom
            write_tensor(tensor_dir / f"{instance_id}_textra.reof", FeatureTensor(errors))
            write_tensor(tensor_dir / f"{instance_id}_tmiss.reof", FeatureTensor(true_missing))
            record["true_extra"] = f"tensors/{instance_id}_textra.reof"
            record["true_missing"] = f"tensors/{instance_id}_tmiss.reof"
            record["tags"] = {"level": level, "error_magnitude": round(mag, 6)}
        else:
            mix = spec.max_mix * frac
            keep = words - int(round(spec.max_delete * words * frac))
            keep = max(1, keep)
            noise = np.stack([_orthogonal_noise(rng, aligned[j]) for j in range(words)])
            mixed = np.sqrt(max(0.0, 1.0 - mix * mix)) * aligned + mix * noise
            kept_rows = rng.permutation(words)[:keep]
            kept_rows.sort()
            candidate = mixed[kept_rows]
            record["tags"] = {"level": level, "mix": round(mix, 6), "deleted": words - keep}

        write_tensor(tensor_dir / f"{instance_id}_img.reof", FeatureTensor(regions))
        write_tensor(tensor_dir / f"{instance_id}_cand.reof", FeatureTensor(candidate))
        for r in range(spec.references):
            jitter = 0.05 * np.stack([_orthogonal_noise(rng, aligned[j]) for j in range(words)])
            reference = np.stack([_unit(row) for row in aligned + jitter])
            write_tensor(tensor_dir / f"{instance_id}_ref{r}.reof", FeatureTensor(reference))

        lines.append(json.dumps(record, sort_keys=True))

    manifest_path = spec.out_dir / "manifest.jsonl"
    manifest_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return manifest_path
