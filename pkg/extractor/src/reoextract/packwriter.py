"""Feature-pack writer, independent of the scoring engine.

Byte layout (little-endian): magic "REOF", version uint16 (1), dtype uint8
(1 = float32 LE), ndim uint8 (2), dims 2 x uint32, then the row-major
float32 payload. Manifests are UTF-8 JSON-lines with manifest-relative
tensor paths.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"REOF"
VERSION = 1
DTYPE_FLOAT32_LE = 1


def write_tensor(path, array) -> None:
    """Write a 2-D float32 tensor file; byte-deterministic."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"tensor must be non-empty 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    header = struct.pack("<4sHBB2I", MAGIC, VERSION, DTYPE_FLOAT32_LE, 2, arr.shape[0], arr.shape[1])
    Path(path).write_bytes(header + arr.tobytes())


def write_manifest(path, records: list[dict]) -> Path:
    """Write manifest lines with deterministic key order."""
    path = Path(path)
    path.write_text(
        "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records),
        encoding="utf-8",
    )
    return path
