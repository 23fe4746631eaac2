"""Region features: salient-region detection reduced to a deterministic
grid, with a hand-crafted per-tile appearance descriptor.

A pretrained object detector would normally supply the N salient regions
and their feature vectors; in environments without detector checkpoints
this module tiles the image into N regions and describes each tile by its
hue profile, saturation/brightness/texture statistics, mean color, and
position. The descriptor layout is part of the checkpoint contract (the
checkpoint's linear layer maps it into the joint embedding space).
"""

from __future__ import annotations

import numpy as np
from PIL import Image

HUE_BINS = 12
# hue profile + sat mean + val mean + val std + edge + rgb means + center xy
DESCRIPTOR_DIM = HUE_BINS + 3 + 1 + 3 + 2


def grid_shape(n: int) -> tuple[int, int]:
    """Largest r <= sqrt(n) with r | n, so r x (n/r) tiles cover exactly n."""
    r = int(np.sqrt(n))
    while n % r:
        r -= 1
    return r, n // r


def region_descriptors(image: Image.Image, n_regions: int, image_size: int = 384) -> np.ndarray:
    """N x DESCRIPTOR_DIM float32 matrix, one row per grid tile."""
    if n_regions < 1:
        raise ValueError("need at least one region")
    rgb = image.convert("RGB").resize((image_size, image_size), Image.BILINEAR)
    hsv = np.asarray(rgb.convert("HSV"), dtype=np.float64) / 255.0
    arr = np.asarray(rgb, dtype=np.float64) / 255.0
    gray = arr.mean(axis=2)

    rows, cols = grid_shape(n_regions)
    ys = np.linspace(0, image_size, rows + 1, dtype=int)
    xs = np.linspace(0, image_size, cols + 1, dtype=int)

    out = np.zeros((n_regions, DESCRIPTOR_DIM), dtype=np.float64)
    idx = 0
    for i in range(rows):
        for j in range(cols):
            tile_hsv = hsv[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]
            tile_rgb = arr[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]
            tile_gray = gray[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]
            h, s, v = tile_hsv[..., 0], tile_hsv[..., 1], tile_hsv[..., 2]

            # chroma-weighted hue profile: L1-normalized to a hue direction,
            # smoothed circularly, then scaled by chroma confidence so
            # near-gray tiles don't assert an arbitrary hue
            bins = np.minimum((h * HUE_BINS).astype(int), HUE_BINS - 1)
            weights = s * v
            profile = np.bincount(bins.ravel(), weights=weights.ravel(), minlength=HUE_BINS)
            profile = 0.6 * profile + 0.2 * np.roll(profile, 1) + 0.2 * np.roll(profile, -1)
            total = profile.sum()
            if total > 0:
                confidence = weights.mean() / (weights.mean() + 0.06)
                profile = confidence * profile / total
            out[idx, :HUE_BINS] = profile

            base = HUE_BINS
            out[idx, base + 0] = s.mean()
            out[idx, base + 1] = v.mean()
            out[idx, base + 2] = v.std()
            out[idx, base + 3] = np.mean(np.abs(np.diff(tile_gray, axis=0))) + np.mean(
                np.abs(np.diff(tile_gray, axis=1))
            )
            out[idx, base + 4 : base + 7] = tile_rgb.reshape(-1, 3).mean(axis=0)
            out[idx, base + 7] = (j + 0.5) / cols
            out[idx, base + 8] = (i + 0.5) / rows
            idx += 1
    return out.astype(np.float32)
