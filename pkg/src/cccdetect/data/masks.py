"""Ground-truth vessel masks from centerlines.

Each pixel takes the max over all densified centerline points of a
Gaussian of the distance beyond the local radius, so vessel interiors
saturate at 1 and edges fall off smoothly.
"""

from __future__ import annotations

import numpy as np

from cccdetect.data.types import CenterlineSet, MaskConfig

DENSIFY_SPACING = 0.5  # px
SUPPORT_SIGMAS = 4.0   # beyond radius + 4*sigma the contribution is dropped


def densify_polyline(poly: np.ndarray, spacing: float = DENSIFY_SPACING) -> np.ndarray:
    """Resample an (x, y, r) polyline so consecutive points are <= spacing apart."""
    pieces = [poly[:1]]
    for a, b in zip(poly[:-1], poly[1:]):
        seg = float(np.hypot(b[0] - a[0], b[1] - a[1]))
        n = max(1, int(np.ceil(seg / spacing)))
        ts = np.linspace(0.0, 1.0, n + 1)[1:]
        pieces.append(a[None, :] + ts[:, None] * (b - a)[None, :])
    return np.concatenate(pieces, axis=0)


def gaussian_mask(centerlines: CenterlineSet, height: int, width: int,
                  cfg: MaskConfig = MaskConfig()) -> np.ndarray:
    """Render an (H, W) float32 mask in [0, 1] from centerline polylines."""
    if height < 1 or width < 1:
        raise ValueError(f"mask dimensions must be positive, got {height}x{width}")
    mask = np.zeros((height, width), dtype=np.float32)
    sigma = cfg.sigma_px
    inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma)
    for poly in centerlines.polylines:
        for x, y, r in densify_polyline(poly):
            reach = r + SUPPORT_SIGMAS * sigma
            x0 = max(0, int(np.floor(x - reach)))
            x1 = min(width - 1, int(np.ceil(x + reach)))
            y0 = max(0, int(np.floor(y - reach)))
            y1 = min(height - 1, int(np.ceil(y + reach)))
            if x0 > x1 or y0 > y1:
                continue
            gy = np.arange(y0, y1 + 1, dtype=np.float64)
            gx = np.arange(x0, x1 + 1, dtype=np.float64)
            d = np.hypot(gy[:, None] - y, gx[None, :] - x)
            excess = np.maximum(0.0, d - r)
            vals = np.exp(-np.square(excess) * inv_two_sigma_sq).astype(np.float32)
            np.maximum(mask[y0:y1 + 1, x0:x1 + 1], vals, out=mask[y0:y1 + 1, x0:x1 + 1])
    return mask
