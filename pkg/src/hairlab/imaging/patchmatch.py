"""Randomized nearest-neighbor-field hole filling.

Classic three-phase scheme (random initialization, propagation, random
search) over patch offsets, used to fill hair-region gaps left by warping.
Desk-scale images only; everything runs on numpy views.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .types import Image, Mask


def _valid_source_centers(hole: np.ndarray, r: int) -> np.ndarray:
    """Centers whose full (2r+1)^2 window avoids the hole and the border."""
    h, w = hole.shape
    ok = np.zeros((h, w), dtype=bool)
    if h < 2 * r + 1 or w < 2 * r + 1:
        return ok
    window_hole = ndimage.uniform_filter(hole.astype(np.float64), size=2 * r + 1, mode="constant", cval=1.0)
    ok[r : h - r, r : w - r] = window_hole[r : h - r, r : w - r] < (0.5 / (2 * r + 1) ** 2)
    return ok


def patch_match_fill(
    img: Image,
    hole: Mask,
    patch_size: int = 7,
    iterations: int = 5,
    seed: int = 0,
) -> Image:
    """Fill `hole` pixels with content matched from the rest of the image.

    Pixels outside the hole are returned bit-exactly; filled pixels are
    copied from the centers of the best-matching source patches. The result
    is deterministic for a fixed seed.
    """
    if (img.height, img.width) != (hole.height, hole.width):
        raise ValueError("image/hole dimension mismatch")
    if patch_size < 3 or patch_size % 2 == 0:
        raise ValueError("patch_size must be odd and >= 3")
    hole_b = hole.astype_bool()
    if not hole_b.any():
        return Image(img.data.copy())
    if hole_b.all():
        raise ValueError("hole covers the entire image")

    r = patch_size // 2
    h, w = hole_b.shape
    src_ok = _valid_source_centers(hole_b, r)
    if not src_ok.any():
        # Degenerate geometry: allow patches that graze the hole but keep
        # centers on known pixels inside the border margin.
        src_ok = ~hole_b
        src_ok[:r, :] = src_ok[h - r :, :] = False
        src_ok[:, :r] = src_ok[:, w - r :] = False
    if not src_ok.any():
        raise ValueError("no valid source patches available")

    work = img.data.astype(np.float64).copy()
    # Seed hole pixels with their nearest known pixel so early distance
    # estimates are meaningful.
    _, (iy, ix) = ndimage.distance_transform_edt(hole_b, return_indices=True)
    work[hole_b] = work[iy[hole_b], ix[hole_b]]

    pad = np.pad(work, ((r, r), (r, r), (0, 0)), mode="reflect")

    def patch(yc: int, xc: int) -> np.ndarray:
        return pad[yc : yc + 2 * r + 1, xc : xc + 2 * r + 1]

    def dist(p, q) -> float:
        d = patch(*p) - patch(*q)
        return float((d * d).sum())

    rng = np.random.default_rng(seed)
    holes = np.argwhere(hole_b)
    n = len(holes)
    src_coords = np.argwhere(src_ok)
    init = src_coords[rng.integers(0, len(src_coords), size=n)]
    match = {tuple(p): tuple(q) for p, q in zip(map(tuple, holes), map(tuple, init))}
    best = {p: dist(p, q) for p, q in match.items()}
    hole_set = set(map(tuple, holes))

    order = sorted(hole_set)
    max_dim = max(h, w)
    for it in range(iterations):
        scan = order if it % 2 == 0 else order[::-1]
        step = 1 if it % 2 == 0 else -1
        for p in scan:
            py, px = p
            # Propagation: adopt a scan-direction neighbor's offset.
            for ny, nx in ((py - step, px), (py, px - step)):
                neigh = (ny, nx)
                if neigh in hole_set:
                    qy, qx = match[neigh]
                    cand = (qy + (py - ny), qx + (px - nx))
                    if 0 <= cand[0] < h and 0 <= cand[1] < w and src_ok[cand]:
                        d = dist(p, cand)
                        if d < best[p]:
                            best[p], match[p] = d, cand
            # Random search around the current best match, halving radius.
            qy, qx = match[p]
            radius = max_dim
            while radius >= 1:
                cy = int(rng.integers(max(0, qy - radius), min(h, qy + radius + 1)))
                cx = int(rng.integers(max(0, qx - radius), min(w, qx + radius + 1)))
                if src_ok[cy, cx]:
                    d = dist(p, (cy, cx))
                    if d < best[p]:
                        best[p], match[p] = d, (cy, cx)
                        qy, qx = cy, cx
                radius //= 2
        # Recolor holes from matched centers before the next pass.
        for p, q in match.items():
            work[p] = work[q]
        pad = np.pad(work, ((r, r), (r, r), (0, 0)), mode="reflect")

    out = img.data.copy().astype(np.float64)
    for p, q in match.items():
        out[p] = work[q]
    out[~hole_b] = img.data[~hole_b]
    return Image(np.clip(out, 0.0, 1.0).astype(np.float32))
