"""PNG and JSON serialization for images, masks, segmaps, and keypoints.

Images travel as 8-bit sRGB PNG, masks as single-channel 0/255 PNG, and
segmaps as indexed-color PNG with a JSON sidecar mapping palette index to
label name.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .types import Image, Mask


def write_image_png(img: Image, path: str | Path) -> None:
    arr = np.round(img.data * 255.0).astype(np.uint8)
    if arr.shape[2] == 1:
        pil = PILImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(arr, mode="RGB")
    pil.save(str(path), format="PNG")


def read_image_png(path: str | Path) -> Image:
    with PILImage.open(str(path)) as pil:
        if pil.mode in ("RGBA", "P", "LA"):
            pil = pil.convert("RGB")
        arr = np.asarray(pil)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return Image(arr.astype(np.float32) / 255.0)


def read_rgba_png(path: str | Path) -> np.ndarray:
    """RGBA float array in [0,1] for stroke-map intake."""
    with PILImage.open(str(path)) as pil:
        pil = pil.convert("RGBA")
        arr = np.asarray(pil)
    return arr.astype(np.float32) / 255.0


def write_rgba_png(rgba: np.ndarray, path: str | Path) -> None:
    arr = np.round(np.clip(rgba, 0.0, 1.0) * 255.0).astype(np.uint8)
    PILImage.fromarray(arr, mode="RGBA").save(str(path), format="PNG")


def write_mask_png(mask: Mask, path: str | Path) -> None:
    PILImage.fromarray(mask.data * 255, mode="L").save(str(path), format="PNG")


def read_mask_png(path: str | Path) -> Mask:
    with PILImage.open(str(path)) as pil:
        arr = np.asarray(pil.convert("L"))
    return Mask((arr >= 128).astype(np.uint8))


def write_segmap(seg, path: str | Path) -> None:
    """Indexed-color PNG plus `<path>.labels.json` palette sidecar."""
    path = Path(path)
    pil = PILImage.fromarray(seg.labels.astype(np.uint8), mode="P")
    n = len(seg.label_set)
    # Spread palette entries across the hue wheel so the PNG is inspectable.
    palette = []
    for i in range(256):
        if i < n:
            frac = i / max(n - 1, 1)
            palette += [int(255 * frac), int(255 * (1 - frac)), 128 + (i * 37) % 128]
        else:
            palette += [0, 0, 0]
    pil.putpalette(palette)
    pil.save(str(path), format="PNG")
    sidecar = {str(i): name for i, name in enumerate(seg.label_set)}
    Path(str(path) + ".labels.json").write_text(json.dumps(sidecar, indent=2))


def read_segmap(path: str | Path):
    from ..maskops import SegMap

    path = Path(path)
    with PILImage.open(str(path)) as pil:
        if pil.mode != "P":
            raise ValueError(f"segmap PNG must be indexed-color, got mode {pil.mode}")
        labels = np.asarray(pil).astype(np.int32)
    sidecar_path = Path(str(path) + ".labels.json")
    if not sidecar_path.exists():
        raise FileNotFoundError(f"segmap sidecar missing: {sidecar_path}")
    mapping = json.loads(sidecar_path.read_text())
    label_set = [mapping[str(i)] for i in range(len(mapping))]
    return SegMap(labels=labels, label_set=label_set)


def write_keypoints_json(kp, path: str | Path) -> None:
    payload = {
        "points": [[float(x), float(y)] for x, y in kp.points],
        "eyebrow_range": [int(kp.eyebrow_range[0]), int(kp.eyebrow_range[1])],
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def read_keypoints_json(path: str | Path):
    from ..maskops import KeypointSet

    payload = json.loads(Path(path).read_text())
    pts = np.asarray(payload["points"], dtype=np.float64)
    rng = tuple(payload["eyebrow_range"])
    return KeypointSet(points=pts, eyebrow_range=rng)
