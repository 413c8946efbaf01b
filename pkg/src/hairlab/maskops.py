"""Segmentation-label algebra and hair-agnostic mask construction.

The style stage keeps facial features plus skin below a brow-fitted curve
(everything else is editable); the color stage edits the union of source and
proxy hair; the restore region is source hair the proxy no longer covers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imaging.types import Mask

# Labels kept verbatim during the style stage. Cloth is opt-in.
PRESERVE_LABELS = ("eyes", "left_brow", "right_brow", "nose", "mouth", "ears", "neck")


@dataclass(frozen=True)
class SegMap:
    """Per-pixel label ids over an ordered label-name list."""

    labels: np.ndarray
    label_set: list[str] = field(
        default_factory=lambda: [
            "background", "skin", "hair", "left_brow", "right_brow", "eyes",
            "nose", "mouth", "ears", "neck", "cloth", "accessory",
        ]
    )

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("labels must be a 2-D integer array")
        if len(self.label_set) != len(set(self.label_set)):
            raise ValueError("duplicate names in label_set")
        for required in ("hair", "skin"):
            if required not in self.label_set:
                raise ValueError(f"label_set must contain '{required}'")
        if arr.size and (arr.min() < 0 or arr.max() >= len(self.label_set)):
            raise ValueError("label id out of range for label_set")
        object.__setattr__(self, "labels", arr.astype(np.int32))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def id_of(self, name: str) -> int:
        try:
            return self.label_set.index(name)
        except ValueError:
            raise ValueError(f"unknown label name: {name!r}") from None


@dataclass(frozen=True)
class KeypointSet:
    """68 landmark points; eyebrow_range is an inclusive 0-based index pair
    covering exactly the 10 brow points (positions 18-27 in 1-based order)."""

    points: np.ndarray
    eyebrow_range: tuple[int, int] = (17, 26)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (68, 2):
            raise ValueError(f"expected 68 (x, y) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("keypoints must be finite")
        n, m = self.eyebrow_range
        if m - n != 9 or n < 0 or m >= 68:
            raise ValueError(f"eyebrow_range must span 10 points, got ({n}, {m})")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "eyebrow_range", (int(n), int(m)))

    def brow_points(self) -> np.ndarray:
        n, m = self.eyebrow_range
        return self.points[n : m + 1]


@dataclass(frozen=True)
class BezierCurve:
    """Cubic Bezier with equally spaced control abscissae, so x(t) is linear
    in t and the curve is a function of x."""

    control_points: np.ndarray

    def __post_init__(self) -> None:
        cp = np.asarray(self.control_points, dtype=np.float64)
        if cp.shape != (4, 2):
            raise ValueError("cubic curve needs exactly 4 control points")
        if cp[3, 0] <= cp[0, 0]:
            raise ValueError("control abscissae must increase")
        object.__setattr__(self, "control_points", cp)

    def point_at(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        basis = _bernstein3(t)
        return basis @ self.control_points

    def y_at(self, x: np.ndarray | float) -> np.ndarray:
        """Evaluate by abscissa; x outside the span clamps to the endpoints."""
        cp = self.control_points
        t = (np.asarray(x, dtype=np.float64) - cp[0, 0]) / (cp[3, 0] - cp[0, 0])
        t = np.clip(t, 0.0, 1.0)
        return _bernstein3(t) @ cp[:, 1]


def _bernstein3(t: np.ndarray) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    u = 1.0 - t
    return np.stack([u**3, 3.0 * t * u**2, 3.0 * t**2 * u, t**3], axis=-1)


def select_region(seg: SegMap, labels: set[str] | frozenset[str]) -> Mask:
    ids = [seg.id_of(name) for name in sorted(labels)]
    out = np.zeros(seg.labels.shape, dtype=np.uint8)
    for i in ids:
        out |= (seg.labels == i).astype(np.uint8)
    return Mask(out)


def fit_brow_curve(
    kp: KeypointSet, height: int, margin_frac: float = 0.02
) -> BezierCurve:
    """Least-squares cubic fit through the 10 brow points, shifted down by
    margin_frac * height so brow pixels stay above the returned curve."""
    brows = kp.brow_points()
    x = brows[:, 0]
    y = brows[:, 1]
    x0, x1 = float(x.min()), float(x.max())
    if x1 - x0 < 1e-9:
        raise ValueError("brow points are degenerate (no horizontal extent)")
    t = (x - x0) / (x1 - x0)
    basis = _bernstein3(t)
    ctrl_y, *_ = np.linalg.lstsq(basis, y, rcond=None)
    margin = margin_frac * float(height)
    ctrl_x = np.linspace(x0, x1, 4)
    cp = np.stack([ctrl_x, ctrl_y + margin], axis=-1)
    return BezierCurve(cp)


def below_curve_mask(curve: BezierCurve, height: int, width: int) -> Mask:
    """Pixel (x, j) is set when its center ordinate j + 0.5 lies below the
    curve, so a line at y = H/2 selects exactly the bottom half rows."""
    xs = np.arange(width, dtype=np.float64)
    curve_y = curve.y_at(xs)
    rows = np.arange(height, dtype=np.float64)[:, None] + 0.5
    return Mask((rows > curve_y[None, :]).astype(np.uint8))


def build_style_agnostic_mask(
    seg: SegMap,
    kp: KeypointSet,
    margin_frac: float = 0.02,
    keep_cloth: bool = False,
) -> Mask:
    """Pixels to KEEP during the style stage: preserved facial labels plus
    skin below the brow curve. Hair is never included."""
    skin = select_region(seg, {"skin"})
    if skin.count() == 0:
        raise ValueError("segmap has no skin pixels")
    preserve = set(PRESERVE_LABELS)
    if keep_cloth and "cloth" in seg.label_set:
        preserve.add("cloth")
    kept = select_region(seg, preserve)
    curve = fit_brow_curve(kp, seg.height, margin_frac)
    below = below_curve_mask(curve, seg.height, seg.width)
    return kept | (skin & below)


def build_color_stage_mask(source_hair: Mask, proxy_hair: Mask) -> Mask:
    if source_hair.data.shape != proxy_hair.data.shape:
        raise ValueError("mask dimensions differ")
    return source_hair | proxy_hair


def restore_region(source_hair: Mask, proxy_hair: Mask) -> Mask:
    """Source hair the proxy no longer covers; filled by patch-match later."""
    if source_hair.data.shape != proxy_hair.data.shape:
        raise ValueError("mask dimensions differ")
    return source_hair & ~proxy_hair
