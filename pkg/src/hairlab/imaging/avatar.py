"""Procedural portrait generator for desk-scale datasets.

Renders small cartoon heads with a known segmentation, 68 landmark points,
and a pose-prior map. Every region is painted back-to-front into a label
array, so the segmap is a partition by construction. Hair hue is re-centered
so the rendered hair region's circular mean hue equals ``params.hair_hue``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .color import hsv_to_rgb
from .types import Image

# Label ids follow this order everywhere.
AVATAR_LABELS = [
    "background",
    "skin",
    "hair",
    "left_brow",
    "right_brow",
    "eyes",
    "nose",
    "mouth",
    "ears",
    "neck",
    "cloth",
    "accessory",
]

HAIR_STRUCTURES = ("solid", "split", "ombre")

_HUE_NAMES = [
    "red", "orange", "yellow", "chartreuse", "green", "spring",
    "cyan", "azure", "blue", "violet", "magenta", "rose",
]


@dataclass(frozen=True)
class GeneratorSpec:
    """Sampling ranges for avatar parameters. Ranges are (lo, hi), lo <= hi."""

    size: int = 64
    face_rx_range: tuple[float, float] = (0.18, 0.24)
    face_ry_range: tuple[float, float] = (0.24, 0.30)
    face_cy_range: tuple[float, float] = (0.42, 0.50)
    pose_angle_range: tuple[float, float] = (-0.18, 0.18)
    skin_hue_range: tuple[float, float] = (18.0, 38.0)
    skin_sat_range: tuple[float, float] = (0.25, 0.45)
    skin_val_range: tuple[float, float] = (0.65, 0.90)
    hair_hue_range: tuple[float, float] = (0.0, 360.0)
    hair_sat_range: tuple[float, float] = (0.55, 0.90)
    hair_val_range: tuple[float, float] = (0.30, 0.65)
    hair_spread_range: tuple[float, float] = (15.0, 50.0)
    hair_bottom_range: tuple[float, float] = (0.30, 1.80)
    hair_structures: tuple[str, ...] = HAIR_STRUCTURES
    bg_val_range: tuple[float, float] = (0.75, 0.95)
    accessory_prob: float = 0.25

    def __post_init__(self) -> None:
        if self.size < 32:
            raise ValueError("avatar size must be at least 32")
        if not self.hair_structures:
            raise ValueError("hair_structures must be non-empty")
        for name in (
            "face_rx_range", "face_ry_range", "face_cy_range",
            "pose_angle_range", "skin_hue_range", "skin_sat_range",
            "skin_val_range", "hair_hue_range", "hair_sat_range",
            "hair_val_range", "hair_spread_range", "hair_bottom_range",
            "bg_val_range",
        ):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(f"degenerate range for {name}: ({lo}, {hi})")
        if not 0.0 <= self.accessory_prob <= 1.0:
            raise ValueError("accessory_prob must be in [0,1]")


@dataclass(frozen=True)
class AvatarParams:
    """One sampled avatar. Geometry in pixels, hues in degrees."""

    size: int
    face_cx: float
    face_cy: float
    face_rx: float
    face_ry: float
    pose_angle: float
    skin_hue: float
    skin_sat: float
    skin_val: float
    bg_val: float
    cloth_hue: float
    hairline_frac: float
    hair_kx: float
    hair_ky: float
    hair_bottom_frac: float
    hair_structure: str
    hair_hue: float
    hair_hue_spread: float
    hair_sat: float
    hair_val: float
    strand_period: float
    strand_phase: float
    strand_depth: float
    has_accessory: bool


@dataclass(frozen=True)
class AvatarSample:
    image: Image
    segmap: "object"
    keypoints: "object"
    pose_prior: Image
    params: AvatarParams


def _uniform(rng: np.random.Generator, rg: tuple[float, float]) -> float:
    lo, hi = rg
    return float(lo + (hi - lo) * rng.random())


def sample_params(seed: int, spec: GeneratorSpec | None = None) -> AvatarParams:
    """Deterministic parameter draw. Non-hair fields are drawn before hair
    fields so hair-only edits to the dataclass leave the rest untouched."""
    spec = spec or GeneratorSpec()
    rng = np.random.default_rng(seed)
    s = spec.size
    face_cx = s * (0.5 + 0.03 * (2.0 * rng.random() - 1.0))
    face_cy = s * _uniform(rng, spec.face_cy_range)
    face_rx = s * _uniform(rng, spec.face_rx_range)
    face_ry = s * _uniform(rng, spec.face_ry_range)
    pose_angle = _uniform(rng, spec.pose_angle_range)
    skin_hue = _uniform(rng, spec.skin_hue_range)
    skin_sat = _uniform(rng, spec.skin_sat_range)
    skin_val = _uniform(rng, spec.skin_val_range)
    bg_val = _uniform(rng, spec.bg_val_range)
    cloth_hue = 360.0 * rng.random()
    has_accessory = bool(rng.random() < spec.accessory_prob)
    # Brows sit at 0.38*ry above center; keep the hairline above them so a
    # forehead band of skin always exists between brows and hair.
    hairline_frac = _uniform(rng, (0.52, 0.68))
    hair_kx = _uniform(rng, (1.15, 1.35))
    hair_ky = _uniform(rng, (1.10, 1.30))
    hair_bottom_frac = _uniform(rng, spec.hair_bottom_range)
    structure = spec.hair_structures[int(rng.integers(len(spec.hair_structures)))]
    hair_hue = _uniform(rng, spec.hair_hue_range) % 360.0
    hair_hue_spread = _uniform(rng, spec.hair_spread_range)
    hair_sat = _uniform(rng, spec.hair_sat_range)
    hair_val = _uniform(rng, spec.hair_val_range)
    strand_period = _uniform(rng, (3.0, 7.0))
    strand_phase = 2.0 * math.pi * rng.random()
    strand_depth = _uniform(rng, (0.15, 0.30))
    return AvatarParams(
        size=s, face_cx=face_cx, face_cy=face_cy, face_rx=face_rx,
        face_ry=face_ry, pose_angle=pose_angle, skin_hue=skin_hue,
        skin_sat=skin_sat, skin_val=skin_val, bg_val=bg_val,
        cloth_hue=cloth_hue, hairline_frac=hairline_frac, hair_kx=hair_kx,
        hair_ky=hair_ky, hair_bottom_frac=hair_bottom_frac,
        hair_structure=structure, hair_hue=hair_hue,
        hair_hue_spread=hair_hue_spread, hair_sat=hair_sat,
        hair_val=hair_val, strand_period=strand_period,
        strand_phase=strand_phase, strand_depth=strand_depth,
        has_accessory=has_accessory,
    )


def _rotate(pts: np.ndarray, cx: float, cy: float, angle: float) -> np.ndarray:
    c, sn = math.cos(angle), math.sin(angle)
    out = pts.copy().astype(np.float64)
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    out[:, 0] = cx + c * dx - sn * dy
    out[:, 1] = cy + sn * dx + c * dy
    return out


def _ellipse(yy, xx, cx, cy, rx, ry) -> np.ndarray:
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def _capsule(yy, xx, p0, p1, thickness: float) -> np.ndarray:
    """Pixels within `thickness` of segment p0-p1."""
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    denom = vx * vx + vy * vy
    if denom < 1e-12:
        return (xx - p0[0]) ** 2 + (yy - p0[1]) ** 2 <= thickness**2
    t = ((xx - p0[0]) * vx + (yy - p0[1]) * vy) / denom
    t = np.clip(t, 0.0, 1.0)
    px = p0[0] + t * vx
    py = p0[1] + t * vy
    return (xx - px) ** 2 + (yy - py) ** 2 <= thickness**2


def _keypoints(p: AvatarParams) -> np.ndarray:
    cx, cy, rx, ry = p.face_cx, p.face_cy, p.face_rx, p.face_ry
    pts = np.zeros((68, 2), dtype=np.float64)
    # 0-16 jaw: left -> bottom -> right along the face ellipse.
    theta = math.pi - np.arange(17) * (math.pi / 16.0)
    pts[0:17, 0] = cx + rx * np.cos(theta)
    pts[0:17, 1] = cy + ry * np.sin(theta)
    # 17-26 brows: five points each with a small arch.
    brow_y = cy - 0.38 * ry
    arch = np.array([0.0, 0.03, 0.04, 0.03, 0.0]) * ry
    lx = cx - 0.42 * rx
    rxc = cx + 0.42 * rx
    off = np.linspace(-0.22 * rx, 0.22 * rx, 5)
    pts[17:22, 0] = lx + off
    pts[17:22, 1] = brow_y - arch
    pts[22:27, 0] = rxc + off
    pts[22:27, 1] = brow_y - arch
    # 27-30 nose bridge, 30 is the tip.
    pts[27:31, 0] = cx
    pts[27:31, 1] = np.linspace(cy - 0.15 * ry, cy + 0.12 * ry, 4)
    # 31-35 nose base.
    pts[31:36, 0] = cx + np.linspace(-0.12 * rx, 0.12 * rx, 5)
    pts[31:36, 1] = cy + 0.20 * ry
    # 36-47 eyes: six points on each eye ellipse.
    ang = np.deg2rad([180.0, 120.0, 60.0, 0.0, 300.0, 240.0])
    er_x, er_y = 0.14 * rx, 0.09 * ry
    for k, ex in ((36, cx - 0.42 * rx), (42, cx + 0.42 * rx)):
        pts[k : k + 6, 0] = ex + er_x * np.cos(ang)
        pts[k : k + 6, 1] = (cy - 0.12 * ry) - er_y * np.sin(ang)
    # 48-59 outer lip, 60-67 inner lip.
    my = cy + 0.50 * ry
    ang12 = np.deg2rad(180.0 - np.arange(12) * 30.0)
    pts[48:60, 0] = cx + 0.30 * rx * np.cos(ang12)
    pts[48:60, 1] = my - 0.09 * ry * np.sin(ang12)
    ang8 = np.deg2rad(180.0 - np.arange(8) * 45.0)
    pts[60:68, 0] = cx + 0.18 * rx * np.cos(ang8)
    pts[60:68, 1] = my - 0.05 * ry * np.sin(ang8)
    # Pose tilts the inner features, not the head outline.
    pts[17:] = _rotate(pts[17:], cx, cy, p.pose_angle)
    return pts


def render_avatar(params: AvatarParams) -> AvatarSample:
    from ..maskops import KeypointSet, SegMap

    p = params
    s = p.size
    cx, cy, rx, ry = p.face_cx, p.face_cy, p.face_rx, p.face_ry
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    lid = {name: i for i, name in enumerate(AVATAR_LABELS)}
    labels = np.zeros((s, s), dtype=np.int32)

    kp = _keypoints(p)

    # Painter order: cloth, neck, face, hair, ears, then inner features.
    shoulder_y = cy + 1.35 * ry
    half = 0.9 * rx + 0.55 * np.maximum(yy - shoulder_y, 0.0)
    cloth = (yy >= shoulder_y) & (np.abs(xx - cx) <= half)
    labels[cloth] = lid["cloth"]

    neck = (
        (yy >= cy + 0.55 * ry)
        & (yy <= shoulder_y + 0.12 * ry)
        & (np.abs(xx - cx) <= 0.34 * rx)
    )
    labels[neck] = lid["neck"]

    face = _ellipse(yy, xx, cx, cy, rx, ry)
    labels[face] = lid["skin"]

    hairline_y = cy - ry * p.hairline_frac
    hair_bottom = cy + ry * p.hair_bottom_frac
    outer = _ellipse(yy, xx, cx, cy, rx * p.hair_kx, ry * p.hair_ky)
    hair = outer & (yy <= hair_bottom) & (~face | (yy < hairline_y))
    labels[hair] = lid["hair"]

    ear_r = 0.30 * rx
    ear_pts = _rotate(
        np.array([[cx - 1.02 * rx, cy], [cx + 1.02 * rx, cy]]), cx, cy, p.pose_angle
    )
    ears = np.zeros((s, s), dtype=bool)
    for ex, ey in ear_pts:
        ears |= _ellipse(yy, xx, ex, ey, ear_r, 1.4 * ear_r)
    # Ears only replace hair or background so they never eat into the face.
    ears &= (labels == lid["hair"]) | (labels == lid["background"])
    labels[ears] = lid["ears"]

    brow_t = 1.8
    left_brow = _capsule(yy, xx, kp[17], kp[21], brow_t)
    right_brow = _capsule(yy, xx, kp[22], kp[26], brow_t)
    labels[left_brow] = lid["left_brow"]
    labels[right_brow] = lid["right_brow"]

    eyes = np.zeros((s, s), dtype=bool)
    eye_centers = []
    for k in (36, 42):
        ecx = float(np.mean(kp[k : k + 6, 0]))
        ecy = float(np.mean(kp[k : k + 6, 1]))
        eye_centers.append((ecx, ecy))
        eyes |= _ellipse(yy, xx, ecx, ecy, 0.15 * rx + 0.8, 0.10 * ry + 0.8)
    labels[eyes] = lid["eyes"]

    nose = _capsule(yy, xx, kp[27], kp[30], 1.2)
    labels[nose] = lid["nose"]

    mcx = float(np.mean(kp[48:60, 0]))
    mcy = float(np.mean(kp[48:60, 1]))
    mouth = _ellipse(yy, xx, mcx, mcy, 0.31 * rx, 0.10 * ry)
    labels[mouth] = lid["mouth"]

    if p.has_accessory:
        band = hair & (yy >= hairline_y - 3.5) & (yy <= hairline_y - 1.5)
        band &= labels == lid["hair"]
        labels[band] = lid["accessory"]

    # HSV planes, painted in the same order as the labels.
    H = np.full((s, s), 210.0 / 360.0)
    S = np.full((s, s), 0.08)
    V = np.full((s, s), p.bg_val)

    def paint(region, h_deg, sat, val):
        H[region] = (h_deg % 360.0) / 360.0
        S[region] = sat
        V[region] = np.clip(val, 0.02, 0.98)

    paint(labels == lid["cloth"], p.cloth_hue, 0.45, 0.50)
    paint(labels == lid["neck"], p.skin_hue, p.skin_sat, p.skin_val * 0.90)

    face_r2 = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2
    face_sel = labels == lid["skin"]
    paint(face_sel, p.skin_hue, p.skin_sat, p.skin_val)
    V[face_sel] = np.clip(p.skin_val * (1.0 - 0.15 * face_r2[face_sel]), 0.02, 0.98)

    hair_sel = (labels == lid["hair"]) | (labels == lid["accessory"])
    hair_final = labels == lid["hair"]
    if not hair_final.any():
        raise AssertionError("rendered hair region is empty")
    if p.hair_structure == "solid":
        delta = np.zeros((s, s))
    elif p.hair_structure == "split":
        delta = np.where(xx >= cx, 0.5, -0.5) * p.hair_hue_spread
    elif p.hair_structure == "ombre":
        ys = yy[hair_final]
        y0, y1 = float(ys.min()), float(ys.max())
        span = max(y1 - y0, 1.0)
        delta = ((yy - y0) / span - 0.5) * p.hair_hue_spread
    else:
        raise ValueError(f"unknown hair structure: {p.hair_structure}")
    # Re-center on the final hair pixels so the circular mean lands on
    # hair_hue regardless of how the split/gradient covers the region.
    delta = delta - float(delta[hair_final].mean())
    strand = 0.5 + 0.5 * np.sin(2.0 * math.pi * xx / p.strand_period + p.strand_phase)
    hair_v = p.hair_val * (1.0 - p.strand_depth * strand)
    H[hair_sel] = ((p.hair_hue + delta[hair_sel]) % 360.0) / 360.0
    S[hair_sel] = p.hair_sat
    V[hair_sel] = np.clip(hair_v[hair_sel], 0.02, 0.98)
    if p.has_accessory:
        paint(labels == lid["accessory"], p.cloth_hue + 180.0, 0.70, 0.60)

    paint(labels == lid["ears"], p.skin_hue, p.skin_sat, p.skin_val * 0.85)
    brow_sel = (labels == lid["left_brow"]) | (labels == lid["right_brow"])
    paint(brow_sel, p.hair_hue, p.hair_sat * 0.6, 0.15)
    paint(labels == lid["eyes"], 0.0, 0.05, 0.95)
    for ecx, ecy in eye_centers:
        pupil = _ellipse(yy, xx, ecx, ecy, 0.05 * rx + 0.6, 0.05 * ry + 0.6)
        pupil &= labels == lid["eyes"]
        paint(pupil, 220.0, 0.30, 0.15)
    paint(labels == lid["nose"], p.skin_hue, p.skin_sat, p.skin_val * 0.78)
    paint(labels == lid["mouth"], 355.0, 0.60, 0.55)

    hsv = np.stack([H, S, V], axis=-1)
    rgb = hsv_to_rgb(hsv).astype(np.float32)
    image = Image(np.clip(rgb, 0.0, 1.0))

    if kp.min() < 0 or kp[:, 0].max() > s - 1 or kp[:, 1].max() > s - 1:
        raise AssertionError("keypoints left the canvas; shrink spec ranges")

    segmap = SegMap(labels=labels, label_set=list(AVATAR_LABELS))
    keypoints = KeypointSet(points=kp, eyebrow_range=(17, 26))

    prior = np.zeros((s, s), dtype=np.float64)
    prior[cloth] = 0.25
    prior[neck] = 0.40
    prior[face] = 0.55 + 0.40 * np.clip(1.0 - face_r2[face], 0.0, 1.0)
    for ex, ey in ear_pts:
        prior[_ellipse(yy, xx, ex, ey, ear_r, 1.4 * ear_r)] = 0.50
    for fx, fy in (*eye_centers, (float(kp[30, 0]), float(kp[30, 1])), (mcx, mcy)):
        prior[_ellipse(yy, xx, fx, fy, 1.5, 1.5)] = 1.0
    pose_prior = Image(np.clip(prior, 0.0, 1.0).astype(np.float32)[:, :, None])

    return AvatarSample(
        image=image, segmap=segmap, keypoints=keypoints,
        pose_prior=pose_prior, params=p,
    )


def generate_avatar(seed: int, spec: GeneratorSpec | None = None) -> AvatarSample:
    return render_avatar(sample_params(seed, spec))


def avatar_caption(params: AvatarParams) -> str:
    """Deterministic text description used for conditioning."""
    bucket = int(round(params.hair_hue / 30.0)) % 12
    color = _HUE_NAMES[bucket]
    if params.hair_bottom_frac < 0.7:
        length = "short"
    elif params.hair_bottom_frac < 1.2:
        length = "medium"
    else:
        length = "long"
    structure = {"solid": "", "split": "two-tone ", "ombre": "ombre "}[
        params.hair_structure
    ]
    return f"a portrait of a person with {length} {structure}{color} hair"
