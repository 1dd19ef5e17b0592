"""Synthetic "sprite face" renderer with analytic ground truth.

Each sprite is an ellipse face on a flat background with brows, eyes, a nose
bar and a mouth arc. Geometry is controlled by a small parameter vector:
identity-determining fields (skin color, face axes, eye spacing, nose length)
are a pure function of an integer identity seed, while pose and expression are
free per-view attributes. Everything is drawn from closed-form pixel tests
(ellipse/disc inequalities and per-column function graphs), so masks,
landmarks, pose and expression can be recovered exactly, and a renderer at
yaw = 0, open = 0 is bitwise mirror-symmetric.

All geometry fields are stored as fractions of the canvas scale
s = min(H, W); pixel quantities are derived at render time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .landmarks import LandmarkSet

# Sampling ranges for identity geometry, as fractions of min(H, W). Chosen so
# every feature stays strictly inside the face ellipse at the pose extremes.
A_RANGE = (0.28, 0.38)        # face semi-axis, x
B_RANGE = (0.34, 0.44)        # face semi-axis, y
SPACING_RANGE = (0.15, 0.22)  # distance between eye centers
NOSE_RANGE = (0.08, 0.14)     # vertical nose length
SKIN_RANGE = (0.35, 0.85)     # per-channel skin color
YAW_LIMIT = 0.6

# Feature placement, relative to face center and axes.
EYE_ROW = 0.15        # eye row sits at cy - EYE_ROW * b
BROW_ROW = 0.28       # brow row sits at cy - BROW_ROW * b
BROW_HALFW = 0.06     # brow half width, fraction of s
BROW_ARCH = 0.02      # brow arch height, fraction of s
EYE_RADIUS = 0.045    # eye disc radius, fraction of s
NOSE_TOP_DROP = 0.05  # nose starts this far below the eye row, fraction of s
MOUTH_ROW = 0.52      # mouth row sits at cy + MOUTH_ROW * b
MOUTH_HALFW = 0.30    # mouth half width, fraction of a
MOUTH_RISE = 0.26     # fully open mouth dips this fraction of b
MOUTH_THICKNESS = 2   # mouth stroke height in pixels
JAW_POINTS = 9
MOUTH_POINTS = 7

# Fixed feature paint colors, snapped to the 8-bit grid like every sampled
# color so that PNG export round-trips bitwise.
EYE_COLOR = (0.05, 0.05, 0.05)
NOSE_COLOR = (0.45, 0.28, 0.18)
MOUTH_COLOR = (0.65, 0.10, 0.12)

# Minimum L-inf distance of the background from skin and feature colors, so
# image-side estimators can segment the face without knowing the parameters.
BG_MARGIN = 0.15

_ID_STREAM = 0x51DE
_VIEW_STREAM = 0x51DF


def snap_color(c) -> tuple[float, float, float]:
    """Quantize a color to the 8-bit grid as exact float32 values."""
    arr = np.asarray(c, dtype=np.float64)
    q = np.rint(arr * 255.0) / 255.0
    return tuple(float(np.float32(v)) for v in q)


@dataclass(frozen=True)
class SpriteParams:
    """Full description of one sprite view.

    skin_color, face_axes, eye_spacing and nose_len are determined by
    identity_seed; pose_yaw, expression_open and bg_color vary per view.
    """

    identity_seed: int
    skin_color: tuple[float, float, float]
    face_axes: tuple[float, float]
    eye_spacing: float
    nose_len: float
    pose_yaw: float
    expression_open: float
    bg_color: tuple[float, float, float]

    def __post_init__(self) -> None:
        a, b = self.face_axes
        if not (0.0 < a <= 0.48 and 0.0 < b <= 0.48):
            raise ValueError(f"face axes {self.face_axes} must lie in (0, 0.48]")
        if not 0.0 < self.eye_spacing <= 0.25:
            raise ValueError(f"eye spacing {self.eye_spacing} out of range")
        if not 0.0 < self.nose_len <= 0.2:
            raise ValueError(f"nose length {self.nose_len} out of range")
        if abs(self.pose_yaw) > YAW_LIMIT:
            raise ValueError(f"pose_yaw {self.pose_yaw} outside [-{YAW_LIMIT}, {YAW_LIMIT}]")
        if not 0.0 <= self.expression_open <= 1.0:
            raise ValueError(f"expression_open {self.expression_open} outside [0, 1]")
        for name, col in (("skin", self.skin_color), ("bg", self.bg_color)):
            if len(col) != 3 or any(not 0.0 <= v <= 1.0 for v in col):
                raise ValueError(f"{name} color {col} must be three values in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SpriteParams":
        return cls(
            identity_seed=int(d["identity_seed"]),
            skin_color=tuple(d["skin_color"]),
            face_axes=tuple(d["face_axes"]),
            eye_spacing=float(d["eye_spacing"]),
            nose_len=float(d["nose_len"]),
            pose_yaw=float(d["pose_yaw"]),
            expression_open=float(d["expression_open"]),
            bg_color=tuple(d["bg_color"]),
        )


def identity_fields(identity_seed: int) -> dict:
    """Identity-determining geometry and color, a pure function of the seed."""
    rng = np.random.default_rng([_ID_STREAM, int(identity_seed)])
    skin = snap_color(rng.uniform(*SKIN_RANGE, size=3))
    a = float(rng.uniform(*A_RANGE))
    b = float(rng.uniform(*B_RANGE))
    spacing = float(rng.uniform(*SPACING_RANGE))
    nose = float(rng.uniform(*NOSE_RANGE))
    return {
        "skin_color": skin,
        "face_axes": (a, b),
        "eye_spacing": spacing,
        "nose_len": nose,
    }


def _sample_background(rng: np.random.Generator, skin) -> tuple[float, float, float]:
    avoid = [skin, EYE_COLOR, NOSE_COLOR, MOUTH_COLOR]
    for _ in range(200):
        bg = snap_color(rng.uniform(0.0, 1.0, size=3))
        if all(max(abs(bg[i] - c[i]) for i in range(3)) >= BG_MARGIN for c in avoid):
            return bg
    raise RuntimeError("could not sample a background color away from feature colors")


def sample_params(
    identity_seed: int,
    view_seed: int = 0,
    pose_yaw: float | None = None,
    expression_open: float | None = None,
) -> SpriteParams:
    """Draw one sprite view: fixed identity fields plus sampled attributes."""
    rng = np.random.default_rng([_VIEW_STREAM, int(identity_seed), int(view_seed)])
    yaw = float(rng.uniform(-YAW_LIMIT, YAW_LIMIT)) if pose_yaw is None else float(pose_yaw)
    openness = float(rng.uniform(0.0, 1.0)) if expression_open is None else float(expression_open)
    ident = identity_fields(identity_seed)
    bg = _sample_background(rng, ident["skin_color"])
    return SpriteParams(
        identity_seed=int(identity_seed),
        pose_yaw=yaw,
        expression_open=openness,
        bg_color=bg,
        **ident,
    )


@dataclass(frozen=True)
class SpriteGeometry:
    """Pixel-space placement of every feature for a given canvas size."""

    cx: float
    cy: float
    a: float
    b: float
    dx: float
    eye_y: float
    eye_l: float
    eye_r: float
    eye_radius: float
    brow_y: float
    brow_halfw: float
    brow_arch: float
    nose_x: float
    nose_top: float
    nose_bottom: float
    mouth_y: float
    mouth_halfw: float
    mouth_rise: float


def sprite_geometry(params: SpriteParams, height: int, width: int) -> SpriteGeometry:
    s = float(min(height, width))
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    a = params.face_axes[0] * s
    b = params.face_axes[1] * s
    dx = params.pose_yaw * a / 2.0
    eye_y = cy - EYE_ROW * b
    spacing = params.eye_spacing * s
    nose_top = eye_y + NOSE_TOP_DROP * s
    return SpriteGeometry(
        cx=cx,
        cy=cy,
        a=a,
        b=b,
        dx=dx,
        eye_y=eye_y,
        eye_l=cx + dx - spacing / 2.0,
        eye_r=cx + dx + spacing / 2.0,
        eye_radius=EYE_RADIUS * s,
        brow_y=cy - BROW_ROW * b,
        brow_halfw=BROW_HALFW * s,
        brow_arch=BROW_ARCH * s,
        nose_x=cx + dx,
        nose_top=nose_top,
        nose_bottom=nose_top + params.nose_len * s,
        mouth_y=cy + MOUTH_ROW * b,
        mouth_halfw=MOUTH_HALFW * a,
        mouth_rise=params.expression_open * MOUTH_RISE * b,
    )


def _check_canvas(height: int, width: int) -> None:
    if height < 32 or width < 32:
        raise ValueError(f"canvas {width}x{height} below the 32px minimum")
    if height % 64 or width % 64:
        raise ValueError(f"canvas {width}x{height} must be divisible by 64")


def face_mask(params: SpriteParams, height: int, width: int) -> np.ndarray:
    """Exact ellipse-interior test at pixel centers. Returns (H, W) bool."""
    _check_canvas(height, width)
    g = sprite_geometry(params, height, width)
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    return ((xs - g.cx) / g.a) ** 2 + ((ys - g.cy) / g.b) ** 2 <= 1.0


def _arc_rows(x: np.ndarray, center: float, halfw: float, base_y: float, rise: float) -> np.ndarray:
    """y-coordinates of a sine arc sampled at integer columns x."""
    t = (x - (center - halfw)) / (2.0 * halfw)
    return base_y + rise * np.sin(np.pi * t)


def render_sprite(params: SpriteParams, height: int, width: int):
    """Paint one sprite.

    Returns (image, mask, landmarks) where image is (H, W, 3) float32 in
    [0, 1] with every value on the 8-bit grid, mask is the (H, W) bool face
    ellipse, and landmarks carry the seven analytic groups.
    """
    _check_canvas(height, width)
    g = sprite_geometry(params, height, width)

    img = np.empty((height, width, 3), dtype=np.float32)
    img[:] = np.asarray(params.bg_color, dtype=np.float32)
    mask = face_mask(params, height, width)
    img[mask] = np.asarray(params.skin_color, dtype=np.float32)

    eye_color = np.asarray(snap_color(EYE_COLOR), dtype=np.float32)
    nose_color = np.asarray(snap_color(NOSE_COLOR), dtype=np.float32)
    mouth_color = np.asarray(snap_color(MOUTH_COLOR), dtype=np.float32)

    # Brows: thin arcs drawn as per-column function graphs.
    for ex in (g.eye_l, g.eye_r):
        cols = np.arange(math.ceil(ex - g.brow_halfw), math.floor(ex + g.brow_halfw) + 1)
        rows = np.rint(_arc_rows(cols.astype(np.float64), ex, g.brow_halfw, g.brow_y, -g.brow_arch))
        img[rows.astype(int), cols] = eye_color

    # Eyes: filled discs.
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    for ex in (g.eye_l, g.eye_r):
        disc = (xs - ex) ** 2 + (ys - g.eye_y) ** 2 <= g.eye_radius**2
        img[disc] = eye_color

    # Nose: 2px-wide vertical bar.
    nx0 = math.floor(g.nose_x)
    rows = np.arange(int(np.rint(g.nose_top)), int(np.rint(g.nose_bottom)) + 1)
    img[rows[:, None], np.array([nx0, nx0 + 1])[None, :]] = nose_color

    # Mouth: sine arc, MOUTH_THICKNESS px tall, per-column graph.
    mcx = g.cx + g.dx
    cols = np.arange(math.ceil(mcx - g.mouth_halfw), math.floor(mcx + g.mouth_halfw) + 1)
    rows = np.rint(_arc_rows(cols.astype(np.float64), mcx, g.mouth_halfw, g.mouth_y, g.mouth_rise)).astype(int)
    for off in range(MOUTH_THICKNESS):
        img[rows + off, cols] = mouth_color

    return img, mask, sprite_landmarks(params, height, width)


def sprite_landmarks(params: SpriteParams, height: int, width: int) -> LandmarkSet:
    """Analytic landmark groups for one sprite view."""
    g = sprite_geometry(params, height, width)
    pts: list[tuple[float, float]] = []
    groups: dict[str, list[int]] = {}

    def add(name: str, coords) -> None:
        start = len(pts)
        pts.extend((float(x), float(y)) for x, y in coords)
        groups[name] = list(range(start, len(pts)))

    for name, ex in (("brow_l", g.eye_l), ("brow_r", g.eye_r)):
        add(name, [
            (ex - g.brow_halfw, g.brow_y),
            (ex, g.brow_y - g.brow_arch),
            (ex + g.brow_halfw, g.brow_y),
        ])
    r = g.eye_radius
    for name, ex in (("eye_l", g.eye_l), ("eye_r", g.eye_r)):
        add(name, [
            (ex - r, g.eye_y),
            (ex, g.eye_y - 0.6 * r),
            (ex + r, g.eye_y),
            (ex, g.eye_y + 0.6 * r),
        ])
    add("nose", [(g.nose_x, g.nose_top), (g.nose_x, g.nose_bottom)])

    mcx = g.cx + g.dx
    ts = np.linspace(0.0, 1.0, MOUTH_POINTS)
    add("mouth", [
        (mcx - g.mouth_halfw + 2.0 * g.mouth_halfw * t, g.mouth_y + g.mouth_rise * math.sin(math.pi * t))
        for t in ts
    ])

    thetas = np.linspace(math.pi, 0.0, JAW_POINTS)
    add("jaw", [(g.cx + g.a * math.cos(th), g.cy + g.b * math.sin(th)) for th in thetas])

    return LandmarkSet(points=np.asarray(pts, dtype=np.float64), groups=groups)


@dataclass
class SpriteFeatures:
    """Identity and attribute readout for one face image.

    Geometry is in fractions of min(H, W), matching SpriteParams. Fields that
    could not be detected are NaN.
    """

    skin_color: tuple[float, float, float]
    a: float
    b: float
    eye_spacing: float
    nose_len: float
    pose_yaw: float
    expression_open: float


def features_from_params(params: SpriteParams) -> SpriteFeatures:
    return SpriteFeatures(
        skin_color=tuple(float(v) for v in params.skin_color),
        a=float(params.face_axes[0]),
        b=float(params.face_axes[1]),
        eye_spacing=float(params.eye_spacing),
        nose_len=float(params.nose_len),
        pose_yaw=float(params.pose_yaw),
        expression_open=float(params.expression_open),
    )


def analyze_image(img01: np.ndarray) -> SpriteFeatures:
    """Inverse-render sprite features from an (H, W, 3) image in [0, 1].

    Works on clean renders and, with graceful degradation, on generated images:
    background is read from the border, the face is segmented by distance from
    the background color, and features are classified by nearest paint color.
    """
    img = np.asarray(img01, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    h, w, _ = img.shape
    s = float(min(h, w))

    border = np.concatenate([img[0], img[-1], img[:, 0], img[:, -1]], axis=0)
    bg = np.median(border, axis=0)

    face = np.abs(img - bg).max(axis=2) > BG_MARGIN * 0.8
    if face.sum() < 16:
        nan = float("nan")
        return SpriteFeatures((nan, nan, nan), nan, nan, nan, nan, nan, nan)

    ys, xs = np.nonzero(face)
    # Row/column extents of the ellipse give the axes; the centroid gives the
    # center (features are interior, so they do not move the extents).
    row_width = np.zeros(h)
    for r in np.unique(ys):
        cols = xs[ys == r]
        row_width[r] = cols.max() - cols.min() + 1
    col_height = np.zeros(w)
    for c in np.unique(xs):
        rows = ys[xs == c]
        col_height[c] = rows.max() - rows.min() + 1
    a_px = float(row_width.max()) / 2.0
    b_px = float(col_height.max()) / 2.0
    cx = float(xs.mean())
    cy = float(ys.mean())

    skin = np.median(img[face], axis=0)
    protos = np.stack([
        skin,
        np.asarray(EYE_COLOR),
        np.asarray(NOSE_COLOR),
        np.asarray(MOUTH_COLOR),
    ])
    d = np.linalg.norm(img[face][:, None, :] - protos[None, :, :], axis=2)
    label = d.argmin(axis=1)

    def centroid_and_extent(k: int):
        sel = label == k
        if sel.sum() == 0:
            return None
        fy, fx = ys[sel], xs[sel]
        return fx.astype(np.float64), fy.astype(np.float64)

    nan = float("nan")
    yaw = nan
    spacing = nan
    eye = centroid_and_extent(1)
    if eye is not None:
        ex, _ = eye
        yaw = (ex.mean() - cx) / (a_px / 2.0)
        left = ex[ex < ex.mean()]
        right = ex[ex >= ex.mean()]
        if len(left) and len(right):
            spacing = (right.mean() - left.mean()) / s

    nose_len = nan
    nose = centroid_and_extent(2)
    if nose is not None:
        _, ny = nose
        nose_len = (ny.max() - ny.min()) / s

    openness = nan
    mouth = centroid_and_extent(3)
    if mouth is not None and mouth[0].size >= 6:
        mx, my = mouth
        rise = MOUTH_RISE * b_px
        halfw = MOUTH_HALFW * a_px
        if rise > 0 and halfw > 1.0:
            # The arc is y = base + open * rise * sin(pi t) for t in [0, 1]
            # across the mouth span. The detected column span is truncated by
            # rounding, but the true half width is a fixed fraction of the
            # face axis, so rebuild the t map from geometry and fit the sine
            # shape; regression over all mouth pixels averages out rounding.
            mcx = (mx.min() + mx.max()) / 2.0
            t = np.clip((mx - (mcx - halfw)) / (2.0 * halfw), 0.0, 1.0)
            design = np.stack([np.ones_like(t), np.sin(np.pi * t)], axis=1)
            coef, *_ = np.linalg.lstsq(design, my, rcond=None)
            resid = np.abs(design @ coef - my)
            keep = resid <= 2.0
            if keep.sum() >= 6:
                coef, *_ = np.linalg.lstsq(design[keep], my[keep], rcond=None)
            openness = float(np.clip(coef[1] / rise, 0.0, 1.2))

    return SpriteFeatures(
        skin_color=tuple(float(v) for v in skin),
        a=a_px / s,
        b=b_px / s,
        eye_spacing=spacing,
        nose_len=nose_len,
        pose_yaw=float(np.clip(yaw, -1.0, 1.0)) if np.isfinite(yaw) else nan,
        expression_open=openness,
    )
