"""Facial landmark containers and rasterization to RGB guidance images.

A landmark set is a flat (N, 2) array of float (x, y) pixel coordinates plus a
named partition into seven polyline groups. The rasterizer draws each group as
a 1-pixel polyline in a fixed color on a black canvas and returns the result as
a [-1, 1] tensor, which is what the decoder normalization layers and the
conditional discriminator consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

# Drawing order and palette are part of the file-format contract: swapping
# either would silently change every rasterized guidance image.
GROUP_ORDER = ("brow_l", "brow_r", "eye_l", "eye_r", "nose", "mouth", "jaw")

GROUP_COLORS = {
    "brow_l": (1.0, 0.0, 0.0),
    "brow_r": (0.0, 1.0, 0.0),
    "eye_l": (0.0, 0.0, 1.0),
    "eye_r": (1.0, 1.0, 0.0),
    "nose": (1.0, 0.0, 1.0),
    "mouth": (0.0, 1.0, 1.0),
    "jaw": (1.0, 1.0, 1.0),
}


@dataclass
class LandmarkSet:
    """Named groups of 2D points in pixel coordinates (x right, y down)."""

    points: np.ndarray
    groups: dict[str, list[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError(f"points must be (N, 2), got {self.points.shape}")
        n = self.points.shape[0]
        seen: set[int] = set()
        for name, idx in self.groups.items():
            if name not in GROUP_ORDER:
                raise ValueError(f"unknown landmark group {name!r}")
            if len(idx) < 2:
                raise ValueError(f"group {name!r} has {len(idx)} point(s); need >= 2")
            for i in idx:
                if not 0 <= i < n:
                    raise ValueError(f"group {name!r} references point {i} out of range")
                if i in seen:
                    raise ValueError(f"point {i} appears in more than one group")
                seen.add(i)
        if len(seen) != n:
            raise ValueError("groups must partition all points")

    def group_points(self, name: str) -> np.ndarray:
        return self.points[self.groups[name]]

    def to_dict(self) -> dict:
        return {
            "points": [[float(x), float(y)] for x, y in self.points],
            "groups": {k: list(map(int, v)) for k, v in self.groups.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LandmarkSet":
        return cls(points=np.asarray(d["points"], dtype=np.float64), groups=dict(d["groups"]))


def bresenham_line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line stepping from (x0, y0) to (x1, y1), inclusive of both ends."""
    pts = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        pts.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return pts


def rasterize_landmarks(landmarks: LandmarkSet, height: int, width: int) -> torch.Tensor:
    """Draw each landmark group as a colored 1-px polyline.

    Returns a (1, 3, H, W) float32 tensor in [-1, 1]; pixels never touched by a
    polyline stay at -1 (black canvas).
    """
    if height < 1 or width < 1:
        raise ValueError("canvas must be at least 1x1")
    canvas = np.zeros((height, width, 3), dtype=np.float32)
    for name in GROUP_ORDER:
        if name not in landmarks.groups:
            continue
        pts = landmarks.group_points(name)
        color = GROUP_COLORS[name]
        ipts = []
        for x, y in pts:
            xi = int(np.rint(x))
            yi = int(np.rint(y))
            if not (0 <= xi < width and 0 <= yi < height):
                raise ValueError(
                    f"landmark ({x:.2f}, {y:.2f}) in group {name!r} falls outside "
                    f"the {width}x{height} canvas"
                )
            ipts.append((xi, yi))
        for (x0, y0), (x1, y1) in zip(ipts[:-1], ipts[1:]):
            for x, y in bresenham_line(x0, y0, x1, y1):
                canvas[y, x] = color
    canvas = canvas * 2.0 - 1.0
    return torch.from_numpy(canvas).permute(2, 0, 1).unsqueeze(0)
