"""Geometric image operations about a fixation point.

Rotation and zoom use inverse mapping with bilinear sampling (no forward
splatting holes); translation is a wrap-around roll. All operations are
pure, preserve the [0, 1] intensity range, and keep the input shape
unless noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .retina import _check_fill, _check_fixation, ensure_image, sample_bilinear

__all__ = [
    "BoundingBox",
    "circular_mask",
    "fixation_sample",
    "focus_crop",
    "resize",
    "roll_translate",
    "rotate_about_fixation",
    "zoom_about_fixation",
]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in normalized coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("bounding box coordinates must be finite")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate bounding box {vals}")
        if any(abs(v) > 1.0 for v in vals):
            raise ValueError(f"bounding box outside [-1, 1]: {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)


def _pixel_center_grid(h, w):
    x = (2.0 * np.arange(w) + 1.0) / w - 1.0
    y = (2.0 * np.arange(h) + 1.0) / h - 1.0
    return np.broadcast_to(x[None, :], (h, w)), np.broadcast_to(y[:, None], (h, w))


def rotate_about_fixation(image, fixation, angle: float, fill: float = 0.5) -> np.ndarray:
    """Rotate so content at azimuth t lands at azimuth t + angle (radians)."""
    img = ensure_image(image)
    x0, y0 = _check_fixation(fixation)
    h, w, _ = img.shape
    xg, yg = _pixel_center_grid(h, w)
    dx, dy = xg - x0, yg - y0
    ca, sa = math.cos(angle), math.sin(angle)
    sx = x0 + ca * dx + sa * dy
    sy = y0 - sa * dx + ca * dy
    return sample_bilinear(img, np.stack([sx, sy], axis=-1), fill)


def zoom_about_fixation(image, fixation, factor: float, fill: float = 0.5) -> np.ndarray:
    """Scale radially about the fixation: content at radius r lands at factor * r."""
    factor = float(factor)
    if not 0.05 <= factor <= 20.0:
        raise ValueError(f"zoom factor must lie in [0.05, 20], got {factor:g}")
    img = ensure_image(image)
    x0, y0 = _check_fixation(fixation)
    h, w, _ = img.shape
    xg, yg = _pixel_center_grid(h, w)
    sx = x0 + (xg - x0) / factor
    sy = y0 + (yg - y0) / factor
    return sample_bilinear(img, np.stack([sx, sy], axis=-1), fill)


def roll_translate(image, dx: int, dy: int) -> np.ndarray:
    """Wrap-around integer shift: output[(i+dy) % H, (j+dx) % W] = input[i, j]."""
    img = ensure_image(image)
    return np.roll(img, (int(dy), int(dx)), axis=(0, 1))


def circular_mask(image, fixation, radius: float = 1.0, fill: float = 0.5) -> np.ndarray:
    """Set pixels farther than `radius` from the fixation to fill."""
    radius = float(radius)
    if radius <= 0:
        raise ValueError("mask radius must be positive")
    img = ensure_image(image)
    fill = _check_fill(fill)
    x0, y0 = _check_fixation(fixation)
    h, w, _ = img.shape
    xg, yg = _pixel_center_grid(h, w)
    out = img.copy()
    out[np.hypot(xg - x0, yg - y0) > radius] = fill
    return out


def _crop_padded(img, y_start, x_start, out_h, out_w, fill):
    h, w, c = img.shape
    out = np.full((out_h, out_w, c), float(fill))
    ys, xs = max(y_start, 0), max(x_start, 0)
    ye, xe = min(y_start + out_h, h), min(x_start + out_w, w)
    if ys < ye and xs < xe:
        out[ys - y_start : ye - y_start, xs - x_start : xe - x_start] = img[ys:ye, xs:xe]
    return out


def focus_crop(image, box: BoundingBox, fill: float = 0.5) -> np.ndarray:
    """Crop the smallest square containing the box, centered on the box center.

    Portions of the square outside the raster are padded with fill; the
    square stays centered on the box rather than shifting inward.
    """
    img = ensure_image(image)
    fill = _check_fill(fill)
    h, w, _ = img.shape
    # box edges in continuous pixel coordinates (pixel j spans [j, j+1))
    x_lo, x_hi = (box.x_min + 1) * w / 2.0, (box.x_max + 1) * w / 2.0
    y_lo, y_hi = (box.y_min + 1) * h / 2.0, (box.y_max + 1) * h / 2.0
    side = max(x_hi - x_lo, y_hi - y_lo)
    side_px = max(1, int(math.floor(side + 0.5)))
    cx, cy = (x_lo + x_hi) / 2.0, (y_lo + y_hi) / 2.0
    x_start = int(math.floor(cx - side_px / 2.0 + 0.5))
    y_start = int(math.floor(cy - side_px / 2.0 + 0.5))
    return _crop_padded(img, y_start, x_start, side_px, side_px, fill)


def fixation_sample(
    image,
    fixation,
    min_ratio: float = 0.1,
    circular: bool = False,
    fill: float = 0.5,
) -> np.ndarray:
    """Largest centered square around the fixation that fits the raster.

    The half-side is the distance from the fixation to the nearest image
    edge, floored at min_ratio of the full extent (so the sample side is
    1/10 of the image at a border fixation and the whole image at the
    center, for the default ratio). With `circular` set, the square's
    inscribed circle is applied as a mask.
    """
    min_ratio = float(min_ratio)
    if not 0.0 < min_ratio <= 1.0:
        raise ValueError("min_ratio must lie in (0, 1]")
    img = ensure_image(image)
    fill = _check_fill(fill)
    x0, y0 = _check_fixation(fixation)
    h, w, _ = img.shape
    half = max(min(1.0 - abs(x0), 1.0 - abs(y0)), min_ratio)
    cx, cy = (x0 + 1) * w / 2.0, (y0 + 1) * h / 2.0
    w_px = max(1, int(math.floor(half * w + 0.5)))
    h_px = max(1, int(math.floor(half * h + 0.5)))
    x_start = int(math.floor(cx - w_px / 2.0 + 0.5))
    y_start = int(math.floor(cy - h_px / 2.0 + 0.5))
    out = _crop_padded(img, y_start, x_start, h_px, w_px, fill)
    if circular:
        out = circular_mask(out, (0.0, 0.0), 1.0, fill)
    return out


def resize(image, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize under the pixel-center convention; borders replicate."""
    img = ensure_image(image)
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be positive")
    h, w, _ = img.shape
    xs = (2.0 * np.arange(out_w) + 1.0) / out_w - 1.0
    ys = (2.0 * np.arange(out_h) + 1.0) / out_h - 1.0
    xp = np.clip((xs + 1.0) * w / 2.0 - 0.5, 0.0, w - 1.0)
    yp = np.clip((ys + 1.0) * h / 2.0 - 0.5, 0.0, h - 1.0)
    x0 = np.floor(xp).astype(np.int64)
    y0 = np.floor(yp).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xp - x0)[None, :, None]
    fy = (yp - y0)[:, None, None]
    top = (1 - fx) * img[y0][:, x0] + fx * img[y0][:, x1]
    bot = (1 - fx) * img[y1][:, x0] + fx * img[y1][:, x1]
    return (1 - fy) * top + fy * bot
