"""Dataset plumbing: manifests, ground-truth masks, synthetic scenes.

Manifests are JSON-lines; every record names an image, a label, and at
least one annotation (bounding boxes or keypoints), with coordinates
either normalized to [-1, 1] or in pixels (converted on load). The scene
generator provides a deterministic 9-class suite (3 shapes x 3 colors)
for desk-scale evaluation.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .imgops import BoundingBox, resize
from .localize import fixation_grid

__all__ = [
    "SCENE_LABELS",
    "AnnotationRecord",
    "SyntheticScene",
    "bbox_mask",
    "generate_scene",
    "keypoint_mask",
    "load_image",
    "load_manifest",
    "make_suite",
    "save_suite",
]

SCENE_COLORS = {
    "red": (0.9, 0.08, 0.08),
    "green": (0.08, 0.9, 0.08),
    "blue": (0.08, 0.08, 0.9),
}
SCENE_SHAPES = ("disk", "square", "triangle")
SCENE_LABELS = tuple(f"{c}-{s}" for c in SCENE_COLORS for s in SCENE_SHAPES)

# shape extents relative to `scale`, chosen to keep per-color masses
# strictly ordered (disk > square > triangle) with gaps wide enough to
# survive the orientation dependence of log-polar footprints
SQUARE_HALF_SIDE = 0.7
TRIANGLE_CIRCUMRADIUS = 0.78


@dataclass(frozen=True)
class AnnotationRecord:
    image_path: str
    label: str
    boxes: tuple = ()
    keypoints: tuple = ()


@dataclass(frozen=True)
class SyntheticScene:
    image: np.ndarray
    label: str
    center: tuple
    scale: float
    angle: float
    box: BoundingBox


def load_image(path) -> np.ndarray:
    """Decode an 8-bit raster into a unit-interval (H, W, C) array."""
    from PIL import Image

    with Image.open(path) as im:
        im = im.convert("RGB")
        arr = np.asarray(im, dtype=float) / 255.0
    return arr


def _image_size(record, base_dir):
    if "width" in record and "height" in record:
        return int(record["width"]), int(record["height"])
    from PIL import Image

    path = os.path.join(base_dir, record["image_path"])
    with Image.open(path) as im:
        return im.width, im.height


def load_manifest(path) -> list[AnnotationRecord]:
    """Parse and validate a JSON-lines manifest; pixel coords are normalized."""
    records = []
    base_dir = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(_parse_record(line, base_dir))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"manifest line {lineno}: {exc}") from exc
    return records


def _parse_record(line, base_dir) -> AnnotationRecord:
    doc = json.loads(line)
    image_path = str(doc["image_path"])
    label = str(doc["label"])
    coords = doc.get("coords", "normalized")
    if coords not in ("pixel", "normalized"):
        raise ValueError(f"unknown coords kind {coords!r}")
    raw_boxes = doc.get("boxes") or []
    raw_points = doc.get("keypoints") or []
    if not raw_boxes and not raw_points:
        raise ValueError("record carries neither boxes nor keypoints")
    if coords == "pixel":
        w, h = _image_size(doc, base_dir)

        def nx(v):
            return 2.0 * float(v) / w - 1.0

        def ny(v):
            return 2.0 * float(v) / h - 1.0

    else:

        def nx(v):
            return float(v)

        def ny(v):
            return float(v)

    boxes = tuple(BoundingBox(nx(b[0]), ny(b[1]), nx(b[2]), ny(b[3])) for b in raw_boxes)
    points = tuple((nx(p[0]), ny(p[1])) for p in raw_points)
    for (px, py) in points:
        if abs(px) > 1.0 or abs(py) > 1.0:
            raise ValueError(f"keypoint outside [-1, 1]: ({px:g}, {py:g})")
    return AnnotationRecord(image_path=image_path, label=label, boxes=boxes, keypoints=points)


def bbox_mask(boxes, n: int = 11) -> np.ndarray:
    """Cell (i, j) is set iff its fixation-lattice point falls inside any box."""
    n = int(n)
    if n < 2 or n % 2 == 0:
        raise ValueError("ground-truth masks need an odd lattice size")
    pts = fixation_grid(n)
    mask = np.zeros((n, n), dtype=bool)
    for box in boxes:
        inside_x = (pts[:, :, 0] >= box.x_min) & (pts[:, :, 0] <= box.x_max)
        inside_y = (pts[:, :, 1] >= box.y_min) & (pts[:, :, 1] <= box.y_max)
        mask |= inside_x & inside_y
    return mask


def keypoint_mask(
    points,
    n: int = 11,
    sigma_coeff: float = 0.15,
    threshold: float = 0.2,
    min_size: float = 0.1,
) -> np.ndarray:
    """Threshold a per-point Gaussian heatmap evaluated on the fixation lattice.

    The heatmap is the max over per-point Gaussians (peak 1) whose sigma is
    sigma_coeff times the object size (the larger side of the keypoints'
    bounding box, floored at min_size so lone points keep a positive
    sigma). Values are renormalized so the lattice max is 1 before the
    threshold is applied.
    """
    points = [(float(p[0]), float(p[1])) for p in points]
    if not points:
        raise ValueError("keypoint mask needs at least one point")
    n = int(n)
    if n < 2 or n % 2 == 0:
        raise ValueError("ground-truth masks need an odd lattice size")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    size = max(max(xs) - min(xs), max(ys) - min(ys), float(min_size))
    sigma = float(sigma_coeff) * size
    pts = fixation_grid(n)
    heat = np.zeros((n, n))
    for (px, py) in points:
        d2 = (pts[:, :, 0] - px) ** 2 + (pts[:, :, 1] - py) ** 2
        heat = np.maximum(heat, np.exp(-d2 / (2.0 * sigma * sigma)))
    heat = heat / heat.max()
    return heat >= float(threshold)


def _shape_mask(label, center, scale, angle, size):
    color, shape = label.split("-")
    xs = (2.0 * np.arange(size) + 1.0) / size - 1.0
    u0 = xs[None, :] - center[0]
    v0 = xs[:, None] - center[1]
    ca, sa = math.cos(angle), math.sin(angle)
    u = ca * u0 + sa * v0
    v = -sa * u0 + ca * v0
    if shape == "disk":
        return u * u + v * v <= scale * scale
    if shape == "square":
        half = SQUARE_HALF_SIDE * scale
        return (np.abs(u) <= half) & (np.abs(v) <= half)
    radius = TRIANGLE_CIRCUMRADIUS * scale
    verts = [
        (radius * math.cos(a), radius * math.sin(a))
        for a in (math.pi / 2, math.pi / 2 + 2 * math.pi / 3, math.pi / 2 + 4 * math.pi / 3)
    ]
    mask = np.ones_like(u, dtype=bool)
    for k in range(3):
        ax, ay = verts[k]
        bx, by = verts[(k + 1) % 3]
        # centroid at the origin: inside is the origin side of each edge
        cross = (bx - ax) * (v - ay) - (by - ay) * (u - ax)
        ref = (bx - ax) * (0.0 - ay) - (by - ay) * (0.0 - ax)
        mask &= cross * ref >= 0
    return mask


def generate_scene(
    rng_seed: int,
    label: str,
    center,
    scale: float,
    angle: float,
    clutter: int = 0,
    size: int = 64,
    tint: float = 0.0,
    draw_shape: bool = True,
) -> SyntheticScene:
    """Deterministic scene: noisy background, gray distractors, one colored shape.

    `tint` adds a faint class-color cast to the whole background (context
    correlated with the class, like natural photographs). `draw_shape=False`
    renders background and clutter only (diagnostic use; the random stream
    is identical either way).
    """
    if label not in SCENE_LABELS:
        raise ValueError(f"unknown scene label {label!r}")
    scale = float(scale)
    if not 0.05 <= scale <= 0.5:
        raise ValueError("scale must lie in [0.05, 0.5]")
    cx, cy = float(center[0]), float(center[1])
    if abs(cx) + scale > 1.0 or abs(cy) + scale > 1.0:
        raise ValueError(f"shape at ({cx:g}, {cy:g}) with scale {scale:g} leaves the frame")
    size = int(size)
    rng = np.random.default_rng(rng_seed)

    coarse = rng.uniform(0.0, 1.0, (6, 6, 1))
    noise = resize(coarse, size, size)[:, :, 0]
    img = np.repeat((0.5 + 0.05 * (noise - 0.5))[:, :, None], 3, axis=2)
    if tint:
        channel = ("red", "green", "blue").index(label.split("-")[0])
        img[:, :, channel] = np.clip(img[:, :, channel] + float(tint), 0.0, 1.0)

    xs = (2.0 * np.arange(size) + 1.0) / size - 1.0
    for _ in range(int(clutter)):
        bx, by = rng.uniform(-0.85, 0.85, 2)
        br = rng.uniform(0.06, 0.14)
        gray = rng.uniform(0.42, 0.58)
        blob = np.hypot(xs[None, :] - bx, xs[:, None] - by) <= br
        img[blob] = gray

    mask = _shape_mask(label, (cx, cy), scale, float(angle), size)
    if not mask.any():
        raise ValueError("shape rasterized to zero pixels")
    if draw_shape:
        img[mask] = SCENE_COLORS[label.split("-")[0]]

    ii, jj = np.nonzero(mask)
    box = BoundingBox(
        x_min=max(-1.0, 2.0 * jj.min() / size - 1.0),
        y_min=max(-1.0, 2.0 * ii.min() / size - 1.0),
        x_max=min(1.0, 2.0 * (jj.max() + 1) / size - 1.0),
        y_max=min(1.0, 2.0 * (ii.max() + 1) / size - 1.0),
    )
    return SyntheticScene(image=img, label=label, center=(cx, cy), scale=scale, angle=float(angle), box=box)


def make_suite(
    seed: int,
    count: int,
    size: int = 64,
    clutter_max: int = 2,
    direction: float = 5 * math.pi / 4,
    direction_jitter: float = 0.25,
    radius_range: tuple = (0.41, 0.43),
    scale_range: tuple = (0.26, 0.28),
    tint: float = 0.02,
) -> list[SyntheticScene]:
    """Deterministic labeled suite with a consistent off-center position bias.

    Labels cycle round-robin through the 9 classes. Objects sit in a fixed
    direction from the center (a photographer's bias with an orientation
    preference), which keeps class prototypes spatially concentrated.
    """
    master = np.random.default_rng(seed)
    scenes = []
    for k in range(int(count)):
        label = SCENE_LABELS[k % len(SCENE_LABELS)]
        phi = direction + master.uniform(-direction_jitter, direction_jitter)
        radius = master.uniform(*radius_range)
        center = (radius * math.cos(phi), radius * math.sin(phi))
        scale = master.uniform(*scale_range)
        angle = master.uniform(0.0, 2.0 * math.pi)
        clutter = int(master.integers(0, clutter_max + 1))
        scene_seed = int(master.integers(2**62))
        scenes.append(generate_scene(scene_seed, label, center, scale, angle, clutter, size, tint))
    return scenes


def save_suite(scenes, out_dir) -> str:
    """Write scene PNGs plus a JSON-lines manifest; returns the manifest path."""
    from PIL import Image

    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for k, scene in enumerate(scenes):
            name = f"scene_{k:04d}.png"
            raw = np.clip(np.round(scene.image * 255.0), 0, 255).astype(np.uint8)
            Image.fromarray(raw).save(os.path.join(out_dir, name))
            record = {
                "image_path": name,
                "label": scene.label,
                "coords": "normalized",
                "boxes": [[scene.box.x_min, scene.box.y_min, scene.box.x_max, scene.box.y_max]],
            }
            fh.write(json.dumps(record) + "\n")
    return manifest_path
