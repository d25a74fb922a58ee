"""Worst-case geometric attacks and accuracy-vs-parameter sweeps.

An attack sweeps one transform parameter (rotation angle in degrees, zoom
factor, or fixation-grid roll offset), applies the transform to the raw
image before the frame transform, and keeps the parameter with the
maximum cross-entropy loss (ties go to the first parameter in sweep
order, which makes every attack deterministic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .imgops import circular_mask, resize, roll_translate, rotate_about_fixation, zoom_about_fixation
from .oracle import classify, cross_entropy
from .retina import LogPolarGrid, ensure_image, to_logpolar

__all__ = [
    "DEFAULT_ROTATION_SWEEP",
    "DEFAULT_ZOOM_ATTACK_SWEEP",
    "DEFAULT_ZOOM_CURVE_SWEEP",
    "AttackOutcome",
    "PipelineSpec",
    "accuracy_sweep",
    "attack_accuracy",
    "prepare_input",
    "rotation_attack",
    "translation_attack",
    "zoom_attack",
]

DEFAULT_ROTATION_SWEEP = tuple(range(-180, 181, 15))
# zoom-out only for attacks; the full curve adds the zoom-in branch
DEFAULT_ZOOM_ATTACK_SWEEP = tuple((10 - k) / 10 for k in range(10))
DEFAULT_ZOOM_CURVE_SWEEP = tuple(float(v) for v in range(10, 1, -1)) + DEFAULT_ZOOM_ATTACK_SWEEP

ATTACK_KINDS = ("rotation", "zoom", "translation")


@dataclass(frozen=True)
class PipelineSpec:
    """Frame convention plus the oracle that consumes the prepared input."""

    frame: str  # "cartesian" | "retinotopic"
    oracle: Any
    grid: LogPolarGrid | None = None
    mask_radius: float = 1.0
    fill: float = 0.5

    def __post_init__(self):
        if self.frame not in ("cartesian", "retinotopic"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.frame == "retinotopic" and self.grid is None:
            raise ValueError("retinotopic pipelines need a log-polar grid")


@dataclass(frozen=True)
class AttackOutcome:
    """Worst parameter, the prediction there, and the full sweep record."""

    worst_param: Any
    predicted: int
    correct: bool
    per_param_loss: tuple
    per_param_correct: tuple


def prepare_input(image, spec: PipelineSpec) -> np.ndarray:
    """Resize to the oracle resolution, then mask (cartesian) or log-polar map."""
    res = spec.oracle.input_resolution
    img = resize(image, res, res)
    if spec.frame == "cartesian":
        return circular_mask(img, (0.0, 0.0), spec.mask_radius, spec.fill)
    if spec.grid is None:
        raise ValueError("retinotopic pipelines need a log-polar grid")
    return to_logpolar(img, spec.grid, spec.fill)


def _fixation_lattice(n: int):
    # grid point (i, j) sits at x = 2j/(n-1) - 1, y = 2i/(n-1) - 1
    from .localize import fixation_grid

    pts = fixation_grid(n)
    return [tuple(pts[i, j]) for i in range(n) for j in range(n)]


def _prepared_sweep(image, spec: PipelineSpec, kind: str, params):
    image = ensure_image(image)
    prepared = []
    if kind == "translation":
        res = spec.oracle.input_resolution
        base = resize(image, res, res)
        for x, y in params:
            dx = round(-x * res / 2.0)
            dy = round(-y * res / 2.0)
            prepared.append(prepare_input(roll_translate(base, dx, dy), spec))
    elif kind == "rotation":
        for a in params:
            prepared.append(prepare_input(rotate_about_fixation(image, (0.0, 0.0), math.radians(a), spec.fill), spec))
    elif kind == "zoom":
        for s in params:
            prepared.append(prepare_input(zoom_about_fixation(image, (0.0, 0.0), s, spec.fill), spec))
    else:
        raise ValueError(f"unknown attack kind {kind!r}")
    return prepared


def _run_attack(image, y: int, spec: PipelineSpec, kind: str, params) -> AttackOutcome:
    params = list(params)
    if not params:
        raise ValueError("parameter sweep must be non-empty")
    prepared = _prepared_sweep(image, spec, kind, params)
    probs = classify(spec.oracle, prepared)
    losses = [cross_entropy(p, y) for p in probs]
    preds = [int(np.argmax(p)) for p in probs]
    worst = int(np.argmax(losses))  # first occurrence on ties
    return AttackOutcome(
        worst_param=params[worst],
        predicted=preds[worst],
        correct=preds[worst] == int(y),
        per_param_loss=tuple(zip(params, losses)),
        per_param_correct=tuple((p, pred == int(y)) for p, pred in zip(params, preds)),
    )


def rotation_attack(image, y: int, spec: PipelineSpec, angles=None) -> AttackOutcome:
    """Worst rotation angle (degrees) over the sweep, default -180..180 step 15."""
    return _run_attack(image, y, spec, "rotation", DEFAULT_ROTATION_SWEEP if angles is None else angles)


def zoom_attack(image, y: int, spec: PipelineSpec, factors=None) -> AttackOutcome:
    """Worst zoom factor; the default sweep covers only the zoom-out branch."""
    return _run_attack(image, y, spec, "zoom", DEFAULT_ZOOM_ATTACK_SWEEP if factors is None else factors)


def translation_attack(image, y: int, spec: PipelineSpec, grid_n: int = 11) -> AttackOutcome:
    """Worst roll offset over an n x n fixation lattice.

    Each parameter is the normalized (x, y) grid point that the roll
    relocates to the image center; the roll acts on the resized input.
    """
    return _run_attack(image, y, spec, "translation", _fixation_lattice(grid_n))


def accuracy_sweep(dataset, spec: PipelineSpec, transform: str, params=None):
    """Mean accuracy at each fixed parameter value, in sweep order."""
    data = list(dataset)
    if not data:
        raise ValueError("dataset must be non-empty")
    if params is None:
        params = {
            "rotation": DEFAULT_ROTATION_SWEEP,
            "zoom": DEFAULT_ZOOM_CURVE_SWEEP,
            "translation": _fixation_lattice(11),
        }[transform]
    params = list(params)
    per_image_prepared = [_prepared_sweep(img, spec, transform, params) for img, _ in data]
    curve = []
    for pi, param in enumerate(params):
        probs = classify(spec.oracle, [prep[pi] for prep in per_image_prepared])
        hits = [int(np.argmax(p)) == int(y) for p, (_, y) in zip(probs, data)]
        curve.append((param, float(np.mean(hits))))
    return curve


def attack_accuracy(dataset, spec: PipelineSpec, kind: str, params=None, grid_n: int = 11) -> float:
    """Accuracy under the per-image worst-case parameter."""
    data = list(dataset)
    if not data:
        raise ValueError("dataset must be non-empty")
    if kind == "translation":
        sweep = _fixation_lattice(grid_n) if params is None else list(params)
    elif kind == "rotation":
        sweep = DEFAULT_ROTATION_SWEEP if params is None else list(params)
    elif kind == "zoom":
        sweep = DEFAULT_ZOOM_ATTACK_SWEEP if params is None else list(params)
    else:
        raise ValueError(f"unknown attack kind {kind!r}")
    flags = [_run_attack(img, y, spec, kind, sweep).correct for img, y in data]
    return float(np.mean(flags))
