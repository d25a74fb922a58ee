"""Likelihood maps over a fixation grid and the localization metrics.

A likelihood map holds, for every fixation point of a uniform n x n
lattice spanning [-1, 1] per axis, the probability that a label subset is
present in the view sampled at that fixation. Metrics (pointing game,
in/out activation, IoU curves) treat the map as a heatmap against an
n x n ground-truth mask. Missing cells (after recentering) are tracked
with explicit validity flags, never sentinel values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .attacks import PipelineSpec, prepare_input
from .imgops import fixation_sample, resize
from .oracle import classify, label_set_likelihood

__all__ = [
    "LikelihoodMap",
    "MaskedGrid",
    "RecenteredMean",
    "classify_at_fixation",
    "diff_map",
    "fixation_grid",
    "iou_curve",
    "likelihood_map",
    "load_heatmap",
    "log_odds_map",
    "mean_in_out",
    "pointing_game",
    "recenter_mean",
    "saccade_and_classify",
    "save_heatmap",
]

DEFAULT_THRESHOLDS = tuple(round(0.01 * k, 2) for k in range(101))

RATIO_EPS = 1e-9


class MaskedGrid(NamedTuple):
    """An n x n value grid with per-cell validity flags."""

    values: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class LikelihoodMap:
    """Label-subset likelihoods indexed by fixation cell (row, col)."""

    n: int
    values: np.ndarray  # (n, n) in [0, 1]
    label_subset: tuple
    fixations: np.ndarray  # (n, n, 2) normalized (x, y)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.n, self.n):
            raise ValueError(f"values must be ({self.n}, {self.n}), got {values.shape}")
        object.__setattr__(self, "values", values)

    def argmax_cell(self) -> tuple[int, int]:
        i, j = np.unravel_index(int(np.argmax(self.values)), (self.n, self.n))
        return int(i), int(j)


@dataclass(frozen=True)
class RecenteredMean:
    """Per-cell means of recentered maps plus contributing-sample counts."""

    mean_values: np.ndarray
    counts: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.counts > 0

    @property
    def grid(self) -> MaskedGrid:
        return MaskedGrid(self.mean_values, self.valid)


def fixation_grid(n: int) -> np.ndarray:
    """Uniform (n, n, 2) lattice of normalized fixation points spanning [-1, 1]."""
    n = int(n)
    if n < 2:
        raise ValueError("fixation grid needs n >= 2")
    coords = 2.0 * np.arange(n) / (n - 1) - 1.0
    x = np.broadcast_to(coords[None, :], (n, n))
    y = np.broadcast_to(coords[:, None], (n, n))
    return np.stack([x, y], axis=-1)


def _view_at_fixation(image, spec: PipelineSpec, fixation, min_ratio: float):
    sample = fixation_sample(image, fixation, min_ratio, spec.frame == "cartesian", spec.fill)
    res = spec.oracle.input_resolution
    return prepare_input(resize(sample, res, res), spec)


def classify_at_fixation(image, spec: PipelineSpec, fixation, min_ratio: float = 0.1) -> np.ndarray:
    """Probability vector for the view sampled at one fixation point."""
    return classify(spec.oracle, [_view_at_fixation(image, spec, fixation, min_ratio)])[0]


def likelihood_map(image, label_subset, spec: PipelineSpec, n: int = 11, min_ratio: float = 0.1) -> LikelihoodMap:
    """Evaluate the label-subset likelihood at every fixation of the lattice.

    All n**2 views go through the oracle as a single batch.
    """
    n = int(n)
    if n < 2 or n % 2 == 0:
        raise ValueError("likelihood maps need an odd lattice size n >= 3")
    subset = tuple(int(i) for i in label_subset)
    fixations = fixation_grid(n)
    views = [
        _view_at_fixation(image, spec, tuple(fixations[i, j]), min_ratio)
        for i in range(n)
        for j in range(n)
    ]
    probs = classify(spec.oracle, views)
    values = np.array([label_set_likelihood(p, subset) for p in probs]).reshape(n, n)
    return LikelihoodMap(n=n, values=values, label_subset=subset, fixations=fixations)


def _map_values(m) -> np.ndarray:
    values = np.asarray(getattr(m, "values", m), dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"expected a square map, got shape {values.shape}")
    return values


def _check_mask(mask, n: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (n, n):
        raise ValueError(f"mask shape {mask.shape} does not match map ({n}, {n})")
    return mask.astype(bool)


def pointing_game(m, mask) -> bool:
    """True iff the peak cell (row-major tie rule) lies inside the mask."""
    values = _map_values(m)
    mask = _check_mask(mask, values.shape[0])
    if not mask.any():
        raise ValueError("pointing game needs a non-empty mask")
    peak = np.unravel_index(int(np.argmax(values)), values.shape)
    return bool(mask[peak])


def mean_in_out(m, mask, eps: float = RATIO_EPS):
    """(mean inside, mean outside, inside/outside ratio with clamped divisor).

    Sums use exactly rounded accumulation so the means are bit-reproducible
    regardless of cell order.
    """
    values = _map_values(m)
    mask = _check_mask(mask, values.shape[0])
    if not mask.any() or mask.all():
        raise ValueError("mean_in_out needs both set and unset mask cells")
    mean_in = math.fsum(values[mask].tolist()) / int(mask.sum())
    mean_out = math.fsum(values[~mask].tolist()) / int((~mask).sum())
    return mean_in, mean_out, mean_in / max(mean_out, eps)


def iou_curve(m, mask, thresholds=None):
    """IoU of binarized map vs mask per threshold; returns (curve, peak, peak_t).

    IoU is 0 when the union is empty; the peak takes the smallest
    threshold on ties.
    """
    values = _map_values(m)
    mask = _check_mask(mask, values.shape[0])
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else tuple(float(t) for t in thresholds)
    curve = []
    for t in thresholds:
        binary = values >= t
        union = int(np.logical_or(binary, mask).sum())
        inter = int(np.logical_and(binary, mask).sum())
        curve.append((t, inter / union if union else 0.0))
    best = int(np.argmax([v for _, v in curve]))
    return curve, curve[best][1], curve[best][0]


def recenter_mean(maps) -> RecenteredMean:
    """Shift each map so its peak sits at the center cell, then average.

    Shifting never wraps; cells with no contributing sample are missing
    (count 0), matching a mean over explicitly tracked valid entries.
    """
    maps = list(maps)
    if not maps:
        raise ValueError("recenter_mean needs at least one map")
    n = _map_values(maps[0]).shape[0]
    if n % 2 == 0:
        raise ValueError("recentering needs an odd lattice size")
    center = n // 2
    acc = np.zeros((n, n))
    cnt = np.zeros((n, n), dtype=int)
    for m in maps:
        values = _map_values(m)
        if values.shape != (n, n):
            raise ValueError("all maps must share one lattice size")
        pi, pj = np.unravel_index(int(np.argmax(values)), (n, n))
        dr, dc = center - pi, center - pj
        src_i = slice(max(0, -dr), min(n, n - dr))
        src_j = slice(max(0, -dc), min(n, n - dc))
        dst_i = slice(max(0, dr), min(n, n + dr))
        dst_j = slice(max(0, dc), min(n, n + dc))
        acc[dst_i, dst_j] += values[src_i, src_j]
        cnt[dst_i, dst_j] += 1
    mean = np.divide(acc, cnt, out=np.zeros_like(acc), where=cnt > 0)
    return RecenteredMean(mean_values=mean, counts=cnt)


def _as_masked(m) -> MaskedGrid:
    if isinstance(m, MaskedGrid):
        values, valid = m
    elif isinstance(m, RecenteredMean):
        values, valid = m.mean_values, m.valid
    else:
        values = _map_values(m)
        valid = np.ones_like(values, dtype=bool)
    return MaskedGrid(np.asarray(values, dtype=float), np.asarray(valid, dtype=bool))


def diff_map(a, b) -> MaskedGrid:
    """Elementwise a - b; a cell is missing when either side is missing."""
    a, b = _as_masked(a), _as_masked(b)
    if a.values.shape != b.values.shape:
        raise ValueError(f"shape mismatch {a.values.shape} vs {b.values.shape}")
    valid = a.valid & b.valid
    values = np.where(valid, a.values - b.values, 0.0)
    return MaskedGrid(values, valid)


def log_odds_map(a, b, eps: float = 1e-6) -> MaskedGrid:
    """Elementwise logit difference of clamped probabilities."""
    a, b = _as_masked(a), _as_masked(b)
    if a.values.shape != b.values.shape:
        raise ValueError(f"shape mismatch {a.values.shape} vs {b.values.shape}")
    for side in (a, b):
        inside = side.values[side.valid]
        if inside.size and (inside.min() < 0 or inside.max() > 1):
            raise ValueError("log-odds maps need values in [0, 1]")

    def logit(p):
        p = np.clip(p, eps, 1.0 - eps)
        return np.log(p / (1.0 - p))

    valid = a.valid & b.valid
    values = np.where(valid, logit(a.values) - logit(b.values), 0.0)
    return MaskedGrid(values, valid)


def saccade_and_classify(image, label_subset, spec: PipelineSpec, n: int = 11, min_ratio: float = 0.1):
    """Likelihood before and after a saccade to the map's peak fixation.

    Returns (pre_likelihood at the center fixation, post_likelihood after
    re-evaluating at the argmax fixation, post_correct flag: the argmax
    label at that fixation belongs to the subset).
    """
    m = likelihood_map(image, label_subset, spec, n, min_ratio)
    center = n // 2
    pre = float(m.values[center, center])
    pi, pj = m.argmax_cell()
    probs = classify_at_fixation(image, spec, tuple(m.fixations[pi, pj]), min_ratio)
    post = label_set_likelihood(probs, m.label_subset)
    post_correct = int(np.argmax(probs)) in set(m.label_subset)
    return pre, post, post_correct


def save_heatmap(path, values, label_subset, valid=None) -> None:
    """Write the heatmap JSON: n, label_subset, row-major values, optional valid."""
    values = _map_values(values)
    doc = {
        "n": int(values.shape[0]),
        "label_subset": [int(i) for i in label_subset],
        "values": [float(v) for v in values.reshape(-1)],
    }
    if valid is not None:
        valid = _check_mask(valid, values.shape[0])
        if not valid.all():
            doc["valid"] = [bool(v) for v in valid.reshape(-1)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_heatmap(path):
    """Read a heatmap JSON; returns (n, label_subset, values, valid)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    n = int(doc["n"])
    values = np.asarray(doc["values"], dtype=float).reshape(n, n)
    subset = tuple(int(i) for i in doc["label_subset"])
    if "valid" in doc:
        valid = np.asarray(doc["valid"], dtype=bool).reshape(n, n)
    else:
        valid = np.ones((n, n), dtype=bool)
    return n, subset, values, valid
