import os
import sys
import zlib

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from foveate.oracle import LabelSet, softmax


class ConstantOracle:
    """Returns one fixed probability vector for every image."""

    def __init__(self, probs, resolution=16):
        self.probs = np.asarray(probs, dtype=float)
        self.labels = LabelSet(tuple(f"c{i}" for i in range(self.probs.size)))
        self.input_resolution = resolution

    def classify_batch(self, images):
        return [self.probs.copy() for _ in images]


class HashOracle:
    """Deterministic pseudo-random probabilities keyed by image content."""

    def __init__(self, k=2, salt=0, resolution=16):
        self.k = k
        self.salt = salt
        self.labels = LabelSet(tuple(f"c{i}" for i in range(k)))
        self.input_resolution = resolution

    def classify_batch(self, images):
        out = []
        for im in images:
            key = zlib.crc32(np.ascontiguousarray(im).tobytes()) ^ self.salt
            rng = np.random.default_rng(key)
            out.append(softmax(rng.normal(size=self.k)))
        return out


def disk_image(size, center, radius, color, bg=0.5):
    """Square RGB image with one colored disk on a flat background."""
    img = np.full((size, size, 3), float(bg))
    xs = (2 * np.arange(size) + 1) / size - 1
    dist = np.hypot(xs[None, :] - center[0], xs[:, None] - center[1])
    img[dist <= radius] = color
    return img
