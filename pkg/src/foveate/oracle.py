"""Classifier oracles: anything that maps images to probability vectors.

Two oracles ship here: a deterministic toy classifier (nearest prototype
over coarse region-mean descriptors) for self-contained tests, and a
client for an external model bridge speaking a length-prefixed frame
protocol over a child process's standard streams.
"""

from __future__ import annotations

import itertools
import shlex
import subprocess
import sys
import threading
from dataclasses import dataclass, field

import numpy as np

from .retina import ensure_image
from .wire import ProtocolError, read_frame, write_frame

__all__ = [
    "CARTESIAN_QUADRANT",
    "RETINOTOPIC_RADIAL",
    "BridgeClient",
    "BridgeError",
    "LabelSet",
    "ToyClassifier",
    "check_prob_vector",
    "classify",
    "cross_entropy",
    "label_set_likelihood",
    "softmax",
    "toy_descriptor",
    "toy_fit",
]

CARTESIAN_QUADRANT = "cartesian-quadrant"
RETINOTOPIC_RADIAL = "retinotopic-radial"

CROSS_ENTROPY_EPS = 1e-12


@dataclass(frozen=True)
class LabelSet:
    """Ordered, unique label identifiers."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.labels) < 2:
            raise ValueError("a label set needs at least 2 labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")

    @property
    def k(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Temperature softmax with max-subtraction for stability."""
    z = np.asarray(logits, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("softmax expects a 1-D vector of at least 2 logits")
    if not np.isfinite(z).all():
        raise ValueError("softmax requires finite logits")
    temperature = float(temperature)
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    z = z / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def cross_entropy(p, y: int) -> float:
    """Negative log probability of the true label, clamped away from zero."""
    p = np.asarray(p, dtype=float)
    y = int(y)
    if not 0 <= y < p.size:
        raise IndexError(f"label index {y} outside [0, {p.size})")
    return float(-np.log(max(p[y], CROSS_ENTROPY_EPS)))


def label_set_likelihood(p, subset) -> float:
    """Probability that any label of the subset is present (sum, clamped)."""
    p = np.asarray(p, dtype=float)
    idx = np.asarray(list(subset), dtype=int)
    if idx.size == 0:
        raise ValueError("label subset must be non-empty")
    if idx.min() < 0 or idx.max() >= p.size:
        raise IndexError("label subset index out of range")
    return float(np.clip(p[idx].sum(), 0.0, 1.0))


def check_prob_vector(values, k: int | None = None) -> np.ndarray:
    """Validate the probability-vector invariants and return the array."""
    p = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("probability vector must be 1-D with K >= 2")
    if k is not None and p.size != k:
        raise ValueError(f"expected {k} probabilities, got {p.size}")
    if p.min() < -1e-7 or p.max() > 1.0 + 1e-7:
        raise ValueError("probabilities outside [0, 1]")
    if abs(float(p.sum()) - 1.0) > 1e-5:
        raise ValueError(f"probabilities sum to {p.sum():.7f}, not 1")
    return p


def toy_descriptor(image, mode: str) -> np.ndarray:
    """12-dim descriptor: mean RGB over 4 regions.

    cartesian-quadrant splits the raster into quadrants (rotation
    sensitive); retinotopic-radial splits a log-polar image into 4 radial
    row bands, averaging azimuth out (rotation invariant by construction).
    """
    img = ensure_image(image)
    if img.shape[2] != 3:
        raise ValueError("toy descriptor expects an RGB image")
    h, w = img.shape[:2]
    if mode == CARTESIAN_QUADRANT:
        regions = [
            img[: h // 2, : w // 2],
            img[: h // 2, w // 2 :],
            img[h // 2 :, : w // 2],
            img[h // 2 :, w // 2 :],
        ]
    elif mode == RETINOTOPIC_RADIAL:
        bounds = [round(k * h / 4) for k in range(5)]
        regions = [img[bounds[k] : bounds[k + 1]] for k in range(4)]
    else:
        raise ValueError(f"unknown descriptor mode {mode!r}")
    return np.concatenate([r.reshape(-1, 3).mean(axis=0) for r in regions])


@dataclass(frozen=True)
class ToyClassifier:
    """Nearest-prototype classifier over toy descriptors.

    Logits are negative Euclidean distances to the per-label prototypes,
    turned into probabilities by a temperature softmax. Immutable after
    fit and safe to share across threads.
    """

    mode: str
    prototypes: np.ndarray  # (K, 12)
    labels: LabelSet
    temperature: float = 0.05
    input_resolution: int = 224

    def __post_init__(self):
        protos = np.asarray(self.prototypes, dtype=float)
        if protos.shape != (self.labels.k, 12):
            raise ValueError(f"prototypes must be ({self.labels.k}, 12), got {protos.shape}")
        protos.setflags(write=False)
        object.__setattr__(self, "prototypes", protos)
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    def classify_batch(self, images) -> list[np.ndarray]:
        if not images:
            return []
        descs = np.stack([toy_descriptor(im, self.mode) for im in images])
        dists = np.linalg.norm(descs[:, None, :] - self.prototypes[None, :, :], axis=2)
        return [softmax(-row, self.temperature) for row in dists]


def toy_fit(
    images,
    labels,
    mode: str,
    temperature: float = 0.05,
    label_set: LabelSet | None = None,
) -> ToyClassifier:
    """Fit per-label mean descriptors; deterministic.

    With an explicit label_set, every one of its labels must appear in
    `labels` (missing-label error otherwise); without it, the set is the
    sorted unique labels seen.
    """
    images = list(images)
    labels = [str(s) for s in labels]
    if len(images) != len(labels):
        raise ValueError("images and labels must have equal length")
    if not images:
        raise ValueError("cannot fit on an empty scene list")
    if label_set is None:
        label_set = LabelSet(tuple(sorted(set(labels))))
    missing = [s for s in label_set.labels if s not in labels]
    if missing:
        raise ValueError(f"labels without examples: {missing}")
    res = ensure_image(images[0]).shape[0]
    descs = {s: [] for s in label_set.labels}
    for im, s in zip(images, labels):
        if s not in descs:
            raise ValueError(f"label {s!r} not in the label set")
        descs[s].append(toy_descriptor(im, mode))
    protos = np.stack([np.mean(descs[s], axis=0) for s in label_set.labels])
    return ToyClassifier(mode, protos, label_set, temperature, res)


def classify(oracle, batch) -> list[np.ndarray]:
    """Run the oracle on a batch of images sized to its input resolution."""
    batch = list(batch)
    if not batch:
        return []
    res = oracle.input_resolution
    for im in batch:
        shape = np.asarray(im).shape
        if shape[0] != res or shape[1] != res:
            raise ValueError(f"oracle expects {res}x{res} inputs, got {shape[0]}x{shape[1]}")
    return oracle.classify_batch(batch)


class BridgeError(RuntimeError):
    """Transport failure or an error response from the bridge."""


@dataclass
class _Pending:
    responses: dict = field(default_factory=dict)
    reader_active: bool = False


class BridgeClient:
    """Client side of the classifier-bridge wire protocol.

    The bridge runs as a child process; requests go to its stdin, replies
    come back on its stdout. Request headers:

        {"id": u64, "op": "info"}
        {"id": u64, "op": "classify", "shape": [B, C, H, W],
         "dtype": "f32le", "payload_bytes": B*C*H*W*4}

    classify payloads are row-major little-endian float32 in [0, 1],
    channel-first. Responses ("info" | "probs" | "error") may arrive out
    of order and are matched to callers by id; frame writes are
    serialized on a lock so concurrent callers multiplex one connection.
    """

    def __init__(self, command, start_timeout: float = 120.0):
        if isinstance(command, str):
            command = shlex.split(command)
        if not command:
            raise ValueError("empty bridge command")
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=sys.stderr.buffer if hasattr(sys.stderr, "buffer") else None,
        )
        self._ids = itertools.count(1)
        self._id_lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._cond = threading.Condition()
        self._pending = _Pending()
        self._closed = False
        header, _ = self._roundtrip({"id": self._next_id(), "op": "info"})
        if header.get("op") != "info" or "labels" not in header:
            raise BridgeError(f"bad info response: {header}")
        self.labels = LabelSet(tuple(header["labels"]))
        self.input_resolution = int(header.get("resolution", 224))

    def _next_id(self) -> int:
        with self._id_lock:
            return next(self._ids)

    def _send(self, header, payload=b""):
        with self._write_lock:
            try:
                write_frame(self._proc.stdin, header, payload)
            except (BrokenPipeError, OSError) as exc:
                raise BridgeError(f"bridge stdin closed: {exc}") from exc

    def _await(self, rid):
        """Wait for the response with this id; one caller reads at a time."""
        while True:
            with self._cond:
                while True:
                    if rid in self._pending.responses:
                        return self._pending.responses.pop(rid)
                    if not self._pending.reader_active:
                        self._pending.reader_active = True
                        break
                    self._cond.wait()
            try:
                header, payload = read_frame(self._proc.stdout)
            except (EOFError, ProtocolError, OSError) as exc:
                with self._cond:
                    self._pending.reader_active = False
                    self._cond.notify_all()
                raise BridgeError(f"bridge stream failed: {exc}") from exc
            with self._cond:
                self._pending.reader_active = False
                if header.get("id") == rid:
                    self._cond.notify_all()
                    return header, payload
                self._pending.responses[header.get("id")] = (header, payload)
                self._cond.notify_all()

    def _roundtrip(self, header, payload=b""):
        self._send(header, payload)
        resp, resp_payload = self._await(header["id"])
        if resp.get("op") == "error":
            raise BridgeError(str(resp.get("message", "bridge error")))
        return resp, resp_payload

    def classify_batch(self, images) -> list[np.ndarray]:
        if not images:
            return []
        arrs = [ensure_image(im) for im in images]
        h, w, c = arrs[0].shape
        if any(a.shape != (h, w, c) for a in arrs):
            raise ValueError("all images in a batch must share one shape")
        batch = np.stack(arrs).transpose(0, 3, 1, 2).astype("<f4")  # (B, C, H, W)
        payload = batch.tobytes(order="C")
        header = {
            "id": self._next_id(),
            "op": "classify",
            "shape": [len(arrs), c, h, w],
            "dtype": "f32le",
            "payload_bytes": len(payload),
        }
        resp, resp_payload = self._roundtrip(header, payload)
        if resp.get("op") != "probs":
            raise BridgeError(f"unexpected response op {resp.get('op')!r}")
        b, k = resp["shape"]
        probs = np.frombuffer(resp_payload, dtype="<f4").reshape(b, k).astype(float)
        return [check_prob_vector(row) for row in probs]

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        self._proc.wait(timeout=30)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
