"""Stdio classifier bridge hosting a torchvision ResNet (or a tiny test model).

Speaks length-prefixed frames on stdin/stdout: 4-byte little-endian
unsigned length, UTF-8 JSON header, then `payload_bytes` raw bytes when
the header says so. Ops:

    {"id", "op": "info"}                          -> labels + resolution
    {"id", "op": "classify", "shape": [B,C,H,W],
     "dtype": "f32le", "payload_bytes": N}        -> {"op": "probs", ...}

The client sends raw [0, 1] channel-first float32 tensors; normalization
with the model-zoo mean/std happens here. Inference runs in eval mode
with gradients disabled; replies carry the request id, so pipelined
requests are answered in order without drops. All logging goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from dataclasses import dataclass

import numpy as np
import torch

_LEN = struct.Struct("<I")

MAX_BATCH = 256

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

RESNETS = ("resnet18", "resnet34", "resnet50", "resnet101")


class ProtocolError(RuntimeError):
    pass


def write_frame(stream, header: dict, payload: bytes = b"") -> None:
    raw = json.dumps(header, separators=(",", ":")).encode("utf-8")
    stream.write(_LEN.pack(len(raw)))
    stream.write(raw)
    if payload:
        stream.write(payload)
    stream.flush()


def _read_exact(stream, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            raise ProtocolError(f"stream ended {remaining} bytes short")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream) -> tuple[dict, bytes]:
    head = stream.read(_LEN.size)
    if not head:
        raise EOFError
    if len(head) < _LEN.size:
        head += _read_exact(stream, _LEN.size - len(head))
    (length,) = _LEN.unpack(head)
    try:
        header = json.loads(_read_exact(stream, length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad header: {exc}") from exc
    if not isinstance(header, dict):
        raise ProtocolError("header is not a JSON object")
    payload_bytes = int(header.get("payload_bytes", 0) or 0)
    payload = _read_exact(stream, payload_bytes) if payload_bytes > 0 else b""
    return header, payload


@dataclass
class BridgeConfig:
    model: str = "resnet101"
    weights: str = "default"  # "default" (pretrained) | "none"
    device: str = "cpu"
    resolution: int = 224
    mean: tuple = IMAGENET_MEAN
    std: tuple = IMAGENET_STD
    classes: int = 1000  # tiny model only
    seed: int = 0
    max_batch: int = MAX_BATCH


class _TinyModel(torch.nn.Module):
    """Seeded linear classifier; fast enough for protocol soak tests."""

    def __init__(self, resolution: int, classes: int, seed: int):
        super().__init__()
        torch.manual_seed(seed)
        self.net = torch.nn.Linear(3 * resolution * resolution, classes)

    def forward(self, x):
        return self.net(x.flatten(1))


def _imagenet_categories():
    from torchvision.models import ResNet101_Weights

    return list(ResNet101_Weights.IMAGENET1K_V2.meta["categories"])


def build_model(config: BridgeConfig):
    """Instantiate (model, labels); raises on unknown names or load failures."""
    if config.model == "tiny":
        labels = (
            _imagenet_categories()
            if config.classes == 1000
            else [f"class_{i:04d}" for i in range(config.classes)]
        )
        model = _TinyModel(config.resolution, config.classes, config.seed)
    elif config.model in RESNETS:
        from torchvision import models

        ctor = getattr(models, config.model)
        if config.weights == "none":
            model = ctor(weights=None)
        else:
            enum = models.get_model_weights(config.model)
            model = ctor(weights=enum.DEFAULT)
        labels = _imagenet_categories()
    else:
        raise ValueError(f"unknown model {config.model!r}")
    model.eval()
    model.to(config.device)
    return model, labels


def _classify(model, config, header, payload):
    shape = header.get("shape")
    if not (isinstance(shape, list) and len(shape) == 4):
        raise ValueError("classify needs shape [B, C, H, W]")
    b, c, h, w = (int(v) for v in shape)
    if header.get("dtype") != "f32le":
        raise ValueError("classify payload must be f32le")
    if b < 1 or b > config.max_batch:
        raise ValueError(f"batch size {b} outside [1, {config.max_batch}]")
    if c != 3 or h != config.resolution or w != config.resolution:
        raise ValueError(f"expected [B, 3, {config.resolution}, {config.resolution}], got {shape}")
    if len(payload) != b * c * h * w * 4:
        raise ValueError("payload length disagrees with shape")
    batch = np.frombuffer(payload, dtype="<f4").reshape(b, c, h, w)
    x = torch.from_numpy(batch.copy())
    mean = torch.tensor(config.mean, dtype=torch.float32).view(1, 3, 1, 1)
    std = torch.tensor(config.std, dtype=torch.float32).view(1, 3, 1, 1)
    x = ((x - mean) / std).to(config.device)
    with torch.no_grad():
        logits = model(x)
        probs = torch.softmax(logits, dim=1).cpu().numpy().astype("<f4")
    return probs


def serve(config: BridgeConfig, stdin=None, stdout=None) -> int:
    """Answer frames until end-of-input; returns the process exit code."""
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    try:
        model, labels = build_model(config)
    except Exception as exc:  # model-load failure: one error frame, nonzero exit
        print(f"model load failed: {exc}", file=sys.stderr)
        write_frame(stdout, {"id": 0, "op": "error", "message": f"model load failed: {exc}"})
        return 1

    while True:
        try:
            header, payload = read_frame(stdin)
        except EOFError:
            return 0
        except ProtocolError as exc:
            write_frame(stdout, {"id": 0, "op": "error", "message": f"malformed frame: {exc}"})
            continue
        rid = header.get("id", 0)
        op = header.get("op")
        if op == "info":
            write_frame(stdout, {"id": rid, "op": "info", "labels": labels, "resolution": config.resolution})
        elif op == "classify":
            try:
                probs = _classify(model, config, header, payload)
            except ValueError as exc:
                write_frame(stdout, {"id": rid, "op": "error", "message": str(exc)})
                continue
            raw = probs.tobytes(order="C")
            write_frame(
                stdout,
                {
                    "id": rid,
                    "op": "probs",
                    "shape": [int(probs.shape[0]), int(probs.shape[1])],
                    "dtype": "f32le",
                    "payload_bytes": len(raw),
                },
                raw,
            )
        else:
            write_frame(stdout, {"id": rid, "op": "error", "message": f"unknown op {op!r}"})


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="foveate-bridge", description=__doc__)
    parser.add_argument("--model", default="resnet101", choices=RESNETS + ("tiny",))
    parser.add_argument("--weights", default="default", choices=["default", "none"])
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--resolution", type=int, default=224)
    parser.add_argument("--mean", type=float, nargs=3, default=list(IMAGENET_MEAN))
    parser.add_argument("--std", type=float, nargs=3, default=list(IMAGENET_STD))
    parser.add_argument("--classes", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-batch", type=int, default=MAX_BATCH)
    args = parser.parse_args(argv)
    config = BridgeConfig(
        model=args.model,
        weights=args.weights,
        device=args.device,
        resolution=args.resolution,
        mean=tuple(args.mean),
        std=tuple(args.std),
        classes=args.classes,
        seed=args.seed,
        max_batch=args.max_batch,
    )
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())
