"""Length-prefixed frames for the classifier bridge protocol.

One frame = 4-byte little-endian unsigned length N, then N bytes of UTF-8
JSON header, then (when the header carries payload_bytes > 0) exactly that
many raw payload bytes. The same format runs in both directions.
"""

from __future__ import annotations

import json
import struct

__all__ = ["read_frame", "write_frame", "ProtocolError"]

_LEN = struct.Struct("<I")


class ProtocolError(RuntimeError):
    """Malformed or truncated frame."""


def write_frame(stream, header: dict, payload: bytes = b"") -> None:
    if payload and int(header.get("payload_bytes", 0)) != len(payload):
        raise ValueError("header payload_bytes disagrees with payload length")
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
            raise ProtocolError(f"stream ended {remaining} bytes short of a full frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream) -> tuple[dict, bytes]:
    """Read one frame; raises EOFError on a clean end-of-stream boundary."""
    head = stream.read(_LEN.size)
    if not head:
        raise EOFError("peer closed the stream")
    if len(head) < _LEN.size:
        head += _read_exact(stream, _LEN.size - len(head))
    (length,) = _LEN.unpack(head)
    try:
        header = json.loads(_read_exact(stream, length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad frame header: {exc}") from exc
    if not isinstance(header, dict):
        raise ProtocolError("frame header is not a JSON object")
    payload_bytes = int(header.get("payload_bytes", 0) or 0)
    payload = _read_exact(stream, payload_bytes) if payload_bytes > 0 else b""
    return header, payload
