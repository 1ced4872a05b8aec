"""Middlebury .flo reader/writer.

Layout: float32 sentinel 202021.25, int32 width, int32 height, then
row-major interleaved float32 (u, v) pairs, all little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .field import FlowField

__all__ = ["FloFormatError", "read_flo", "write_flo", "FLO_SENTINEL"]

FLO_SENTINEL = 202021.25


class FloFormatError(ValueError):
    """Not a valid .flo byte stream."""


def write_flo(f: FlowField, path: str | Path | None = None) -> bytes:
    """Serialize a field; also writes to path when given."""
    header = struct.pack("<fii", FLO_SENTINEL, f.width, f.height)
    data = np.empty((f.height, f.width, 2), dtype="<f4")
    data[:, :, 0] = f.u
    data[:, :, 1] = f.v
    payload = header + data.tobytes()
    if path is not None:
        Path(path).write_bytes(payload)
    return payload


def read_flo(src: str | Path | bytes) -> FlowField:
    data = src if isinstance(src, bytes) else Path(src).read_bytes()
    if len(data) < 12:
        raise FloFormatError(f"truncated header: {len(data)} bytes")
    sentinel, w, h = struct.unpack("<fii", data[:12])
    if abs(sentinel - FLO_SENTINEL) > 1e-3:
        raise FloFormatError(f"bad sentinel {sentinel!r}")
    if w <= 0 or h <= 0:
        raise FloFormatError(f"bad dims {w}x{h}")
    expected = 12 + w * h * 8
    if len(data) != expected:
        raise FloFormatError(f"payload is {len(data)} bytes, expected {expected}")
    uv = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w, 2)
    return FlowField(uv[:, :, 0].copy(), uv[:, :, 1].copy())
