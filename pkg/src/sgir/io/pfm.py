"""
Portable float map (PFM) reading and writing.

Layout: "PF" (RGB) or "Pf" (gray) line, "width height" line, scale line
(negative means little-endian), then 32-bit floats with the bottom row first.
"""

from pathlib import Path

import numpy as np

from sgir.errors import ParseError
from sgir.io.image import ImageBuffer


def _line(data, pos):
    end = data.find(b"\n", pos)
    if end < 0:
        raise ParseError("unterminated header line", pos)
    return data[pos:end].strip(), end + 1


def parse_pfm(data):
    magic, pos = _line(data, 0)
    if magic not in (b"PF", b"Pf"):
        raise ParseError(f"bad PFM magic {magic[:8]!r}", 0)
    channels = 3 if magic == b"PF" else 1
    dims_at = pos
    dims, pos = _line(data, pos)
    try:
        width, height = (int(v) for v in dims.split())
    except ValueError:
        raise ParseError(f"bad PFM dimensions {dims[:32]!r}", dims_at) from None
    if width <= 0 or height <= 0:
        raise ParseError(f"PFM dimensions must be positive, got {width}x{height}", dims_at)
    scale_at = pos
    scale_text, pos = _line(data, pos)
    try:
        scale = float(scale_text)
    except ValueError:
        raise ParseError(f"bad PFM scale {scale_text[:32]!r}", scale_at) from None
    if scale == 0.0 or not np.isfinite(scale):
        raise ParseError("PFM scale must be finite and nonzero", scale_at)
    need = width * height * channels * 4
    available = len(data) - pos
    if available < need:
        raise ParseError(f"truncated PFM payload: expected {need} bytes, found {available}", len(data))
    dtype = "<f4" if scale < 0 else ">f4"
    values = np.frombuffer(data, dtype=dtype, count=width * height * channels, offset=pos)
    values = values.reshape(height, width, channels)[::-1].astype(np.float64)
    if channels == 1:
        values = np.repeat(values, 3, axis=-1)
    return ImageBuffer(values)


def encode_pfm(image):
    header = f"PF\n{image.width} {image.height}\n-1.0\n".encode("ascii")
    payload = np.ascontiguousarray(image.data[::-1].astype("<f4")).tobytes()
    return header + payload


def read_pfm(path):
    return parse_pfm(Path(path).read_bytes())


def write_pfm(path, image):
    Path(path).write_bytes(encode_pfm(image))
