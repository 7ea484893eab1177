"""Minimal PGM (P2 ASCII / P5 binary) reader and writer, maxval 255.

Pixels are scaled to [0, 1] on read and rounded to the nearest step on
write, so write-then-read is the identity on quantized images.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class PgmError(ValueError):
    """Malformed PGM header or payload."""


@dataclass(frozen=True)
class ImageGray:
    """Grayscale image with pixel intensities in [0, 1], row-major."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (self.height, self.width):
            raise PgmError(
                f"pixel array {px.shape} does not match {self.height}x{self.width}"
            )
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise PgmError("pixel intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)


def _tokenize_header(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens, skipping '#'
    comments; returns (tokens, offset one byte past the last separator)."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise PgmError(f"header truncated at byte {i}")
        c = data[i : i + 1]
        if c in b" \t\r\n":
            i += 1
        elif c == b"#":
            while i < len(data) and data[i : i + 1] not in b"\r\n":
                i += 1
        else:
            start = i
            while i < len(data) and data[i : i + 1] not in b" \t\r\n#":
                i += 1
            tokens.append(data[start:i])
    if i >= len(data):
        raise PgmError(f"payload missing after byte {i}")
    return tokens, i + 1


def read_pgm(source) -> ImageGray:
    """Read a P2 or P5 PGM from a path or bytes; maxval must be 255."""
    data = source if isinstance(source, (bytes, bytearray)) else Path(source).read_bytes()
    data = bytes(data)
    if data[:2] not in (b"P2", b"P5"):
        raise PgmError(f"unsupported magic {data[:2]!r}; expected P2 or P5")
    magic = data[:2]
    tokens, offset = _tokenize_header(data[2:], 3)
    offset += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PgmError(f"non-numeric header token: {exc}") from exc
    if width < 1 or height < 1:
        raise PgmError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise PgmError(f"maxval {maxval} unsupported; this format uses 255")
    count = width * height
    if magic == b"P5":
        payload = data[offset : offset + count]
        if len(payload) < count:
            raise PgmError(
                f"P5 payload truncated: need {count} bytes from offset {offset}, "
                f"found {len(payload)}"
            )
        raw = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        fields = data[offset:].split()
        if len(fields) < count:
            raise PgmError(
                f"P2 payload truncated: need {count} values, found {len(fields)}"
            )
        raw = np.array([int(f) for f in fields[:count]], dtype=np.float64)
        if raw.size and (raw.min() < 0 or raw.max() > 255):
            raise PgmError("P2 sample out of range 0..255")
    pixels = (raw / 255.0).reshape(height, width)
    return ImageGray(width=width, height=height, pixels=pixels)


def write_pgm(img: ImageGray, path=None, binary: bool = True) -> bytes:
    """Serialize as P5 (binary) or P2 (ASCII), rounding to the nearest of the
    256 levels; writes to ``path`` when given and returns the bytes."""
    quant = np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(np.uint8)
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n255\n".encode()
    if binary:
        out = header + quant.tobytes()
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in quant)
        out = header + body.encode() + b"\n"
    if path is not None:
        Path(path).write_bytes(out)
    return out
