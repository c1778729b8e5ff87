"""Binary PGM (P5) and PPM (P6) reading and writing.

Only 8-bit binary rasters are supported; images are kept as numpy arrays
indexed [row, col] (and [row, col, rgb] for PPM).
"""

from __future__ import annotations

import io
from typing import BinaryIO, Union

import numpy as np

from .errors import MalformedFormat, OutOfRangeDepth

Source = Union[bytes, bytearray, BinaryIO]


def _as_stream(source: Source) -> BinaryIO:
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(bytes(source))
    return source


def _read_token(stream: BinaryIO) -> bytes:
    """Read one whitespace-delimited header token, skipping # comments."""
    token = b""
    while True:
        ch = stream.read(1)
        if ch == b"":
            if token:
                return token
            raise MalformedFormat("unexpected end of header")
        if ch == b"#":
            while ch not in (b"", b"\n"):
                ch = stream.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def _read_header(stream: BinaryIO, magic: bytes) -> tuple[int, int]:
    got = _read_token(stream)
    if got != magic:
        raise MalformedFormat(f"expected {magic!r} magic, got {got!r}")
    try:
        width = int(_read_token(stream))
        height = int(_read_token(stream))
        maxval = int(_read_token(stream))
    except ValueError as exc:
        raise MalformedFormat("non-numeric header field") from exc
    if width < 1 or height < 1:
        raise MalformedFormat(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise OutOfRangeDepth(f"maxval {maxval}, only 255 supported")
    return width, height


def read_pgm(source: Source) -> np.ndarray:
    """Decode a binary 8-bit PGM into a (height, width) uint8 array."""
    stream = _as_stream(source)
    width, height = _read_header(stream, b"P5")
    data = stream.read(width * height)
    if len(data) != width * height:
        raise MalformedFormat("truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width).copy()


def read_ppm(source: Source) -> np.ndarray:
    """Decode a binary 8-bit PPM into a (height, width, 3) uint8 array."""
    stream = _as_stream(source)
    width, height = _read_header(stream, b"P6")
    data = stream.read(width * height * 3)
    if len(data) != width * height * 3:
        raise MalformedFormat("truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy()


def pgm_bytes(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    arr = image.astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode()
    return header + arr.tobytes()


def ppm_bytes(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("PPM image must be (h, w, 3)")
    arr = image.astype(np.uint8)
    header = f"P6\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode()
    return header + arr.tobytes()


def write_pgm(path, image: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(image))


def write_ppm(path, image: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(image))
