"""
Image files: plain (P2) and binary (P5) PGM, and a lossless float text format

    rows cols
    v00 v01 ...
    v10 v11 ...

with every value written as %.17g so a read returns the exact doubles.
PGM is for display; observed data always travels in the float format.
"""

import logging
import re
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .errors import ImageFormatError
from .images import as_image

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
_TOKEN = re.compile(rb"#[^\n]*|\S+")


def _tokens(data: bytes, start: int, count: int) -> Tuple[List[Tuple[bytes, int]], int]:
    """Read `count` whitespace-separated tokens, skipping comments; return them with offsets."""
    found = []
    pos = start
    while len(found) < count:
        match = _TOKEN.search(data, pos)
        if match is None:
            raise ImageFormatError(f"header ended after {len(found)} of {count} fields", len(data))
        pos = match.end()
        if match.group().startswith(b"#"):
            continue
        found.append((match.group(), match.start()))
    return found, pos


def _as_int(token: bytes, offset: int, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ImageFormatError(f"{what} is not an integer: {token[:20]!r}", offset) from None
    if value <= 0:
        raise ImageFormatError(f"{what} must be positive, got {value}", offset)
    return value


def parse_pgm(data: bytes) -> Tuple[np.ndarray, int]:
    """Decode PGM bytes into (image of raw sample values, maxval)."""
    if data[:2] not in (b"P2", b"P5"):
        raise ImageFormatError(f"not a PGM file (magic {data[:2]!r})", 0)
    magic = data[:2]
    header, pos = _tokens(data, 2, 3)
    cols = _as_int(header[0][0], header[0][1], "width")
    rows = _as_int(header[1][0], header[1][1], "height")
    maxval = _as_int(header[2][0], header[2][1], "maxval")
    if maxval > 65535:
        raise ImageFormatError(f"maxval {maxval} exceeds 65535", header[2][1])
    count = rows * cols

    if magic == b"P2":
        values, _ = _tokens(data, pos, count) if count else ([], pos)
        pixels = np.array([_sample(tok, off, maxval) for tok, off in values], dtype=np.float64)
    else:
        # exactly one whitespace byte separates maxval from the raster
        pos += 1
        width = 1 if maxval < 256 else 2
        needed = count * width
        if len(data) - pos < needed:
            raise ImageFormatError(
                f"binary raster truncated: need {needed} bytes, found {max(len(data) - pos, 0)}",
                len(data),
            )
        dtype = np.uint8 if width == 1 else np.dtype(">u2")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        if np.any(raw > maxval):
            bad = int(np.argmax(raw > maxval))
            raise ImageFormatError(f"sample exceeds maxval {maxval}", pos + bad * width)
        pixels = raw.astype(np.float64)
    return pixels.reshape(rows, cols), maxval


def _sample(token: bytes, offset: int, maxval: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ImageFormatError(f"bad sample {token[:20]!r}", offset) from None
    if value < 0 or value > maxval:
        raise ImageFormatError(f"sample {value} outside [0, {maxval}]", offset)
    return value


def parse_float_text(data: bytes) -> np.ndarray:
    header, pos = _tokens(data, 0, 2)
    rows = _as_int(header[0][0], header[0][1], "rows")
    cols = _as_int(header[1][0], header[1][1], "cols")
    values, end = _tokens(data, pos, rows * cols)
    pixels = []
    for token, offset in values:
        try:
            pixels.append(float(token))
        except ValueError:
            raise ImageFormatError(f"bad value {token[:20]!r}", offset) from None
    trailing = _TOKEN.search(data, end)
    if trailing is not None and not trailing.group().startswith(b"#"):
        raise ImageFormatError("extra data after the last pixel", trailing.start())
    return np.array(pixels, dtype=np.float64).reshape(rows, cols)


def image_read(path: PathLike, normalize: bool = False) -> np.ndarray:
    """Read PGM or float text; `normalize` divides PGM samples by maxval."""
    data = Path(path).read_bytes()
    if data[:2] in (b"P2", b"P5"):
        pixels, maxval = parse_pgm(data)
        if normalize:
            pixels = pixels / maxval
    else:
        pixels = parse_float_text(data)
    logger.debug("read %s: %dx%d", path, *pixels.shape)
    return as_image(pixels)


def format_float_text(image: np.ndarray) -> str:
    image = as_image(image)
    lines = [f"{image.shape[0]} {image.shape[1]}"]
    lines.extend(" ".join(f"{value:.17g}" for value in row) for row in image)
    return "\n".join(lines) + "\n"


def format_pgm(image: np.ndarray, maxval: int = 255, scale: float = 1.0, plain: bool = False) -> bytes:
    """Quantize image·scale to [0, maxval], rounding half to even."""
    if not 0 < maxval <= 65535:
        raise ValueError(f"maxval must be in 1..65535, got {maxval}")
    image = as_image(image)
    samples = np.rint(np.clip(image * scale, 0, maxval)).astype(np.int64)
    rows, cols = samples.shape
    if plain:
        body = "\n".join(" ".join(str(v) for v in row) for row in samples)
        return f"P2\n{cols} {rows}\n{maxval}\n{body}\n".encode("ascii")
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    return f"P5\n{cols} {rows}\n{maxval}\n".encode("ascii") + samples.astype(dtype).tobytes()


def image_write(path: PathLike, image: np.ndarray, maxval: int = 255, scale: float = 1.0,
                plain: bool = False) -> None:
    """Write PGM when the suffix is .pgm, float text otherwise."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        path.write_bytes(format_pgm(image, maxval, scale, plain))
    else:
        path.write_text(format_float_text(image), encoding="ascii")
    logger.debug("wrote %s", path)
