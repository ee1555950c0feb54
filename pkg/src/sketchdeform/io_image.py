"""Grayscale image persistence: binary PGM (P5) and PNG.

Intensities are stored in [0, 1] in memory and quantized with round(v*255)
on write. PGM is hand-rolled (the format is a dozen lines and keeping it
dependency-free matters for headless runs); PNG goes through Pillow.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as _PILImage

from .errors import ImageError
from .raster import GrayImage

__all__ = ["save_pgm", "load_pgm", "save_png", "load_png", "save_image", "load_image"]


def quantize(img: GrayImage) -> np.ndarray:
    """Map [0, 1] intensities to uint8 by round(v*255)."""
    return np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(np.uint8)


def save_pgm(img: GrayImage, path: str | Path) -> None:
    data = quantize(img)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def _read_pgm_tokens(blob: bytes, count: int) -> tuple[list[int], int]:
    """Pull `count` whitespace-separated integer tokens, skipping # comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one (where P5 raster data begins).
    """
    tokens: list[int] = []
    i = 0
    n = len(blob)
    while len(tokens) < count:
        while i < n and blob[i : i + 1].isspace():
            i += 1
        if i < n and blob[i : i + 1] == b"#":
            while i < n and blob[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not blob[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ImageError("truncated PGM header")
        try:
            tokens.append(int(blob[start:i]))
        except ValueError:
            raise ImageError(f"bad PGM header token {blob[start:i]!r}") from None
    if i >= n:
        raise ImageError("PGM header not terminated")
    return tokens, i + 1  # skip exactly one whitespace byte after maxval


def load_pgm(path: str | Path) -> GrayImage:
    blob = Path(path).read_bytes()
    if blob[:2] != b"P5":
        raise ImageError(f"{Path(path).name}: not a binary PGM (P5) file")
    tokens, offset = _read_pgm_tokens(blob[2:], 3)
    width, height, maxval = tokens
    offset += 2  # account for the magic bytes sliced off above
    if width <= 0 or height <= 0:
        raise ImageError(f"bad PGM dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise ImageError(f"bad PGM maxval {maxval}")
    bytes_per = 1 if maxval < 256 else 2
    need = width * height * bytes_per
    raster = blob[offset : offset + need]
    if len(raster) < need:
        raise ImageError(f"PGM raster truncated: need {need} bytes, have {len(raster)}")
    dtype = np.uint8 if bytes_per == 1 else np.dtype(">u2")
    data = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return GrayImage(data.astype(np.float64) / float(maxval))


def save_png(img: GrayImage, path: str | Path) -> None:
    _PILImage.fromarray(quantize(img), mode="L").save(str(path), format="PNG")


def load_png(path: str | Path) -> GrayImage:
    with _PILImage.open(str(path)) as im:
        gray = im.convert("L")
        data = np.asarray(gray, dtype=np.float64)
    return GrayImage(data / 255.0)


def save_image(img: GrayImage, path: str | Path) -> None:
    """Dispatch on suffix: .pgm or .png."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        save_pgm(img, path)
    elif suffix == ".png":
        save_png(img, path)
    else:
        raise ImageError(f"unsupported image suffix '{suffix}' (use .pgm or .png)")


def load_image(path: str | Path) -> GrayImage:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return load_pgm(path)
    if suffix == ".png":
        return load_png(path)
    raise ImageError(f"unsupported image suffix '{suffix}' (use .pgm or .png)")
