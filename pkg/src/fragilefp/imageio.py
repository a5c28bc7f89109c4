"""Grayscale image file I/O: binary PGM (P5, 8/16-bit) and PNG.

Loaded images are center-cropped to multiples of 8 and returned as float64.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .core import center_crop
from .errors import ParameterError, ShapeError

IMAGE_SUFFIXES = (".pgm", ".png")


def _pgm_tokens(data: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ShapeError("truncated PGM header")
        tokens.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        if data[:2] in (b"P6", b"P3"):
            raise ParameterError(f"{path}: color PPM input is not supported")
        raise ParameterError(f"{path}: not a binary PGM (P5) file")
    (width, height, maxval), offset = _pgm_tokens(data, 3)
    if not 0 < maxval < 65536:
        raise ParameterError(f"{path}: invalid maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height
    if len(data) - offset < n * dtype.itemsize:
        raise ShapeError(f"{path}: truncated PGM raster")
    raster = np.frombuffer(data, dtype=dtype, count=n, offset=offset)
    return raster.reshape(height, width).astype(np.float64)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I;16B", "I;16L", "I", "F"):
            return np.asarray(im, dtype=np.float64)
        if im.mode == "P" and im.palette is not None:
            rgb = np.asarray(im.convert("RGB"))
            if np.array_equal(rgb[..., 0], rgb[..., 1]) and np.array_equal(rgb[..., 1], rgb[..., 2]):
                return rgb[..., 0].astype(np.float64)
        raise ParameterError(f"{path}: color image (mode {im.mode}); convert to grayscale first")


def read_image(path, crop: bool = True) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        img = read_pgm(path)
    elif suffix == ".png":
        img = read_png(path)
    else:
        raise ParameterError(f"unsupported image format: {path}")
    return center_crop(img) if crop else img


def write_pgm(path, img, bits: int = 8) -> None:
    """Write ``img`` as binary PGM, rounding and clamping to the 8- or 16-bit range."""
    if bits not in (8, 16):
        raise ParameterError("bits must be 8 or 16")
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError("only single-channel images can be written")
    maxval = 255 if bits == 8 else 65535
    raster = np.clip(np.floor(a + 0.5), 0, maxval).astype(">u2" if bits == 16 else "u1")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(raster.tobytes())


def list_images(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise ParameterError(f"not a directory: {directory}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
