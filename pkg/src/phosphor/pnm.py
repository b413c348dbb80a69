"""Minimal PGM/PPM/PFM readers and writers.

PGM (P5) and PPM (P6) are binary, maxval 255.  PFM is 32-bit float,
little-endian (negative scale), stored bottom-up per the format convention;
arrays in memory are top-down.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np


def _read_pnm_header(f):
    # magic, whitespace/comment-separated width, height, [maxval]
    def token():
        tok = b""
        while True:
            c = f.read(1)
            if not c:
                raise ValueError("truncated PNM header")
            if c == b"#":
                f.readline()
                continue
            if c.isspace():
                if tok:
                    return tok
                continue
            tok += c

    magic = token()
    width, height = int(token()), int(token())
    maxval = None
    if magic in (b"P5", b"P6"):
        maxval = int(token())
    return magic, width, height, maxval


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, width, height, maxval = _read_pnm_header(f)
        if magic != b"P5" or maxval != 255:
            raise ValueError(f"{path}: expected binary 8-bit PGM")
        data = f.read(width * height)
    if len(data) != width * height:
        raise ValueError(f"{path}: truncated PGM payload")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width)


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.dtype != np.uint8:
        if img.min() < 0 or img.max() > 255:
            raise ValueError("PGM values must lie in [0, 255]")
        img = img.astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


def write_percept_pgm(path, brightness: np.ndarray) -> None:
    """Brightness in [0, 1] quantized as round-half-to-even * 255."""
    img = np.rint(np.asarray(brightness, dtype=float) * 255.0).astype(np.uint8)
    write_pgm(path, img)


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, width, height, maxval = _read_pnm_header(f)
        if magic != b"P6" or maxval != 255:
            raise ValueError(f"{path}: expected binary 8-bit PPM")
        data = f.read(width * height * 3)
    if len(data) != width * height * 3:
        raise ValueError(f"{path}: truncated PPM payload")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)


def write_ppm(path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.uint8)
    h, w, c = img.shape
    if c != 3:
        raise ValueError("PPM needs an HxWx3 array")
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


def read_image(path) -> np.ndarray:
    """Dispatch on magic: PGM -> (H, W) uint8, PPM -> (H, W, 3) uint8."""
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"P5":
        return read_pgm(path)
    if magic == b"P6":
        return read_ppm(path)
    raise ValueError(f"{path}: not a binary PGM/PPM")


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header == b"Pf":
            channels = 1
        elif header == b"PF":
            channels = 3
        else:
            raise ValueError(f"{path}: not a PFM file")
        dims = f.readline()
        m = re.match(rb"^(\d+)\s+(\d+)\s*$", dims)
        if not m:
            raise ValueError(f"{path}: bad PFM dimensions {dims!r}")
        width, height = int(m.group(1)), int(m.group(2))
        scale = float(f.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(width * height * channels * 4), dtype=dtype)
    if data.size != width * height * channels:
        raise ValueError(f"{path}: truncated PFM payload")
    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(data.reshape(shape)).astype(np.float32)


def write_pfm(path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError("only single-channel PFM is written")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode())
        f.write(np.flipud(img).astype("<f4").tobytes())


def frame_path(directory, stem: str, index: int, suffix: str) -> Path:
    return Path(directory) / f"{stem}_{index:05d}.{suffix}"
