"""PGM/PPM emission for predicted observations.

Binary PGM (P5) for grayscale, PPM (P6) for three-channel images, maxval
255.  Values are mapped by ``round(clamp(v, 0, 1) * 255)``.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, FormatError
from .tensorio import atomic_write_bytes


def quantize(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] float values to uint8 with round-half-even at the midpoints."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.rint(v * 255.0).astype(np.uint8)


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim != 2:
        raise ContractError(f"PGM needs a 2-d image, got shape {img.shape}")
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + quantize(img).tobytes())


def write_ppm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ContractError(f"PPM needs an (H, W, 3) image, got shape {img.shape}")
    h, w, _ = img.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + quantize(img).tobytes())


def write_image(path_base, image: np.ndarray) -> str:
    """Write a (H, W) or (H, W, C) image, choosing PGM or PPM by channel count."""
    img = np.asarray(image)
    if img.ndim == 2 or (img.ndim == 3 and img.shape[2] == 1):
        path = str(path_base) + ".pgm"
        write_pgm(path, img)
    elif img.ndim == 3 and img.shape[2] == 3:
        path = str(path_base) + ".ppm"
        write_ppm(path, img)
    else:
        raise ContractError(f"cannot emit image with shape {img.shape}")
    return path


def _read_netpbm(path, magic: bytes):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(magic):
        raise FormatError(f"{path}: expected {magic!r} header")
    # Header tokens: magic, width, height, maxval; comments start with '#'.
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = tokens
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} unsupported")
    channels = 3 if magic == b"P6" else 1
    payload = data[pos : pos + w * h * channels]
    if len(payload) != w * h * channels:
        raise FormatError(f"{path}: truncated payload")
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(h, w)
    return arr.reshape(h, w, 3)


def read_pgm(path) -> np.ndarray:
    return _read_netpbm(path, b"P5")


def read_ppm(path) -> np.ndarray:
    return _read_netpbm(path, b"P6")
