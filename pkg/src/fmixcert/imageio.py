"""IMGF1 tensor files and 8-bit PPM export.

IMGF1 layout (all little-endian)::

    offset  size  field
    0       4     magic b"IMGF"
    4       1     version (1)
    5       1     dtype code (1 = float32)
    6       2     reserved, zero
    8       4     H (u32)
    12      4     W (u32)
    16      4     C (u32)
    20      ...   H*W*C float32 values, row-major, channel-last
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .numerics import as_image

IMGF_MAGIC = b"IMGF"
IMGF_VERSION = 1
DTYPE_F32 = 1
_HEADER = struct.Struct("<4sBBHIII")


def encode_imgf(img) -> bytes:
    x = as_image(img)
    h, w, c = x.shape
    head = _HEADER.pack(IMGF_MAGIC, IMGF_VERSION, DTYPE_F32, 0, h, w, c)
    return head + np.ascontiguousarray(x, dtype="<f4").tobytes()


def decode_imgf(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError("IMGF1 file shorter than its header")
    magic, version, dtype, _, h, w, c = _HEADER.unpack_from(data)
    if magic != IMGF_MAGIC:
        raise FormatError(f"bad IMGF magic {magic!r}")
    if version != IMGF_VERSION:
        raise FormatError(f"unsupported IMGF version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported IMGF dtype code {dtype}")
    n = h * w * c
    if n == 0:
        raise FormatError("IMGF1 image has a zero dimension")
    if len(data) != _HEADER.size + 4 * n:
        raise FormatError(f"IMGF1 payload is {len(data) - _HEADER.size} bytes, expected {4 * n}")
    vals = np.frombuffer(data, dtype="<f4", count=n, offset=_HEADER.size)
    return vals.astype(np.float64).reshape(h, w, c)


def write_imgf(path, img) -> None:
    Path(path).write_bytes(encode_imgf(img))


def read_imgf(path) -> np.ndarray:
    return decode_imgf(Path(path).read_bytes())


def to_uint8(img) -> np.ndarray:
    x = np.clip(as_image(img), 0.0, 1.0)
    return np.rint(x * 255.0).astype(np.uint8)


def write_ppm(path, img) -> None:
    """Binary P6 PPM; single-channel input is replicated to gray RGB."""
    x = to_uint8(img)
    if x.shape[2] == 1:
        x = np.repeat(x, 3, axis=2)
    elif x.shape[2] != 3:
        raise ValueError("PPM export needs 1 or 3 channels")
    h, w, _ = x.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(x.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P6":
        raise FormatError("only binary P6 PPM files are supported")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise FormatError("only 8-bit PPM files are supported")
    pix = parts[4][: w * h * 3]
    if len(pix) != w * h * 3:
        raise FormatError("truncated PPM payload")
    return np.frombuffer(pix, dtype=np.uint8).reshape(h, w, 3) / 255.0


def minmax_scale(grid: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(grid)), float(np.max(grid))
    if hi <= lo:
        return np.zeros_like(grid, dtype=np.float64)
    return (grid - lo) / (hi - lo)
