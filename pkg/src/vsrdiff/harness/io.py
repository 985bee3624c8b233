"""File formats: the VTR1 video tensor container and P6 PPM frames."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

TENSOR_MAGIC = b"VTR1"
_HEADER = struct.Struct("<4s4I")


class TensorFileError(ValueError):
    """Malformed tensor file; message names the path and byte offset."""


def write_tensor(path, video: np.ndarray) -> None:
    """Write a (T, C, H, W) float array as magic + u32 extents + f32 LE."""
    video = np.asarray(video, dtype="<f4")
    if video.ndim != 4:
        raise ValueError(f"write_tensor: expected (T, C, H, W), got {video.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TENSOR_MAGIC, *video.shape))
        fh.write(np.ascontiguousarray(video).tobytes())


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise TensorFileError(f"{path}: truncated header at byte offset {len(blob)}")
    magic, t, c, h, w = _HEADER.unpack_from(blob, 0)
    if magic != TENSOR_MAGIC:
        raise TensorFileError(f"{path}: bad magic {magic!r} at byte offset 0")
    expected = t * c * h * w * 4
    if len(blob) - _HEADER.size != expected:
        raise TensorFileError(
            f"{path}: payload is {len(blob) - _HEADER.size} bytes at byte offset "
            f"{_HEADER.size}, header declares {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    return data.reshape(t, c, h, w).copy()


def write_ppm(path, frame: np.ndarray) -> None:
    """Write one (3, H, W) frame in [0, 1] as a binary 8-bit P6 PPM."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise ValueError(f"write_ppm: expected (3, H, W), got {frame.shape}")
    _, h, w = frame.shape
    pixels = np.clip(np.round(frame * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(pixels.transpose(1, 2, 0).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 PPM back to a (3, H, W) float array in [0, 1]."""
    blob = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":  # comment line
            pos = blob.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    if fields[0] != b"P6":
        raise ValueError(f"{path}: not a P6 PPM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=pos, count=w * h * 3)
    return pixels.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float32) / 255.0
