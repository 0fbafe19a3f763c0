"""User videos: fixed-length stacks of frames, plus the binary tensor file."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .raster import FrameImage

MAGIC = b"UVSD"
_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class UserVideo:
    """frames: (n, H, W, C) float32, oldest frame first."""

    frames: np.ndarray
    root: object = None
    label: Optional[int] = None

    def __post_init__(self):
        if self.frames.ndim != 4:
            raise ValueError("frames must be (n, H, W, C)")

    def __len__(self):
        return self.frames.shape[0]


def assemble_video(frames: Sequence[FrameImage], target_length: int = 8, root=None, label=None) -> UserVideo:
    """Stack frames; pad with the last frame or keep only the most recent ones."""
    if target_length < 1:
        raise ValueError("target_length must be >= 1")
    if not frames:
        raise ValueError("at least one frame is required")
    arrays = [f.pixels if isinstance(f, FrameImage) else np.asarray(f) for f in frames]
    shape = arrays[0].shape
    for k, a in enumerate(arrays):
        if a.shape != shape:
            raise ValueError(f"frame {k} has shape {a.shape}, expected {shape}")
    if len(arrays) > target_length:
        arrays = arrays[-target_length:]
    else:
        arrays = arrays + [arrays[-1]] * (target_length - len(arrays))
    return UserVideo(np.stack(arrays).astype(np.float32), root, label)


def write_video(video: UserVideo, path) -> None:
    n, h, w, c = video.frames.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, h, w, c))
        fh.write(np.ascontiguousarray(video.frames, dtype="<f4").tobytes())


def read_video(path, root=None, label=None) -> UserVideo:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, n, h, w, c = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * n * h * w * c
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    frames = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, h, w, c).astype(np.float32)
    return UserVideo(frames, root, label)
