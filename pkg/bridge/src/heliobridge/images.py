"""Image loading and the input policies documented in extractor ids.

Solar tiles are single-channel; backbones expect 3-channel input. The
default policy replicates the gray channel three times ("gray3"); an
optional matplotlib colormap can be applied instead for sensitivity
studies ("cmap:NAME").
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MissingDependency, UnreadableImage

IMAGE_SUFFIXES = (".png", ".htil")


def list_images(folder) -> list[Path]:
    """Image files sorted lexicographically by name; this fixes row order."""
    folder = Path(folder)
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_gray(path) -> np.ndarray:
    """Decode one file to a float32 grayscale array in [0, 1]."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".htil":
            return _load_htil(path)
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float32) / 255.0
    except UnreadableImage:
        raise
    except Exception as exc:
        raise UnreadableImage(f"{path}: {exc}") from exc


def _load_htil(path: Path) -> np.ndarray:
    buf = path.read_bytes()
    if buf[:4] != b"HTIL" or len(buf) < 12:
        raise UnreadableImage(f"{path}: not an HTIL tile")
    w, h = struct.unpack("<II", buf[4:12])
    if len(buf) != 12 + 4 * w * h:
        raise UnreadableImage(f"{path}: truncated HTIL payload")
    data = np.frombuffer(buf[12:], dtype="<f4").reshape(h, w)
    return np.clip(data, 0.0, 1.0).astype(np.float32)


def replicate_grayscale(gray: np.ndarray) -> np.ndarray:
    """(H, W) -> (3, H, W) with three identical channels."""
    return np.repeat(gray[None, :, :], 3, axis=0)


def colormap_channels(gray: np.ndarray, cmap_name: str) -> np.ndarray:
    """(H, W) -> (3, H, W) through a matplotlib colormap."""
    try:
        import matplotlib
    except ImportError as exc:
        raise MissingDependency("colormap policy needs matplotlib") from exc
    cmap = matplotlib.colormaps[cmap_name]
    rgb = cmap(gray)[..., :3].astype(np.float32)
    return np.moveaxis(rgb, -1, 0)


def to_channels(gray: np.ndarray, policy: str) -> np.ndarray:
    if policy == "gray3":
        return replicate_grayscale(gray)
    if policy.startswith("cmap:"):
        return colormap_channels(gray, policy.split(":", 1)[1])
    raise ValueError(f"unknown channel policy {policy!r}")
