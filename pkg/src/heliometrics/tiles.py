"""Image file exchange: raw float tiles (HTIL) and 8-bit grayscale PNG.

HTIL layout: magic "HTIL", u32 width, u32 height (little-endian), then
height*width float32 values row-major. It carries normalized images without
quantization loss; PNG is the 8-bit view for anything expecting pictures.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import BadMagic, CorruptLength
from .imageprep import NormalizedImage, quantize_u8

MAGIC = b"HTIL"

IMAGE_SUFFIXES = (".htil", ".png")


def write_htil(img: NormalizedImage, path) -> None:
    h, w = img.data.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(img.data.astype("<f4").tobytes())


def read_htil(path) -> NormalizedImage:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise BadMagic(f"{path} is not an HTIL tile")
    if len(buf) < 12:
        raise CorruptLength(f"{path}: header truncated")
    w, h = struct.unpack("<II", buf[4:12])
    want = 12 + 4 * w * h
    if len(buf) != want:
        raise CorruptLength(f"{path}: expected {want} bytes, found {len(buf)}")
    data = np.frombuffer(buf[12:], dtype="<f4").reshape(h, w)
    return NormalizedImage(
        np.clip(data.astype(np.float64), 0.0, 1.0), source_id=Path(path).stem
    )


def write_png(img: NormalizedImage, path) -> None:
    Image.fromarray(quantize_u8(img), mode="L").save(path, format="PNG")


def read_png(path) -> NormalizedImage:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return NormalizedImage(arr / 255.0, source_id=Path(path).stem)


def read_image(path) -> NormalizedImage:
    path = Path(path)
    if path.suffix == ".htil":
        return read_htil(path)
    return read_png(path)


def list_images(folder) -> list[Path]:
    """Image files under ``folder``, lexicographic by name."""
    folder = Path(folder)
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_folder(folder) -> list[NormalizedImage]:
    return [read_image(p) for p in list_images(folder)]
