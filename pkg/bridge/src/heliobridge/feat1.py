"""Native FEAT1 emitter.

Layout (little-endian throughout): b"FEAT1", u16 version=1, u16 id length +
UTF-8 extractor id, u32 dim, u64 count, then per row a u16 length + UTF-8
sample id and dim float32 values. Kept independent of the consumer side so
the only contract between the packages is the byte format itself.
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

MAGIC = b"FEAT1"
VERSION = 1


def write_feat1(path, extractor_id: str, rows: np.ndarray, sample_ids: Sequence[str]) -> None:
    rows = np.ascontiguousarray(rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[0] != len(sample_ids) or rows.shape[0] < 1:
        raise ValueError(f"rows {rows.shape} vs {len(sample_ids)} sample ids")
    if not np.all(np.isfinite(rows)):
        raise ValueError("feature rows must be finite")
    ext = extractor_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HH", VERSION, len(ext)))
        fh.write(ext)
        fh.write(struct.pack("<IQ", rows.shape[1], rows.shape[0]))
        for sid, row in zip(sample_ids, rows):
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(row.astype("<f4", copy=False).tobytes())
