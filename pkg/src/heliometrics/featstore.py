"""FEAT1 feature-file format: the contract between feature extractors and
the metric engine.

Layout (all integers little-endian):

    magic   5 bytes  b"FEAT1"
    u16     format version (1)
    u16     extractor id length, then that many UTF-8 bytes
    u32     feature dimension d
    u64     row count n
    n records, each:
        u16     sample id length, then that many UTF-8 bytes
        d       float32 values

Values are stored in single precision (extractors emit single precision);
consumers accumulate in double precision.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator

import numpy as np

from .errors import (
    BadMagic,
    CorruptLength,
    DimMismatch,
    ExtractorMismatch,
    InvariantViolation,
    IoFailure,
    NonFiniteValue,
)

MAGIC = b"FEAT1"
VERSION = 1

# Extractors whose output dimensionality is pinned by convention. The id may
# carry a "+policy" suffix (resize/channel policy), checked on the base name.
KNOWN_DIMS = {"inception-v3-pool3": 2048}


@dataclass
class FeatureSet:
    """An n x d matrix of embedding rows tagged with the extractor that made it."""

    extractor_id: str
    rows: np.ndarray
    sample_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2:
            raise InvariantViolation(f"rows must be 2-D, got shape {self.rows.shape}")
        if self.rows.shape[0] < 1:
            raise InvariantViolation("a FeatureSet holds at least one row")
        if not self.sample_ids:
            self.sample_ids = [f"row{i:06d}" for i in range(self.rows.shape[0])]
        if len(self.sample_ids) != self.rows.shape[0]:
            raise InvariantViolation(
                f"{len(self.sample_ids)} sample ids for {self.rows.shape[0]} rows"
            )
        if not np.all(np.isfinite(self.rows)):
            raise InvariantViolation("feature rows must be finite")
        base = self.extractor_id.split("+", 1)[0]
        want = KNOWN_DIMS.get(base)
        if want is not None and self.rows.shape[1] != want:
            raise InvariantViolation(
                f"extractor {base!r} emits dim {want}, got {self.rows.shape[1]}"
            )

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def write_features(fs: FeatureSet, sink: BinaryIO) -> None:
    """Serialize ``fs`` to ``sink``. Validates before any byte is written."""
    ids = [sid.encode("utf-8") for sid in fs.sample_ids]
    for raw in ids:
        if len(raw) > 0xFFFF:
            raise InvariantViolation("sample id longer than 65535 bytes")
    ext = fs.extractor_id.encode("utf-8")
    if len(ext) > 0xFFFF:
        raise InvariantViolation("extractor id longer than 65535 bytes")
    try:
        sink.write(MAGIC)
        sink.write(struct.pack("<HH", VERSION, len(ext)))
        sink.write(ext)
        sink.write(struct.pack("<IQ", fs.dim, fs.count))
        for raw, row in zip(ids, fs.rows):
            sink.write(struct.pack("<H", len(raw)))
            sink.write(raw)
            sink.write(row.astype("<f4", copy=False).tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _read_exact(source: BinaryIO, n: int) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise CorruptLength(f"wanted {n} bytes, stream gave {len(buf)}")
    return buf


def iter_features(source: BinaryIO) -> tuple[str, int, int, Iterator[tuple[str, np.ndarray]]]:
    """Parse the FEAT1 header and return (extractor_id, dim, count, row iterator).

    Rows are yielded one at a time so large files can be consumed without
    materializing the full matrix.
    """
    head = source.read(len(MAGIC))
    if head != MAGIC:
        raise BadMagic(f"not a FEAT1 stream (got {head!r})")
    version, ext_len = struct.unpack("<HH", _read_exact(source, 4))
    if version != VERSION:
        raise BadMagic(f"unsupported FEAT1 version {version}")
    extractor_id = _read_exact(source, ext_len).decode("utf-8")
    dim, count = struct.unpack("<IQ", _read_exact(source, 12))
    if dim < 1 or count < 1:
        raise CorruptLength(f"declared dim={dim} count={count}")

    def rows() -> Iterator[tuple[str, np.ndarray]]:
        row_bytes = 4 * dim
        for i in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(source, 2))
            sid = _read_exact(source, id_len).decode("utf-8")
            row = np.frombuffer(_read_exact(source, row_bytes), dtype="<f4")
            if not np.all(np.isfinite(row)):
                raise NonFiniteValue(f"row {i} ({sid!r}) is not finite")
            yield sid, row

    return extractor_id, dim, count, rows()


def read_features(source: BinaryIO) -> FeatureSet:
    """Read a whole FEAT1 stream back into a FeatureSet."""
    extractor_id, dim, count, rows = iter_features(source)
    mat = np.empty((count, dim), dtype=np.float32)
    ids = []
    for i, (sid, row) in enumerate(rows):
        mat[i] = row
        ids.append(sid)
    return FeatureSet(extractor_id=extractor_id, rows=mat, sample_ids=ids)


def load_features(path) -> FeatureSet:
    with open(path, "rb") as fh:
        return read_features(fh)


def save_features(fs: FeatureSet, path) -> None:
    with open(path, "wb") as fh:
        write_features(fs, fh)


def concat(a: FeatureSet, b: FeatureSet) -> FeatureSet:
    """Stack two feature sets from the same extractor, a-rows first."""
    if a.extractor_id != b.extractor_id:
        raise ExtractorMismatch(f"{a.extractor_id!r} vs {b.extractor_id!r}")
    if a.dim != b.dim:
        raise DimMismatch(f"dim {a.dim} vs {b.dim}")
    return FeatureSet(
        extractor_id=a.extractor_id,
        rows=np.vstack([a.rows, b.rows]),
        sample_ids=list(a.sample_ids) + list(b.sample_ids),
    )
