"""Hand-rolled FITS builders and decoders used as oracles.

Everything here is written directly from the interchange rules (2880-byte
blocks, 80-byte cards, big-endian payload, linear scaling) so tests never
depend on the code they are checking.
"""

from __future__ import annotations

import struct

import numpy as np

BLOCK = 2880

FMT = {8: ">B", 16: ">h", 32: ">i", 64: ">q", -32: ">f", -64: ">d"}


def card(keyword: str, value=None, comment: str | None = None) -> str:
    text = f"{keyword:<8}"
    if value is not None or comment is not None:
        if value is None:
            text += "= " + " " * 20
        elif value is True:
            text += "= " + "T".rjust(20)
        elif value is False:
            text += "= " + "F".rjust(20)
        elif isinstance(value, str):
            text += "= " + ("'" + value.replace("'", "''").ljust(8) + "'").ljust(20)
        else:
            text += "= " + str(value).rjust(20)
        if comment is not None:
            text += " / " + comment
    assert len(text) <= 80, text
    return text.ljust(80)


def fits_bytes(
    data=None,
    bitpix: int = 16,
    bzero=None,
    bscale=None,
    extra_cards: list[str] | None = None,
    pad_char: bytes = b" ",
) -> bytes:
    """Assemble a primary HDU byte-for-byte, independent of the library."""
    arr = None if data is None else np.asarray(data)
    cards = [card("SIMPLE", True), card("BITPIX", bitpix)]
    if arr is None:
        cards.append(card("NAXIS", 0))
    else:
        cards.append(card("NAXIS", arr.ndim))
        for i, n in enumerate(reversed(arr.shape), start=1):
            cards.append(card(f"NAXIS{i}", n))
    if bzero is not None:
        cards.append(card("BZERO", bzero))
    if bscale is not None:
        cards.append(card("BSCALE", bscale))
    cards.extend(extra_cards or [])
    cards.append("END".ljust(80))
    header = "".join(cards).encode("ascii")
    header += pad_char * (-len(header) % BLOCK)

    if arr is None:
        return header
    payload = b"".join(
        struct.pack(FMT[bitpix], v) for v in np.asarray(arr).ravel().tolist()
    )
    payload += b"\x00" * (-len(payload) % BLOCK)
    return header + payload


def decode_reference(data_bytes: bytes, bitpix: int, shape, bzero=0.0, bscale=1.0):
    """Per-pixel reference decoder: struct.unpack then scale, half-even round."""
    size = struct.calcsize(FMT[bitpix])
    n = int(np.prod(shape)) if shape else 0
    out = []
    for i in range(n):
        (raw,) = struct.unpack(FMT[bitpix], data_bytes[i * size : (i + 1) * size])
        phys = bscale * raw + bzero
        out.append(phys if isinstance(phys, int) else _round_half_even(phys))
    return np.array(out, dtype=np.int64).reshape(shape)


def _round_half_even(x: float) -> int:
    lo = int(np.floor(x))
    frac = x - lo
    if frac > 0.5:
        return lo + 1
    if frac < 0.5:
        return lo
    return lo if lo % 2 == 0 else lo + 1
