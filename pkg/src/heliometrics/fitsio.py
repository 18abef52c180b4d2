"""Bit-exact FITS primary-HDU reader/writer and the validity filter.

Scope is the classic subset used by Level-1 solar EUV cutouts: 2880-byte
blocks, 80-byte fixed-format header cards terminated by END, big-endian
data, BZERO/BSCALE linear scaling. Extensions after the primary HDU are
skipped with a warning; tile compression and WCS are out of scope.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    InvariantViolation,
    MalformedCard,
    MalformedHeader,
    TruncatedFile,
    UnsupportedBitpix,
)

BLOCK = 2880
CARD = 80

# keyword -> numpy dtype of the stored array
_DTYPES = {
    8: ">u1",
    16: ">i2",
    32: ">i4",
    64: ">i8",
    -32: ">f4",
    -64: ">f8",
}

_INT_RANGES = {
    8: (0, 255),
    16: (-(2**15), 2**15 - 1),
    32: (-(2**31), 2**31 - 1),
    64: (-(2**63), 2**63 - 1),
}

_KEYWORD_CHARS = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_")
_COMMENTARY = ("", "COMMENT", "HISTORY")

_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([EDed][+-]?\d+)?$")

# Reported for a missing or non-integer quality card.
MISSING_QUALITY = -1


@dataclass
class Card:
    """One 80-byte header record.

    ``raw`` keeps the original card image when the card came from a file, so
    writing preserves the header byte-for-byte. It is ignored by equality.
    """

    keyword: str
    value: bool | int | float | str | None = None
    comment: str | None = None
    raw: str | None = field(default=None, compare=False, repr=False)


@dataclass(eq=False)
class FitsImage:
    """Parsed primary HDU: ordered cards plus the physical-DN pixel array."""

    cards: list[Card]
    bitpix: int
    naxes: list[int]
    bzero: float
    bscale: float
    data: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, FitsImage):
            return NotImplemented
        return (
            self.cards == other.cards
            and self.bitpix == other.bitpix
            and self.naxes == other.naxes
            and self.bzero == other.bzero
            and self.bscale == other.bscale
            and np.array_equal(self.data, other.data)
        )

    def card_value(self, keyword: str, default=None):
        """Value of the first card with this keyword, or ``default``."""
        for card in self.cards:
            if card.keyword == keyword:
                return card.value
        return default


@dataclass(frozen=True)
class QualityVerdict:
    quality_flag: int
    accepted: bool


def _parse_card(text: str) -> Card | None:
    """Parse one 80-char card. Returns None for the END card."""
    keyword = text[:8].rstrip(" ")
    if any(c not in _KEYWORD_CHARS for c in keyword):
        raise MalformedCard(f"bad keyword field {text[:8]!r}")
    if keyword == "END":
        return None
    if keyword not in _COMMENTARY and text[8:10] == "= ":
        value, comment = _parse_value_field(text[10:])
        return Card(keyword, value, comment, raw=text)
    # Commentary card: everything after the keyword is text.
    return Card(keyword, None, text[8:].rstrip(" "), raw=text)


def _parse_value_field(rest: str) -> tuple[bool | int | float | str | None, str | None]:
    body = rest.lstrip(" ")
    if body.startswith("'"):
        chars = []
        i = 1
        while True:
            if i >= len(body):
                raise MalformedCard(f"unterminated string in {rest!r}")
            if body[i] == "'":
                if i + 1 < len(body) and body[i + 1] == "'":
                    chars.append("'")
                    i += 2
                    continue
                i += 1
                break
            chars.append(body[i])
            i += 1
        # Trailing blanks inside the quotes are padding, not value.
        return "".join(chars).rstrip(" "), _parse_comment(body[i:])

    slash = body.find("/")
    token = (body if slash < 0 else body[:slash]).strip(" ")
    comment = None if slash < 0 else _parse_comment(body[slash:])
    if token == "":
        return None, comment
    if token == "T":
        return True, comment
    if token == "F":
        return False, comment
    if _INT_RE.match(token):
        return int(token), comment
    if _FLOAT_RE.match(token):
        return float(token.replace("D", "E").replace("d", "e")), comment
    raise MalformedCard(f"unparseable value {token!r}")


def _parse_comment(after_value: str) -> str | None:
    text = after_value.lstrip(" ")
    if not text:
        return None
    if not text.startswith("/"):
        raise MalformedCard(f"junk after value: {after_value!r}")
    text = text[1:]
    if text.startswith(" "):
        text = text[1:]
    return text.rstrip(" ")


def _require_int(cards: list[Card], keyword: str) -> int:
    for card in cards:
        if card.keyword == keyword:
            if type(card.value) is not int:
                raise MalformedHeader(f"{keyword} must be an integer, got {card.value!r}")
            return card.value
    raise MalformedHeader(f"missing mandatory keyword {keyword}")


def _optional_number(cards: list[Card], keyword: str, default: float) -> float:
    for card in cards:
        if card.keyword == keyword:
            if type(card.value) not in (int, float):
                raise MalformedHeader(f"{keyword} must be numeric, got {card.value!r}")
            return float(card.value)
    return default


def parse_fits(buf: bytes) -> FitsImage:
    """Decode the primary HDU of a FITS byte sequence.

    Header cards are kept in order with their raw images; the data payload
    is scaled to physical DN (bscale * raw + bzero) with round-half-even
    where scaling is fractional.
    """
    if len(buf) == 0 or len(buf) % BLOCK != 0:
        raise TruncatedFile(f"{len(buf)} bytes is not whole 2880-byte blocks")

    cards: list[Card] = []
    pos = 0
    ended = False
    while pos + CARD <= len(buf):
        chunk = buf[pos : pos + CARD]
        if any(b < 0x20 or b > 0x7E for b in chunk):
            raise MalformedCard(f"non-ASCII byte in card at offset {pos}")
        card = _parse_card(chunk.decode("ascii"))
        pos += CARD
        if card is None:
            ended = True
            break
        cards.append(card)
    if not ended:
        raise TruncatedFile("header has no END card")
    header_end = math.ceil(pos / BLOCK) * BLOCK

    bitpix = _require_int(cards, "BITPIX")
    if bitpix not in _DTYPES:
        raise UnsupportedBitpix(f"BITPIX={bitpix}")
    naxis = _require_int(cards, "NAXIS")
    if not 0 <= naxis <= 999:
        raise MalformedHeader(f"NAXIS={naxis} out of range")
    naxes = []
    for i in range(1, naxis + 1):
        n = _require_int(cards, f"NAXIS{i}")
        if n < 0:
            raise MalformedHeader(f"NAXIS{i}={n} is negative")
        naxes.append(n)
    bzero = _optional_number(cards, "BZERO", 0.0)
    bscale = _optional_number(cards, "BSCALE", 1.0)
    if bscale == 0:
        raise MalformedHeader("BSCALE=0")

    if naxis == 0:
        data = np.zeros((0,), dtype=np.int64)
        nbytes = 0
    else:
        nelems = math.prod(naxes)
        nbytes = abs(bitpix) // 8 * nelems
        if len(buf) < header_end + nbytes:
            raise TruncatedFile(
                f"data needs {nbytes} bytes, only {len(buf) - header_end} present"
            )
        raw = np.frombuffer(buf[header_end : header_end + nbytes], dtype=_DTYPES[bitpix])
        raw = raw.reshape(tuple(reversed(naxes)))
        data = _scale_to_dn(raw, bitpix, bzero, bscale)

    data_end = header_end + math.ceil(nbytes / BLOCK) * BLOCK
    if len(buf) > data_end:
        warnings.warn(
            f"{len(buf) - data_end} bytes after the primary HDU ignored "
            "(extensions are not parsed)",
            stacklevel=2,
        )
    return FitsImage(cards, bitpix, naxes, bzero, bscale, data)


def _scale_to_dn(raw: np.ndarray, bitpix: int, bzero: float, bscale: float) -> np.ndarray:
    if bitpix < 0 and not np.all(np.isfinite(raw)):
        raise MalformedHeader("floating-point data contains non-finite pixels")
    if bscale == 1.0 and bzero == 0.0:
        if bitpix > 0:
            return raw.astype(np.int64)
        return _rint_to_int64(raw.astype(np.float64))
    if bitpix > 0 and float(bscale).is_integer() and float(bzero).is_integer():
        # Exact integer path; endpoint check guards int64 overflow.
        bs, bz = int(bscale), int(bzero)
        if raw.size:
            ends = [bs * int(raw.min()) + bz, bs * int(raw.max()) + bz]
            if min(ends) < -(2**63) or max(ends) > 2**63 - 1:
                raise MalformedHeader("BZERO/BSCALE map data outside int64 range")
        return raw.astype(np.int64) * bs + bz
    return _rint_to_int64(bscale * raw.astype(np.float64) + bzero)


def _rint_to_int64(phys: np.ndarray) -> np.ndarray:
    rounded = np.rint(phys)
    if rounded.size and (rounded.min() < -(2**63) or rounded.max() >= 2**63):
        raise MalformedHeader("scaled data outside int64 range")
    return rounded.astype(np.int64)


def quality_filter(img: FitsImage, keyword: str = "QUALITY") -> QualityVerdict:
    """Accept the image iff its quality card exists and equals 0.

    The keyword is configurable because archives differ on where the flag
    lives; a missing or non-integer card rejects with a sentinel flag.
    """
    value = img.card_value(keyword)
    if type(value) is not int:
        return QualityVerdict(quality_flag=MISSING_QUALITY, accepted=False)
    return QualityVerdict(quality_flag=value, accepted=value == 0)


def _format_value(value: bool | int | float | str) -> str:
    if value is True:
        return "T".rjust(20)
    if value is False:
        return "F".rjust(20)
    if isinstance(value, int):
        return str(value).rjust(20)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvariantViolation(f"non-finite card value {value!r}")
        return repr(value).rjust(20)
    escaped = value.replace("'", "''")
    return ("'" + escaped.ljust(8) + "'").ljust(20)


def _format_card(card: Card) -> str:
    if len(card.keyword) > 8:
        raise InvariantViolation(f"keyword {card.keyword!r} longer than 8 bytes")
    if any(c not in _KEYWORD_CHARS for c in card.keyword):
        raise InvariantViolation(f"keyword {card.keyword!r} has invalid characters")
    if card.keyword == "END":
        raise InvariantViolation("END is emitted by the writer, not stored as a card")

    if card.raw is not None:
        if len(card.raw) != CARD:
            raise InvariantViolation("raw card image must be exactly 80 chars")
        return card.raw

    if card.keyword in _COMMENTARY and card.value is None:
        text = card.keyword.ljust(8) + (card.comment or "")
    else:
        text = card.keyword.ljust(8) + "= "
        if card.value is None:
            text += " " * 20
        else:
            text += _format_value(card.value)
        if card.comment is not None:
            text += " / " + card.comment
    if len(text) > CARD:
        raise InvariantViolation(f"card for {card.keyword!r} exceeds 80 chars")
    text = text.ljust(CARD)

    # Canonical formatting must survive a parse round-trip.
    try:
        parsed = _parse_card(text)
    except MalformedCard as exc:
        raise InvariantViolation(f"card not representable: {exc}") from exc
    if parsed != Card(card.keyword, card.value, card.comment):
        raise InvariantViolation(
            f"card {card.keyword!r} does not round-trip "
            f"(value/comment carry lost padding?)"
        )
    return text


def write_fits(img: FitsImage) -> bytes:
    """Serialize an image so that parse_fits inverts it exactly."""
    if img.bitpix not in _DTYPES:
        raise InvariantViolation(f"BITPIX={img.bitpix}")
    for keyword, want in [("BITPIX", img.bitpix), ("NAXIS", len(img.naxes))] + [
        (f"NAXIS{i}", n) for i, n in enumerate(img.naxes, start=1)
    ]:
        got = img.card_value(keyword)
        if type(got) is not int or got != want:
            raise InvariantViolation(f"{keyword} card disagrees with image fields")
    if _optional_number(img.cards, "BZERO", 0.0) != img.bzero:
        raise InvariantViolation("BZERO card disagrees with bzero field")
    if _optional_number(img.cards, "BSCALE", 1.0) != img.bscale:
        raise InvariantViolation("BSCALE card disagrees with bscale field")

    header = "".join(_format_card(c) for c in img.cards) + "END".ljust(CARD)
    header += " " * (-len(header) % BLOCK)
    out = bytearray(header.encode("ascii"))

    if img.naxes:
        expected_shape = tuple(reversed(img.naxes))
        if tuple(img.data.shape) != expected_shape:
            raise InvariantViolation(
                f"data shape {img.data.shape} does not match naxes {img.naxes}"
            )
        payload = _encode_data(img)
        out += payload
        out += b"\x00" * (-len(payload) % BLOCK)
    elif img.data.size:
        raise InvariantViolation("NAXIS=0 image must carry no data")
    return bytes(out)


def _encode_data(img: FitsImage) -> bytes:
    dn = np.asarray(img.data, dtype=np.int64)
    raw_f = (dn.astype(np.float64) - img.bzero) / img.bscale
    if img.bitpix > 0:
        # Clamp into the storage range before the forward check: a boundary
        # DN can be representable by a smaller raw under fractional scaling.
        lo, hi = _INT_RANGES[img.bitpix]
        raw = np.clip(np.rint(raw_f), lo, hi).astype(_DTYPES[img.bitpix])
    else:
        raw = raw_f.astype(_DTYPES[img.bitpix])
    # The writer refuses anything the reader would not reproduce exactly.
    recovered = _scale_to_dn(raw, img.bitpix, img.bzero, img.bscale)
    if not np.array_equal(recovered, dn):
        raise InvariantViolation("DN values are not representable under this scaling")
    return raw.tobytes()


def build_image(
    data=None,
    bitpix: int = 16,
    bzero: float = 0.0,
    bscale: float = 1.0,
    extra_cards: Iterable[Card] = (),
) -> FitsImage:
    """Assemble a consistent FitsImage around a DN array.

    Emits the mandatory SIMPLE/BITPIX/NAXIS/NAXISn cards (plus BZERO/BSCALE
    when non-default) so the result satisfies the write_fits contract.
    ``data=None`` builds a header-only HDU (NAXIS=0).
    """
    if data is None:
        arr = np.zeros((0,), dtype=np.int64)
        naxes: list[int] = []
    else:
        arr = np.asarray(data, dtype=np.int64)
        if arr.ndim == 0:
            raise InvariantViolation("scalar data is not a FITS image")
        naxes = [int(n) for n in reversed(arr.shape)]
    cards = [
        Card("SIMPLE", True, "conforms to FITS standard"),
        Card("BITPIX", bitpix),
        Card("NAXIS", len(naxes)),
    ]
    cards += [Card(f"NAXIS{i}", n) for i, n in enumerate(naxes, start=1)]
    if bzero != 0.0:
        cards.append(Card("BZERO", bzero))
    if bscale != 1.0:
        cards.append(Card("BSCALE", bscale))
    cards.extend(extra_cards)
    return FitsImage(cards, bitpix, naxes, float(bzero), float(bscale), arr)

