"""Navigation message words, subframes, parity, and bitstream handling.

Word layout follows the L1 legacy format: 30-bit words, 24 data bits followed
by 6 parity bits from the (32,26) extended Hamming code, parity chained
through the last two bits of the preceding word (D29*, D30*). Data bits are
transmitted XOR'd with D30*. The code has minimum distance 4, so every error
pattern of up to three bit flips inside one 32-bit span is detected.

Subframe field conventions used by this simulator (there is no spreading-code
layer, so the satellite identifies itself in the message):

====  ==========================================================
word  content (24 data bits each)
====  ==========================================================
1     preamble 10001011, sat_id (6 bits), 10 reserved zero bits
2     tow (17 bits, 6 s units), alert+antispoof zeros, subframe_id
      (3 bits), 2 bits solved so the word's D29 = D30 = 0
3     week_number (13 bits), 11 reserved zero bits
4..9  payload bytes 0..17
10    payload bytes 18..19, 6 reserved zero bits, 2 solved bits
====  ==========================================================

Words 2 and 10 zero their trailing parity bits the way the broadcast signal
does, which makes every subframe decodable with an assumed (0, 0) carry-in.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    PREAMBLE,
    PREAMBLE_BITS,
    SUBFRAME_BITS,
    SUBFRAME_WORDS,
    TOW_COUNT,
    WORD_BITS,
    WORD_DATA_BITS,
)

PAYLOAD_BYTES = 20

# Parity tap positions (1-based source-data indices d1..d24) for D25..D30.
_PARITY_TAPS = (
    (1, 2, 3, 5, 6, 10, 11, 12, 13, 14, 17, 18, 20, 23),
    (2, 3, 4, 6, 7, 11, 12, 13, 14, 15, 18, 19, 21, 24),
    (1, 3, 4, 5, 7, 8, 12, 13, 14, 15, 16, 19, 20, 22),
    (2, 4, 5, 6, 8, 9, 13, 14, 15, 16, 17, 20, 21, 23),
    (1, 3, 5, 6, 7, 9, 10, 14, 15, 16, 17, 18, 21, 22, 24),
    (3, 5, 6, 8, 9, 10, 11, 13, 15, 19, 22, 23, 24),
)
# Which carry bit seeds each parity equation: 0 -> D29*, 1 -> D30*.
_PARITY_CARRY = (0, 1, 0, 1, 1, 0)

_TAP_MASKS = tuple(
    sum(1 << (WORD_DATA_BITS - i) for i in taps) for taps in _PARITY_TAPS
)

_DATA_MASK = (1 << WORD_DATA_BITS) - 1
_PARITY_MASK = (1 << 6) - 1


class ParityError(ValueError):
    """A word failed its parity check."""


class DecodeError(ValueError):
    """A subframe's fields are structurally invalid."""


def parity_bits(data24: int, d29_prev: int, d30_prev: int) -> int:
    """Six parity bits for 24 source data bits and the previous word's tail."""
    carry = (d29_prev, d30_prev)
    out = 0
    for mask, c in zip(_TAP_MASKS, _PARITY_CARRY):
        out = (out << 1) | (((data24 & mask).bit_count() + carry[c]) & 1)
    return out


def encode_word(data24: int, d29_prev: int = 0, d30_prev: int = 0) -> int:
    """Encode 24 source bits into a transmitted 30-bit word.

    Transmitted data bits are the source bits XOR D30* of the previous word;
    parity is computed over the source bits.
    """
    if not 0 <= data24 <= _DATA_MASK:
        raise ValueError(f"data24 out of range: {data24:#x}")
    tx24 = data24 ^ (_DATA_MASK if d30_prev else 0)
    return (tx24 << 6) | parity_bits(data24, d29_prev, d30_prev)


def check_word(word30: int, d29_prev: int = 0, d30_prev: int = 0) -> int:
    """Parity-check a received word and return its 24 source data bits.

    Raises ParityError when the recomputed parity disagrees. The check is
    invariant under full polarity inversion of the stream because the carry
    bits invert along with the word.
    """
    if not 0 <= word30 < (1 << WORD_BITS):
        raise ValueError(f"word out of range: {word30:#x}")
    data24 = (word30 >> 6) ^ (_DATA_MASK if d30_prev else 0)
    if parity_bits(data24, d29_prev, d30_prev) != word30 & _PARITY_MASK:
        raise ParityError("parity mismatch")
    return data24


# Tap masks with bits d23, d24 removed, used when solving the trailing bits.
_D29_PARTIAL = _TAP_MASKS[4] & ~0b11
_D30_PARTIAL = _TAP_MASKS[5] & ~0b11


def solve_trailing_bits(data22: int, d29_prev: int, d30_prev: int) -> int:
    """Pick d23, d24 so the encoded word ends with parity bits D29 = D30 = 0.

    data22 holds source bits d1..d22; the returned value is the full 24-bit
    data field.
    """
    if not 0 <= data22 < (1 << 22):
        raise ValueError(f"data22 out of range: {data22:#x}")
    top = data22 << 2
    d24 = ((top & _D29_PARTIAL).bit_count() + d30_prev) & 1
    d23 = ((top & _D30_PARTIAL).bit_count() + d29_prev + d24) & 1
    return top | (d23 << 1) | d24


@dataclass(frozen=True)
class NavWord:
    """One transmitted 30-bit word plus the carry bits it was encoded under."""

    word: int
    d29_prev: int = 0
    d30_prev: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.word < (1 << WORD_BITS):
            raise ValueError("word out of range")
        if self.d29_prev not in (0, 1) or self.d30_prev not in (0, 1):
            raise ValueError("carry bits must be 0 or 1")

    @property
    def bits(self) -> np.ndarray:
        return word_to_bits(self.word)

    @property
    def data(self) -> int:
        return check_word(self.word, self.d29_prev, self.d30_prev)


def word_to_bits(word30: int) -> np.ndarray:
    """30-bit word to a bit array, first transmitted bit at index 0."""
    return np.array(
        [(word30 >> (WORD_BITS - 1 - i)) & 1 for i in range(WORD_BITS)],
        dtype=np.uint8,
    )


def bits_to_word(bits: np.ndarray) -> int:
    if len(bits) != WORD_BITS:
        raise ValueError("expected 30 bits")
    word = 0
    for b in bits:
        word = (word << 1) | int(b)
    return word


@dataclass(frozen=True)
class Subframe:
    """One decoded or built 300-bit subframe.

    `words` carries the transmitted 30-bit integers (not compared for
    equality; two subframes with identical fields are the same subframe even
    if their parity chaining context differed).
    """

    sat_id: int
    subframe_id: int
    tow: int
    week_number: int
    payload: bytes = b""
    words: tuple[int, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.sat_id <= 32:
            raise DecodeError(f"sat_id out of range: {self.sat_id}")
        if not 1 <= self.subframe_id <= 5:
            raise DecodeError(f"subframe_id out of range: {self.subframe_id}")
        if not 0 <= self.tow < TOW_COUNT:
            raise DecodeError(f"tow out of range: {self.tow}")
        if not 0 <= self.week_number < (1 << 13):
            raise DecodeError(f"week_number out of range: {self.week_number}")
        if len(self.payload) > PAYLOAD_BYTES:
            raise DecodeError("payload longer than 20 bytes")


def build_subframe(
    sat_id: int,
    subframe_id: int,
    tow: int,
    week_number: int,
    payload: bytes = b"",
    *,
    d29_prev: int = 0,
    d30_prev: int = 0,
) -> Subframe:
    """Assemble and encode one subframe; returns it with transmitted words."""
    sf = Subframe(sat_id, subframe_id, tow, week_number, payload)
    pay = payload.ljust(PAYLOAD_BYTES, b"\x00")

    words: list[int] = []
    d29, d30 = d29_prev, d30_prev

    def emit(data24: int) -> None:
        nonlocal d29, d30
        w = encode_word(data24, d29, d30)
        words.append(w)
        d29, d30 = (w >> 1) & 1, w & 1

    def emit_solved(data22: int) -> None:
        emit(solve_trailing_bits(data22, d29, d30))

    emit((PREAMBLE << 16) | (sat_id << 10))
    emit_solved((tow << 5) | subframe_id)  # tow(17) alert(1) as(1) id(3)
    emit(week_number << 11)
    for k in range(6):
        chunk = pay[3 * k : 3 * k + 3]
        emit((chunk[0] << 16) | (chunk[1] << 8) | chunk[2])
    emit_solved(((pay[18] << 8) | pay[19]) << 6)

    return Subframe(sat_id, subframe_id, tow, week_number, payload, tuple(words))


def subframe_bits(sf: Subframe) -> np.ndarray:
    """Transmitted bit array (300 bits) of a built subframe."""
    if len(sf.words) != SUBFRAME_WORDS:
        raise ValueError("subframe has no encoded words")
    return np.concatenate([word_to_bits(w) for w in sf.words])


def decode_subframe(
    bits: np.ndarray, *, d29_prev: int = 0, d30_prev: int = 0
) -> Subframe:
    """Decode 300 bits into a Subframe, verifying every word's parity."""
    if len(bits) != SUBFRAME_BITS:
        raise ValueError("expected 300 bits")
    words = [bits_to_word(bits[30 * i : 30 * i + 30]) for i in range(SUBFRAME_WORDS)]
    data: list[int] = []
    d29, d30 = d29_prev, d30_prev
    for i, w in enumerate(words):
        try:
            data.append(check_word(w, d29, d30))
        except ParityError as exc:
            raise ParityError(f"word {i + 1}: {exc}") from exc
        d29, d30 = (w >> 1) & 1, w & 1

    if data[0] >> 16 != PREAMBLE:
        raise DecodeError("missing preamble")
    sat_id = (data[0] >> 10) & 0x3F
    tow = data[1] >> 7
    subframe_id = (data[1] >> 2) & 0x7
    week_number = data[2] >> 11
    pay = bytearray()
    for d in data[3:9]:
        pay += bytes(((d >> 16) & 0xFF, (d >> 8) & 0xFF, d & 0xFF))
    pay += bytes((data[9] >> 16, (data[9] >> 8) & 0xFF))
    return Subframe(sat_id, subframe_id, tow, week_number, bytes(pay), tuple(words))


def extract_handover(sf: Subframe) -> tuple[int, int]:
    """(tow, week_number) from a subframe, re-verifying words 2 and 3."""
    if len(sf.words) >= 3:
        d29, d30 = (sf.words[0] >> 1) & 1, sf.words[0] & 1
        data2 = check_word(sf.words[1], d29, d30)
        check_word(sf.words[2], (sf.words[1] >> 1) & 1, sf.words[1] & 1)
        if data2 >> 7 != sf.tow:
            raise DecodeError("handover word disagrees with decoded tow")
    return sf.tow, sf.week_number


@dataclass
class BitstreamCursor:
    """Receiver-side position in the message stream.

    word_index runs 1..10, bit_index 0..29. tow_current is the handover count
    of the subframe currently in flight (the count at its end).
    """

    word_index: int = 1
    bit_index: int = 0
    tow_current: int = 0
    polarity: int = 1  # +1 normal, -1 inverted

    def __post_init__(self) -> None:
        if not 1 <= self.word_index <= SUBFRAME_WORDS:
            raise ValueError("word_index out of range")
        if not 0 <= self.bit_index < WORD_BITS:
            raise ValueError("bit_index out of range")
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")

    def advance_bits(self, n: int) -> None:
        """Move forward n bits, carrying through words, subframes, the week."""
        if n < 0:
            raise ValueError("cannot advance backwards")
        pos = (self.word_index - 1) * WORD_BITS + self.bit_index + n
        self.tow_current = (self.tow_current + pos // SUBFRAME_BITS) % TOW_COUNT
        pos %= SUBFRAME_BITS
        self.word_index = pos // WORD_BITS + 1
        self.bit_index = pos % WORD_BITS


@dataclass(frozen=True)
class PreambleHit:
    offset: int
    inverted: bool


def _candidate_ok(bits: np.ndarray, off: int, inverted: bool) -> bool:
    """Validate a preamble candidate against the word-1/word-2 structure."""
    if off + 2 * WORD_BITS > len(bits):
        return False
    window = bits[max(off - 2, 0) : off + 2 * WORD_BITS]
    if inverted:
        window = 1 - window
    lead = off - max(off - 2, 0)
    d29, d30 = (0, 0) if lead < 2 else (int(window[0]), int(window[1]))
    w1 = bits_to_word(window[lead : lead + WORD_BITS])
    w2 = bits_to_word(window[lead + WORD_BITS : lead + 2 * WORD_BITS])
    try:
        d1 = check_word(w1, d29, d30)
        d2 = check_word(w2, (w1 >> 1) & 1, w1 & 1)
    except ParityError:
        return False
    if d1 >> 16 != PREAMBLE or d1 & 0x3FF:
        return False
    if not 1 <= (d1 >> 10) & 0x3F <= 32:
        return False
    return (d2 >> 7) < TOW_COUNT and 1 <= (d2 >> 2) & 0x7 <= 5


def _pattern_offsets(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(bits) < PREAMBLE_BITS:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty
    pattern = word_to_bits(PREAMBLE << 22)[:8]
    windows = np.lib.stride_tricks.sliding_window_view(bits, 8)
    normal = np.flatnonzero((windows == pattern).all(axis=1))
    flipped = np.flatnonzero((windows == 1 - pattern).all(axis=1))
    return normal, flipped


def scan_for_preamble(bits: np.ndarray) -> PreambleHit | None:
    """First validated subframe boundary in the stream, or None.

    A candidate must carry the preamble pattern (either polarity), pass
    parity on words 1 and 2, have zero TLM reserved bits, a sat_id in 1..32,
    a plausible TOW and a subframe id in 1..5.
    """
    normal, flipped = _pattern_offsets(bits)
    hits = sorted(
        [(int(o), False) for o in normal] + [(int(o), True) for o in flipped]
    )
    for off, inv in hits:
        if _candidate_ok(bits, off, inv):
            return PreambleHit(off, inv)
    return None


def find_subframe_boundaries(bits: np.ndarray) -> list[PreambleHit]:
    """All validated subframe boundaries in the stream."""
    normal, flipped = _pattern_offsets(bits)
    out = [
        PreambleHit(int(o), inv)
        for offs, inv in ((normal, False), (flipped, True))
        for o in offs
        if _candidate_ok(bits, int(o), inv)
    ]
    return sorted(out, key=lambda h: h.offset)


# --- packed bitstream files and hex dumps ---------------------------------

_BITSTREAM_MAGIC = b"NAVB"
_BITSTREAM_VERSION = 1


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack a bit array MSB-first (first bit becomes bit 7 of byte 0)."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes, n_bits: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if len(bits) < n_bits:
        raise ValueError("not enough data for the declared bit count")
    return bits[:n_bits]


def write_bitstream(path, bits: np.ndarray) -> None:
    """Write a packed stream: magic, version, big-endian bit count, bytes."""
    with open(path, "wb") as fh:
        fh.write(_BITSTREAM_MAGIC)
        fh.write(struct.pack(">HQ", _BITSTREAM_VERSION, len(bits)))
        fh.write(pack_bits(bits))


def read_bitstream(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != _BITSTREAM_MAGIC:
            raise DecodeError("bad bitstream magic")
        version, n = struct.unpack(">HQ", fh.read(10))
        if version != _BITSTREAM_VERSION:
            raise DecodeError(f"unsupported bitstream version {version}")
        return unpack_bits(fh.read(), n)


def to_hex_dump(bits: np.ndarray) -> str:
    """Human-readable dump: a bit-count header, then 16 packed bytes per line."""
    data = pack_bits(bits)
    lines = [f"bits={len(bits)}"]
    for i in range(0, len(data), 16):
        lines.append(data[i : i + 16].hex())
    return "\n".join(lines) + "\n"


def from_hex_dump(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("bits="):
        raise DecodeError("missing bits= header")
    n = int(lines[0][5:])
    return unpack_bits(bytes.fromhex("".join(lines[1:])), n)
