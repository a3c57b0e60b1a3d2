"""Reference block compressors: FPC, BDI and bidirectional precision scaling.

Each has an approximate variant controlled by an approximation factor; at
``af = 0`` all three are exact. Compressors return serialized bytes (or a
:class:`ScaledBlock`) or ``None`` when the block does not shrink below 64
bytes.

Serialized forms start with a one-byte scheme tag. Tags live in the
0xC0-0xFF range, whose top three bits are mode ids SimCom never emits, so a
stored block identifies its own codec::

    0xF0          FPC, then an MSB-first stream of (3-bit prefix, data) codes
    0xC0 | enc    BDI, enc indexes BDI_ENCODINGS; base then n-1 deltas, LE
    0xE0 | w16    BiScaling, w16 = 1 for 16-bit words; then msbDrop, lsbDrop,
                  the shared MSB value (LE, word-sized) and packed words
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .bits import BitReader, BitWriter
from .codec import BLOCK_SIZE, CodecError, CorruptBlockError, diff_limit

FPC_TAG = 0xF0
BDI_TAG = 0xC0
BISCALING_TAG = 0xE0


def _check_block(block: bytes) -> None:
    if len(block) != BLOCK_SIZE:
        raise CodecError(f"block must be {BLOCK_SIZE} bytes, got {len(block)}")


# --- FPC -------------------------------------------------------------------

@dataclass(frozen=True)
class FpcPattern:
    prefix: int
    name: str
    data_bits: int


FPC_PATTERNS = (
    FpcPattern(0b000, "zero run", 3),
    FpcPattern(0b001, "4-bit sign-extended", 4),
    FpcPattern(0b010, "one byte sign-extended", 8),
    FpcPattern(0b011, "halfword sign-extended", 16),
    FpcPattern(0b100, "halfword padded with zero halfword", 16),
    FpcPattern(0b101, "two halfwords, each a sign-extended byte", 16),
    FpcPattern(0b110, "word of repeated bytes", 8),
    FpcPattern(0b111, "uncompressed word", 32),
)
FPC_MAX_ZERO_RUN = 8

# cheapest first; equal costs keep prefix order
_FPC_ORDER = sorted(range(1, 8), key=lambda p: (FPC_PATTERNS[p].data_bits, p))


def _se_byte(b: int, lo_hi_positive, rest):
    """Best sign-extension fit: low byte ``b`` constrained to the sign half,
    ``rest`` bytes forced to 0x00 or 0xFF. Returns (distance, low, fill)."""
    lo, hi = lo_hi_positive
    x0 = min(max(b, lo), hi)
    d0 = max([x0 - b if x0 > b else b - x0] + list(rest))
    nlo, nhi = 0x100 - (hi + 1), 0xFF
    x1 = min(max(b, nlo), nhi)
    d1 = max([x1 - b if x1 > b else b - x1] + [0xFF - r for r in rest])
    if d1 < d0:
        return d1, x1, 0xFF
    return d0, x0, 0x00


def _fpc_fit(prefix: int, b):
    """Closest value of a pattern to word bytes ``b`` (LE) under per-byte
    distance. Returns (distance, data field)."""
    b0, b1, b2, b3 = b
    if prefix == 1:
        d, x, _ = _se_byte(b0, (0, 7), (b1, b2, b3))
        return d, x & 0xF
    if prefix == 2:
        d, x, _ = _se_byte(b0, (0, 0x7F), (b1, b2, b3))
        return d, x
    if prefix == 3:
        d, x1, _ = _se_byte(b1, (0, 0x7F), (b2, b3))
        return d, (x1 << 8) | b0
    if prefix == 4:
        return max(b0, b1), (b3 << 8) | b2
    if prefix == 5:
        dl, xl, _ = _se_byte(b0, (0, 0x7F), (b1,))
        dh, xh, _ = _se_byte(b2, (0, 0x7F), (b3,))
        return max(dl, dh), (xh << 8) | xl
    if prefix == 6:
        mn, mx = min(b), max(b)
        x = (mn + mx) // 2
        return mx - x, x
    return 0, b0 | (b1 << 8) | (b2 << 16) | (b3 << 24)


def _sext(v: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (v & (sign - 1)) - (v & sign)


def _fpc_value(prefix: int, data: int) -> int:
    if prefix == 0:
        return 0
    if prefix == 1:
        return _sext(data, 4) & 0xFFFFFFFF
    if prefix == 2:
        return _sext(data, 8) & 0xFFFFFFFF
    if prefix == 3:
        return _sext(data, 16) & 0xFFFFFFFF
    if prefix == 4:
        return data << 16
    if prefix == 5:
        lo = _sext(data & 0xFF, 8) & 0xFFFF
        hi = _sext(data >> 8, 8) & 0xFFFF
        return (hi << 16) | lo
    if prefix == 6:
        return data * 0x01010101
    return data


def fpc_codes(block: bytes, af: float):
    """Pattern codes for a block as a list of ``(prefix, data)``."""
    _check_block(block)
    limit = diff_limit(af, 0xFF)
    codes = []
    zrun = 0
    for i in range(0, BLOCK_SIZE, 4):
        b = block[i:i + 4]
        if max(b) <= limit:
            zrun += 1
            if zrun == FPC_MAX_ZERO_RUN:
                codes.append((0, zrun - 1))
                zrun = 0
            continue
        if zrun:
            codes.append((0, zrun - 1))
            zrun = 0
        for p in _FPC_ORDER:
            d, data = _fpc_fit(p, b)
            if d <= limit:
                codes.append((p, data))
                break
    if zrun:
        codes.append((0, zrun - 1))
    return codes


def fpc_compress(block: bytes, af: float = 0.0) -> Optional[bytes]:
    """Frequent pattern compression with per-byte relaxed matching."""
    w = BitWriter()
    for p, data in fpc_codes(block, af):
        w.write(p, 3)
        w.write(data, FPC_PATTERNS[p].data_bits)
    out = bytes([FPC_TAG]) + w.getvalue()
    if len(out) >= BLOCK_SIZE:
        return None
    return out


def fpc_decompress(data: bytes) -> bytes:
    if not data or data[0] != FPC_TAG:
        raise CorruptBlockError("not an FPC block")
    r = BitReader(data[1:])
    out = bytearray()
    try:
        while len(out) < BLOCK_SIZE:
            p = r.read(3)
            field = r.read(FPC_PATTERNS[p].data_bits)
            if p == 0:
                out += bytes(4 * (field + 1))
            else:
                out += _fpc_value(p, field).to_bytes(4, "little")
    except EOFError:
        raise CorruptBlockError(f"FPC stream ends after {len(out)} bytes") from None
    if len(out) != BLOCK_SIZE:
        raise CorruptBlockError("FPC zero run overruns the block")
    return bytes(out)


# --- BDI -------------------------------------------------------------------

@dataclass(frozen=True)
class BdiEncoding:
    base_size: int
    delta_size: int
    base: int = 0
    deltas: tuple = ()

    @property
    def size(self) -> int:
        return 1 + self.base_size + (BLOCK_SIZE // self.base_size - 1) * self.delta_size


BDI_ENCODINGS = ((8, 1), (8, 2), (8, 4), (4, 1), (4, 2), (2, 1))


def _signed(v: int, bits: int) -> int:
    half = 1 << (bits - 1)
    return ((v + half) % (1 << bits)) - half


def bdi_encode(block: bytes, base_size: int, delta_size: int, af: float = 0.0) -> Optional[BdiEncoding]:
    """Try one base/delta geometry; clamps overflowing deltas within the error cap."""
    _check_block(block)
    bits = 8 * base_size
    cap = int(Fraction(af) * ((1 << bits) - 1))
    dmax = (1 << (8 * delta_size - 1)) - 1
    dmin = -dmax - 1
    words = [int.from_bytes(block[i:i + base_size], "little")
             for i in range(0, BLOCK_SIZE, base_size)]
    base = words[0]
    mask = (1 << bits) - 1
    deltas = []
    for w in words[1:]:
        d = _signed(w - base, bits)
        if not dmin <= d <= dmax:
            d = dmax if d > dmax else dmin
            # the decoder adds modulo the word size; measure the error on
            # the value it will actually produce
            if abs(w - ((base + d) & mask)) > cap:
                return None
        deltas.append(d)
    return BdiEncoding(base_size, delta_size, base, tuple(deltas))


def bdi_best(block: bytes, af: float = 0.0) -> Optional[BdiEncoding]:
    best = None
    for bs, ds in BDI_ENCODINGS:
        e = bdi_encode(block, bs, ds, af)
        if e is not None and (best is None or e.size < best.size):
            best = e
    return best


def bdi_compress(block: bytes, af: float = 0.0) -> Optional[bytes]:
    """Base+delta compression; smallest successful geometry wins."""
    e = bdi_best(block, af)
    if e is None or e.size >= BLOCK_SIZE:
        return None
    enc = BDI_ENCODINGS.index((e.base_size, e.delta_size))
    out = bytearray([BDI_TAG | enc])
    out += e.base.to_bytes(e.base_size, "little")
    for d in e.deltas:
        out += d.to_bytes(e.delta_size, "little", signed=True)
    return bytes(out)


def bdi_decompress(data: bytes) -> bytes:
    if not data or data[0] & 0xF8 != BDI_TAG or data[0] & 0x07 >= len(BDI_ENCODINGS):
        raise CorruptBlockError("not a BDI block")
    bs, ds = BDI_ENCODINGS[data[0] & 0x07]
    n = BLOCK_SIZE // bs
    need = 1 + bs + (n - 1) * ds
    if len(data) < need:
        raise CorruptBlockError(f"BDI block truncated: {len(data)} < {need}")
    base = int.from_bytes(data[1:1 + bs], "little")
    mask = (1 << (8 * bs)) - 1
    out = bytearray(data[1:1 + bs])
    pos = 1 + bs
    for _ in range(n - 1):
        d = int.from_bytes(data[pos:pos + ds], "little", signed=True)
        out += ((base + d) & mask).to_bytes(bs, "little")
        pos += ds
    return bytes(out)


# --- BiScaling ---------------------------------------------------------------

@dataclass(frozen=True)
class ScaledBlock:
    word_width: int
    msb_drop: int
    lsb_drop: int
    shared: int
    payload: tuple

    @property
    def kept_bits(self) -> int:
        return self.word_width - self.msb_drop - self.lsb_drop

    @property
    def size(self) -> int:
        header = 3 + self.word_width // 8
        return header + (len(self.payload) * self.kept_bits + 7) // 8

    def to_bytes(self) -> bytes:
        w16 = 1 if self.word_width == 16 else 0
        out = bytearray([BISCALING_TAG | w16, self.msb_drop, self.lsb_drop])
        out += self.shared.to_bytes(self.word_width // 8, "little")
        bw = BitWriter()
        for v in self.payload:
            bw.write(v, self.kept_bits)
        return bytes(out + bw.getvalue())


def lsb_drop_for(word_width: int, af: float) -> int:
    """Largest t with 2**t - 1 <= af * (2**word_width - 1)."""
    budget = Fraction(af) * ((1 << word_width) - 1)
    t = 0
    while t < word_width and (1 << (t + 1)) - 1 <= budget:
        t += 1
    return t


def _shared_msbs(words, width: int) -> int:
    diff = 0
    first = words[0]
    for w in words[1:]:
        diff |= w ^ first
    return width - diff.bit_length()


def biscaling_scale(block: bytes, word_width: int, af: float = 0.0) -> ScaledBlock:
    _check_block(block)
    if word_width not in (8, 16):
        raise CodecError(f"unsupported BiScaling word width {word_width}")
    nb = word_width // 8
    words = [int.from_bytes(block[i:i + nb], "little") for i in range(0, BLOCK_SIZE, nb)]
    lsb = lsb_drop_for(word_width, af)
    msb = min(_shared_msbs(words, word_width), word_width - lsb)
    kept = word_width - msb - lsb
    shared = words[0] >> (word_width - msb) if msb else 0
    payload = tuple((w >> lsb) & ((1 << kept) - 1) for w in words)
    return ScaledBlock(word_width, msb, lsb, shared, payload)


def biscaling_compress(block: bytes, word_width: int, af: float = 0.0) -> Optional[ScaledBlock]:
    """Drop shared MSBs and af-bounded LSBs; ``None`` if it does not shrink."""
    s = biscaling_scale(block, word_width, af)
    if s.size >= BLOCK_SIZE:
        return None
    return s


def biscaling_decompress(data: bytes) -> bytes:
    if len(data) < 4 or data[0] & 0xFE != BISCALING_TAG:
        raise CorruptBlockError("not a BiScaling block")
    width = 16 if data[0] & 1 else 8
    nb = width // 8
    msb, lsb = data[1], data[2]
    if msb + lsb > width:
        raise CorruptBlockError(f"drops {msb}+{lsb} exceed word width {width}")
    shared = int.from_bytes(data[3:3 + nb], "little")
    kept = width - msb - lsb
    r = BitReader(data[3 + nb:])
    out = bytearray()
    try:
        for _ in range(BLOCK_SIZE // nb):
            v = (shared << (width - msb) if msb else 0) | (r.read(kept) << lsb)
            out += v.to_bytes(nb, "little")
    except EOFError:
        raise CorruptBlockError("BiScaling payload truncated") from None
    return bytes(out)


def baseline_decompress(data: bytes) -> bytes:
    """Dispatch on the scheme tag."""
    if not data:
        raise CorruptBlockError("empty block")
    tag = data[0]
    if tag == FPC_TAG:
        return fpc_decompress(data)
    if tag & 0xF8 == BDI_TAG:
        return bdi_decompress(data)
    if tag & 0xFE == BISCALING_TAG:
        return biscaling_decompress(data)
    raise CorruptBlockError(f"unknown scheme tag {tag:#04x}")
