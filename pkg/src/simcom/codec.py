"""Similarity-aware approximate compression of 64-byte write blocks.

A block is cut into pixel-sized words under one of six (channel count,
bits per channel) modes. Consecutive words within the approximation factor
of the current base word collapse into a ``(base, run)`` pair. The adaptive
compressor runs every mode and keeps the one with the smallest mean
difference.

Serialized layout (format version 1)::

    byte 0        mode id (3 bits) << 5 | (pair count - 1) (5 bits)
    per pair      base word bytes, then one run byte
                  run byte = remainder bit (MSB, last pair only) | run (7 bits)
    tail          remainder bytes, only when the remainder bit is set

16-bit channels are little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

BLOCK_SIZE = 64
FORMAT_VERSION = 1
MAX_PAIRS = 32
MAX_RUN = 0x7F
REMAINDER_BIT = 0x80


class CodecError(ValueError):
    pass


class CorruptBlockError(CodecError):
    pass


@dataclass(frozen=True)
class CompressionMode:
    cc: int
    bpc: int
    id: int

    @property
    def word_size(self) -> int:
        return self.cc * self.bpc // 8

    @property
    def max_value(self) -> int:
        return (1 << self.bpc) - 1

    @property
    def channel_bytes(self) -> int:
        return self.bpc // 8

    def n_words(self, block_size: int = BLOCK_SIZE) -> int:
        return block_size // self.word_size

    def remainder_size(self, block_size: int = BLOCK_SIZE) -> int:
        return block_size % self.word_size

    @property
    def name(self) -> str:
        return f"{self.cc}C{self.channel_bytes}B"

    def __str__(self) -> str:
        return self.name


MODES = (
    CompressionMode(1, 8, 0),
    CompressionMode(3, 8, 1),
    CompressionMode(4, 8, 2),
    CompressionMode(1, 16, 3),
    CompressionMode(3, 16, 4),
    CompressionMode(4, 16, 5),
)


def mode_by_id(mode_id: int) -> CompressionMode:
    if not 0 <= mode_id < len(MODES):
        raise CodecError(f"no compression mode with id {mode_id}")
    return MODES[mode_id]


def mode_for(cc: int, bpc: int) -> CompressionMode:
    for m in MODES:
        if m.cc == cc and m.bpc == bpc:
            return m
    raise CodecError(f"unsupported format cc={cc} bpc={bpc}")


@dataclass(frozen=True)
class BaseRunPair:
    base: bytes
    run: int

    @property
    def words(self) -> int:
        return self.run + 1


@dataclass(frozen=True)
class CompressedBlock:
    mode: CompressionMode
    pairs: tuple
    remainder: Optional[bytes] = None
    block_size: int = BLOCK_SIZE

    @property
    def base_count(self) -> int:
        return len(self.pairs)

    @property
    def size(self) -> int:
        n = 1 + self.base_count * (self.mode.word_size + 1)
        if self.remainder is not None:
            n += len(self.remainder)
        return n


def _channels(raw: bytes, bpc: int) -> tuple:
    if bpc == 8:
        return tuple(raw)
    return struct.unpack(f"<{len(raw) // 2}H", raw)


def pixel_word(raw: bytes, mode: CompressionMode) -> tuple:
    """Decode raw word bytes into channel values for ``mode``."""
    return _channels(raw, mode.bpc)


def norm_diff(p: Sequence[int], q: Sequence[int], mode: CompressionMode) -> float:
    """Largest per-channel distance between two words, normalized to [0, 1]."""
    if len(p) != len(q):
        raise CodecError(f"channel count mismatch: {len(p)} vs {len(q)}")
    if not 1 <= len(p) <= mode.cc:
        raise CodecError(f"{len(p)} channels do not fit mode {mode}")
    return max(abs(a - b) for a, b in zip(p, q)) / mode.max_value


def diff_limit(af: float, max_value: int) -> int:
    """Largest integer channel distance ``d`` with ``d / max_value <= af``."""
    if not 0.0 <= af <= 1.0:
        raise CodecError(f"approximation factor {af} outside [0, 1]")
    t = int(af * max_value)
    while t + 1 <= max_value and (t + 1) / max_value <= af:
        t += 1
    while t > 0 and t / max_value > af:
        t -= 1
    return t


def _check_len(block: bytes, block_size: int) -> None:
    if len(block) != block_size:
        raise CodecError(f"block must be {block_size} bytes, got {len(block)}")


def partition(block: bytes, mode: CompressionMode, block_size: int = BLOCK_SIZE):
    """Split a block into full words (channel tuples) and trailing remainder bytes."""
    _check_len(block, block_size)
    ws = mode.word_size
    n = mode.n_words(block_size)
    if n == 0:
        raise CodecError(f"block of {block_size} bytes holds no {mode} word")
    if mode.bpc == 8:
        words = [tuple(block[i * ws:(i + 1) * ws]) for i in range(n)]
    else:
        vals = struct.unpack_from(f"<{n * mode.cc}H", block)
        cc = mode.cc
        words = [vals[i * cc:(i + 1) * cc] for i in range(n)]
    return words, bytes(block[n * ws:])


def _scan(words, limit: int):
    """Greedy base/run grouping.

    Returns (group start indices, sum of the integer distances computed along
    the way). Every word after the first is compared with the base current at
    that moment, including the words that end up opening a new group.
    """
    starts = [0]
    base = words[0]
    total = 0
    if len(base) == 1:
        b = base[0]
        for i in range(1, len(words)):
            d = words[i][0] - b
            if d < 0:
                d = -d
            total += d
            if d > limit:
                starts.append(i)
                b = words[i][0]
        return starts, total
    for i in range(1, len(words)):
        w = words[i]
        d = max(abs(x - y) for x, y in zip(w, base))
        total += d
        if d > limit:
            starts.append(i)
            base = w
    return starts, total


def _build(block: bytes, mode: CompressionMode, words, starts, limit: int) -> CompressedBlock:
    ws = mode.word_size
    size = len(block)
    ends = starts[1:] + [len(words)]
    pairs = tuple(BaseRunPair(bytes(block[s * ws:(s + 1) * ws]), e - s - 1)
                  for s, e in zip(starts, ends))
    remainder = None
    rsize = mode.remainder_size(size)
    if rsize:
        # legal modes leave whole channels in the remainder
        assert rsize % mode.channel_bytes == 0
        rem = bytes(block[size - rsize:])
        rch = _channels(rem, mode.bpc)
        last = words[starts[-1]]
        if max(abs(a - b) for a, b in zip(rch, last)) > limit:
            remainder = rem
    return CompressedBlock(mode, pairs, remainder, size)


def compress_mode(block: bytes, mode: CompressionMode, af: float, block_size: int = BLOCK_SIZE):
    """Compress ``block`` under one mode.

    Returns ``(compressed, mean_diff)``. ``compressed`` is ``None`` when the
    result would need more than 32 pairs or would not be smaller than the
    block. ``mean_diff`` is an exact :class:`~fractions.Fraction`.
    """
    limit = diff_limit(af, mode.max_value)
    words, _ = partition(block, mode, block_size)
    starts, total = _scan(words, limit)
    mean_diff = Fraction(total, mode.max_value * len(words))
    if len(starts) > MAX_PAIRS:
        return None, mean_diff
    c = _build(block, mode, words, starts, limit)
    if c.size >= block_size:
        return None, mean_diff
    return c, mean_diff


def compress_all(block: bytes, af: float):
    """Run every mode; returns a list of ``(compressed or None, mean_diff)``."""
    return [compress_mode(block, m, af) for m in MODES]


def select(candidates) -> Optional[CompressedBlock]:
    """Mode selector over ``compress_all`` output.

    Minimal mean difference among compressible candidates, then minimal size,
    then lowest mode id.
    """
    best = None
    best_key = None
    for c, md in candidates:
        if c is None:
            continue
        key = (md, c.size, c.mode.id)
        if best_key is None or key < best_key:
            best, best_key = c, key
    return best


def compress_adaptive(block: bytes, af: float) -> Optional[CompressedBlock]:
    """Adaptive compression; ``None`` marks an incompressible block."""
    return select(compress_all(block, af))


def serialize(c: CompressedBlock) -> bytes:
    if not 1 <= c.base_count <= MAX_PAIRS:
        raise CodecError(f"base count {c.base_count} outside [1, {MAX_PAIRS}]")
    mode = c.mode
    if sum(p.words for p in c.pairs) != mode.n_words(c.block_size):
        raise CodecError("pair runs do not cover the block")
    out = bytearray([(mode.id << 5) | (c.base_count - 1)])
    last = c.base_count - 1
    for i, p in enumerate(c.pairs):
        if len(p.base) != mode.word_size:
            raise CodecError(f"base is {len(p.base)} bytes, mode {mode} needs {mode.word_size}")
        if not 0 <= p.run <= MAX_RUN:
            raise CodecError(f"run {p.run} out of range")
        out += p.base
        flag = REMAINDER_BIT if (i == last and c.remainder is not None) else 0
        out.append(flag | p.run)
    if c.remainder is not None:
        if len(c.remainder) != mode.remainder_size(c.block_size):
            raise CodecError("remainder length does not match the mode")
        out += c.remainder
    return bytes(out)


def deserialize(data: bytes, block_size: int = BLOCK_SIZE) -> CompressedBlock:
    """Parse a serialized block. Bytes past the encoded extent are ignored."""
    if not data:
        raise CorruptBlockError("empty compressed block")
    meta = data[0]
    mode_id = meta >> 5
    if mode_id >= len(MODES):
        raise CorruptBlockError(f"reserved mode id {mode_id}")
    mode = MODES[mode_id]
    count = (meta & 0x1F) + 1
    ws = mode.word_size
    pos = 1
    pairs = []
    covered = 0
    has_rem = False
    for i in range(count):
        if pos + ws + 1 > len(data):
            raise CorruptBlockError(f"truncated at pair {i} (offset {pos})")
        base = bytes(data[pos:pos + ws])
        rb = data[pos + ws]
        pos += ws + 1
        if rb & REMAINDER_BIT:
            if i != count - 1:
                raise CorruptBlockError(f"remainder bit set on non-final pair {i}")
            has_rem = True
        run = rb & MAX_RUN
        covered += run + 1
        pairs.append(BaseRunPair(base, run))
    if covered != mode.n_words(block_size):
        raise CorruptBlockError(
            f"runs cover {covered} words, mode {mode} needs {mode.n_words(block_size)}")
    remainder = None
    if has_rem:
        rsize = mode.remainder_size(block_size)
        if rsize == 0:
            raise CorruptBlockError(f"remainder bit set but mode {mode} has no remainder")
        if pos + rsize > len(data):
            raise CorruptBlockError(f"truncated remainder at offset {pos}")
        remainder = bytes(data[pos:pos + rsize])
    return CompressedBlock(mode, tuple(pairs), remainder, block_size)


def expand(c: CompressedBlock) -> bytes:
    """Reconstruct the 64-byte block from a parsed compressed block."""
    out = bytearray()
    for p in c.pairs:
        out += p.base * (p.run + 1)
    rsize = c.mode.remainder_size(c.block_size)
    if c.remainder is not None:
        out += c.remainder
    elif rsize:
        out += c.pairs[-1].base[:rsize]
    return bytes(out)


def decompress(data: bytes, compressible: bool = True, approximable: bool = True,
               block_size: int = BLOCK_SIZE) -> bytes:
    """Decode stored block bytes according to the sideband bits.

    Incompressible data (``compressible`` false) are returned as stored.
    """
    if not compressible:
        if len(data) < block_size:
            raise CorruptBlockError(f"raw block truncated to {len(data)} bytes")
        return bytes(data[:block_size])
    if not approximable:
        raise CodecError("precise blocks are not SimCom-encoded")
    return expand(deserialize(data, block_size))


def encode_block(block: bytes, af: float):
    """Adaptive compress + serialize. Returns ``(stored bytes, compressed or None)``."""
    c = compress_adaptive(block, af)
    if c is None:
        return bytes(block), None
    return serialize(c), c
