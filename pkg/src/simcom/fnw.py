"""Flip-N-Write encoding over 8-byte write units."""

from __future__ import annotations

UNIT_SIZE = 8
UNIT_BITS = 8 * UNIT_SIZE


def units(n_bytes: int) -> int:
    """Number of write units touched by ``n_bytes`` of data."""
    return -(-n_bytes // UNIT_SIZE)


def fnw_encode(new: bytes, old: bytes, old_flips: int = 0):
    """Encode ``new`` against the stored cells ``old``.

    ``old_flips`` holds one flip bit per unit (bit ``i`` for unit ``i``).
    A unit is stored complemented when more than half of its data bits would
    change. Partial trailing units compare only the bytes being written.

    Returns ``(stored, flips, bit_writes)`` where ``bit_writes`` counts
    changed data cells plus changed flip bits.
    """
    if len(new) != len(old):
        raise ValueError(f"length mismatch: new {len(new)} vs old {len(old)}")
    stored = bytearray()
    flips = old_flips
    writes = 0
    for u in range(units(len(new))):
        lo = u * UNIT_SIZE
        chunk = new[lo:lo + UNIT_SIZE]
        n = len(chunk)
        nbits = 8 * n
        mask = (1 << nbits) - 1
        nv = int.from_bytes(chunk, "little")
        ov = int.from_bytes(old[lo:lo + n], "little")
        h = (nv ^ ov).bit_count()
        prev = (old_flips >> u) & 1
        if 2 * h > nbits:
            nv ^= mask
            flip = 1
            h = nbits - h
        else:
            flip = 0
        writes += h + (flip != prev)
        flips = (flips & ~(1 << u)) | (flip << u)
        stored += nv.to_bytes(n, "little")
    return bytes(stored), flips, writes


def fnw_decode(stored: bytes, flips: int) -> bytes:
    out = bytearray()
    for u in range(units(len(stored))):
        chunk = stored[u * UNIT_SIZE:(u + 1) * UNIT_SIZE]
        if (flips >> u) & 1:
            out += bytes(b ^ 0xFF for b in chunk)
        else:
            out += chunk
    return bytes(out)


def hamming(a: bytes, b: bytes) -> int:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).bit_count()
