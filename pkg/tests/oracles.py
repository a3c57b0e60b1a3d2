"""Independent exact-scheme references for FPC and BDI.

Written from the classic scheme descriptions, sharing no code with the
package: patterns are matched on the 32-bit word as an integer.
"""

# (prefix, data bits) in the order a hardware encoder would prefer them
FPC_DATA_BITS = {0: 3, 1: 4, 2: 8, 3: 16, 4: 16, 5: 16, 6: 8, 7: 32}


def _signed32(v):
    return v - (1 << 32) if v & 0x80000000 else v


def _fits(v, bits):
    return -(1 << (bits - 1)) <= v < (1 << (bits - 1))


def fpc_word_prefix(word):
    """Cheapest non-zero pattern of an exact 32-bit word."""
    s = _signed32(word)
    lo16 = word & 0xFFFF
    hi16 = word >> 16
    half_sx = lambda h: _fits(h - 0x10000 if h & 0x8000 else h, 8)  # noqa: E731
    matches = []
    if _fits(s, 4):
        matches.append(1)
    if _fits(s, 8):
        matches.append(2)
    if len(set(word.to_bytes(4, "little"))) == 1:
        matches.append(6)
    if _fits(s, 16):
        matches.append(3)
    if lo16 == 0:
        matches.append(4)
    if half_sx(lo16) and half_sx(hi16):
        matches.append(5)
    matches.append(7)
    return min(matches, key=lambda p: (FPC_DATA_BITS[p], p))


def fpc_exact_bits(block):
    """Compressed bit length of a 64-byte block, zero runs capped at 8 words."""
    words = [int.from_bytes(block[i:i + 4], "little") for i in range(0, 64, 4)]
    bits = 0
    prefixes = []
    i = 0
    while i < len(words):
        if words[i] == 0:
            j = i
            while j < len(words) and words[j] == 0 and j - i < 8:
                j += 1
            bits += 3 + 3
            prefixes.append(0)
            i = j
            continue
        p = fpc_word_prefix(words[i])
        bits += 3 + FPC_DATA_BITS[p]
        prefixes.append(p)
        i += 1
    return bits, prefixes


def bdi_exact_size(block):
    """Smallest single-base BDI size over the six geometries, or None."""
    best = None
    for base, delta in ((8, 1), (8, 2), (8, 4), (4, 1), (4, 2), (2, 1)):
        words = [int.from_bytes(block[i:i + base], "little") for i in range(0, 64, base)]
        mod = 1 << (8 * base)
        ok = True
        for w in words[1:]:
            d = (w - words[0]) % mod
            if d >= mod // 2:
                d -= mod
            if not _fits(d, 8 * delta):
                ok = False
                break
        if ok:
            size = 1 + base + (len(words) - 1) * delta
            if best is None or size < best[0]:
                best = (size, base, delta)
    return best
