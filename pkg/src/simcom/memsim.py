"""Byte-addressable NVM model with a compressing write path.

Write path: classify (quality table) -> compress -> Flip-N-Write -> store.
Read path: load -> undo flips -> decompress according to the sideband bits.

Every write also updates two shadow memories holding what an uncompressed
memory would contain, with and without Flip-N-Write, so bit-write ratios are
always measured against the exact same access stream.
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

from . import baselines, codec
from .codec import BLOCK_SIZE
from .fnw import UNIT_SIZE, fnw_decode, fnw_encode, hamming, units

SCHEMES = ("simcom", "fpc", "bdi", "biscaling", "raw")
WRITE_LATENCY_NS = 150
READ_LATENCY_NS = 120
INCOMPRESSIBLE = "incompressible"


class AddressError(IndexError):
    pass


class UninitializedReadError(LookupError):
    pass


@dataclass(frozen=True)
class QualityEntry:
    start: int
    end: int
    af: float
    word_width: int = 8

    def __contains__(self, addr: int) -> bool:
        return self.start <= addr < self.end


class QualityTable:
    """Address ranges ``[start, end)`` tagged with an approximation factor."""

    def __init__(self, entries: Iterable[QualityEntry] = ()):
        self._entries: List[QualityEntry] = []
        for e in entries:
            self.add(e.start, e.end, e.af, e.word_width)

    def add(self, start: int, end: int, af: float, word_width: int = 8) -> QualityEntry:
        if start % BLOCK_SIZE or end % BLOCK_SIZE:
            raise ValueError(f"range [{start:#x}, {end:#x}) is not {BLOCK_SIZE}-byte aligned")
        if end <= start:
            raise ValueError(f"empty range [{start:#x}, {end:#x})")
        if not 0.0 <= af <= 1.0:
            raise ValueError(f"approximation factor {af} outside [0, 1]")
        if word_width not in (8, 16):
            raise ValueError(f"word width {word_width} not in (8, 16)")
        i = bisect.bisect_left([e.start for e in self._entries], start)
        if i > 0 and self._entries[i - 1].end > start:
            raise ValueError(f"range [{start:#x}, {end:#x}) overlaps an existing entry")
        if i < len(self._entries) and self._entries[i].start < end:
            raise ValueError(f"range [{start:#x}, {end:#x}) overlaps an existing entry")
        e = QualityEntry(start, end, af, word_width)
        self._entries.insert(i, e)
        return e

    def lookup(self, addr: int) -> Optional[QualityEntry]:
        i = bisect.bisect_right([e.start for e in self._entries], addr) - 1
        if i >= 0 and addr in self._entries[i]:
            return self._entries[i]
        return None

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class WriteBlock:
    addr: int
    payload: bytes
    # None: classify by quality table; True/False: trace-supplied annotation
    approximable: Optional[bool] = None


@dataclass
class WriteReport:
    addr: int
    scheme: str
    approximable: bool
    compressible: bool
    mode: str
    stored_bytes: int
    write_units: int
    bit_writes: int
    data_bit_writes: int
    flip_bit_writes: int
    sideband_bit_writes: int
    af: float = 0.0
    # counterfactuals on the same access
    raw_bits: int = 0
    raw_fnw_bits: int = 0
    compressed_bits: int = 0

    @property
    def latency_units(self) -> int:
        return self.write_units

    @property
    def energy_units(self) -> int:
        return self.bit_writes


def latency_energy(report: WriteReport):
    """Model cost of one write: ``(latency units, energy units, latency ns)``.

    Latency counts serial 8-byte write units; energy is proportional to
    bit-writes.
    """
    return report.write_units, report.bit_writes, report.write_units * WRITE_LATENCY_NS


@dataclass
class Counters:
    total_bit_writes: int = 0
    total_write_units: int = 0
    total_accesses: int = 0
    writes: int = 0
    reads: int = 0
    approximable_writes: int = 0
    precise_writes: int = 0
    approximable_reads: int = 0
    precise_reads: int = 0
    data_bit_writes: int = 0
    flip_bit_writes: int = 0
    sideband_bit_writes: int = 0
    stored_bytes: int = 0
    raw_bits: int = 0
    raw_data_bits: int = 0
    raw_fnw_bits: int = 0
    raw_write_units: int = 0
    saved_precise: int = 0
    saved_approximate: int = 0
    saved_fnw: int = 0
    overhead: int = 0
    per_scheme: Counter = field(default_factory=Counter)
    modes: Counter = field(default_factory=Counter)


class NvmState:
    """Simulated NVM. Not thread-safe; one owner per instance."""

    def __init__(self, size: int, quality_table: Optional[QualityTable] = None,
                 count_sideband: bool = True, default_af: float = 0.0):
        if size <= 0 or size % BLOCK_SIZE:
            raise ValueError(f"memory size must be a positive multiple of {BLOCK_SIZE}")
        self.size = size
        self.table = quality_table if quality_table is not None else QualityTable()
        self.count_sideband = count_sideband
        self.default_af = default_af
        n = size // BLOCK_SIZE
        self.memory = bytearray(size)
        self.approximable = bytearray(n)
        self.compressible = bytearray(n)
        self.flips = [0] * n
        self.stored_length = [BLOCK_SIZE] * n
        self.written = bytearray(n)
        self._raw = bytearray(size)
        self._raw_fnw = bytearray(size)
        self._raw_fnw_flips = [0] * n
        self._raw_approx = bytearray(n)
        self.counters = Counters()
        self._next_free = 0

    # -- allocation ---------------------------------------------------------

    def alloc(self, n_bytes: int, af: Optional[float] = None, word_width: int = 8) -> int:
        """Bump-allocate a block-aligned region; approximable when ``af`` is given."""
        length = -(-n_bytes // BLOCK_SIZE) * BLOCK_SIZE
        addr = self._next_free
        if addr + length > self.size:
            raise AddressError(f"out of simulated memory allocating {n_bytes} bytes")
        self._next_free = addr + length
        if af is not None:
            self.table.add(addr, addr + length, af, word_width)
        return addr

    # -- helpers --------------------------------------------------------------

    def _block(self, addr: int) -> int:
        if addr % BLOCK_SIZE:
            raise AddressError(f"address {addr:#x} is not {BLOCK_SIZE}-byte aligned")
        if not 0 <= addr < self.size:
            raise AddressError(f"address {addr:#x} outside memory of {self.size} bytes")
        return addr // BLOCK_SIZE

    def _classify(self, w: WriteBlock):
        entry = self.table.lookup(w.addr)
        if w.approximable is False:
            return False, 0.0, 8
        if entry is not None:
            return True, entry.af, entry.word_width
        if w.approximable:
            return True, self.default_af, 8
        return False, 0.0, 8

    @staticmethod
    def _encode(payload: bytes, scheme: str, approximable: bool, af: float, word_width: int):
        """Returns (data, compressible, mode label)."""
        if scheme == "raw":
            return payload, False, "raw"
        if not approximable:
            if scheme == "bdi":
                data = baselines.bdi_compress(payload, 0.0)
            else:
                data = baselines.fpc_compress(payload, 0.0)
            label = "precise"
        elif scheme == "simcom":
            c = codec.compress_adaptive(payload, af)
            data = codec.serialize(c) if c is not None else None
            label = c.mode.name if c is not None else INCOMPRESSIBLE
        elif scheme == "fpc":
            data = baselines.fpc_compress(payload, af)
            label = "fpc"
        elif scheme == "bdi":
            data = baselines.bdi_compress(payload, af)
            label = "bdi"
        elif scheme == "biscaling":
            s = baselines.biscaling_compress(payload, word_width, af)
            data = s.to_bytes() if s is not None else None
            label = "biscaling"
        else:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        if data is None:
            return payload, False, INCOMPRESSIBLE
        return data, True, label

    # -- accesses -------------------------------------------------------------

    def write(self, w: WriteBlock, scheme: str) -> WriteReport:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        if len(w.payload) != BLOCK_SIZE:
            raise ValueError(f"payload must be {BLOCK_SIZE} bytes, got {len(w.payload)}")
        b = self._block(w.addr)
        approx, af, width = self._classify(w)
        data, compressible, label = self._encode(bytes(w.payload), scheme, approx, af, width)

        a = w.addr
        n = len(data)
        old = bytes(self.memory[a:a + n])
        old_flips = self.flips[b]
        if scheme == "raw":
            stored = data
            data_bits = hamming(data, old)
            flip_bits = bin(old_flips).count("1")
            flips = 0
        else:
            stored, flips, total = fnw_encode(data, old, old_flips)
            flip_bits = bin((flips ^ old_flips) & ((1 << units(n)) - 1)).count("1")
            data_bits = total - flip_bits
        compressed_bits = hamming(data, old)

        side = 0
        if self.count_sideband:
            side = (self.approximable[b] != approx) + (self.compressible[b] != compressible)

        # shadow memories: uncompressed, with and without FNW
        raw_old = bytes(self._raw[a:a + BLOCK_SIZE])
        raw_bits = hamming(w.payload, raw_old)
        self._raw[a:a + BLOCK_SIZE] = w.payload
        fnw_old = bytes(self._raw_fnw[a:a + BLOCK_SIZE])
        fstored, fflips, fbits = fnw_encode(bytes(w.payload), fnw_old, self._raw_fnw_flips[b])
        self._raw_fnw[a:a + BLOCK_SIZE] = fstored
        self._raw_fnw_flips[b] = fflips
        raw_side = 0
        if self.count_sideband:
            raw_side = int(self._raw_approx[b] != approx)
        self._raw_approx[b] = approx

        self.memory[a:a + n] = stored
        self.flips[b] = flips
        self.stored_length[b] = n
        self.approximable[b] = approx
        self.compressible[b] = compressible
        self.written[b] = 1

        bit_writes = data_bits + flip_bits + side
        rep = WriteReport(
            addr=a, scheme=scheme, approximable=bool(approx), compressible=bool(compressible),
            mode=label, stored_bytes=n, write_units=units(n), bit_writes=bit_writes,
            data_bit_writes=data_bits, flip_bit_writes=flip_bits, sideband_bit_writes=side,
            af=af, raw_bits=raw_bits + raw_side, raw_fnw_bits=fbits + raw_side,
            compressed_bits=compressed_bits,
        )
        self._account(rep, raw_bits)
        return rep

    def _account(self, rep: WriteReport, raw_data_bits: int) -> None:
        c = self.counters
        c.total_bit_writes += rep.bit_writes
        c.total_write_units += rep.write_units
        c.total_accesses += 1
        c.writes += 1
        if rep.approximable:
            c.approximable_writes += 1
            c.modes[rep.mode] += 1
        else:
            c.precise_writes += 1
        c.data_bit_writes += rep.data_bit_writes
        c.flip_bit_writes += rep.flip_bit_writes
        c.sideband_bit_writes += rep.sideband_bit_writes
        c.stored_bytes += rep.stored_bytes
        c.raw_bits += rep.raw_bits
        c.raw_data_bits += raw_data_bits
        c.raw_fnw_bits += rep.raw_fnw_bits
        c.raw_write_units += BLOCK_SIZE // UNIT_SIZE
        c.per_scheme[rep.scheme] += rep.bit_writes
        # savings stacked as compression first, then FNW; sideband excluded
        actual = rep.data_bit_writes + rep.flip_bit_writes
        total = raw_data_bits - actual
        gained = max(total, 0)
        comp = min(max(raw_data_bits - rep.compressed_bits, 0), gained)
        if rep.approximable:
            c.saved_approximate += comp
        else:
            c.saved_precise += comp
        c.saved_fnw += gained - comp
        c.overhead += max(-total, 0)

    def read(self, addr: int) -> bytes:
        b = self._block(addr)
        if not self.written[b]:
            raise UninitializedReadError(f"read of never-written block at {addr:#x}")
        n = self.stored_length[b]
        data = fnw_decode(bytes(self.memory[addr:addr + n]), self.flips[b])
        c = self.counters
        c.total_accesses += 1
        c.reads += 1
        if self.approximable[b]:
            c.approximable_reads += 1
        else:
            c.precise_reads += 1
        if not self.compressible[b]:
            return data
        return decode_stored(data, bool(self.approximable[b]))

    # -- bulk helpers -------------------------------------------------------

    def write_bytes(self, addr: int, data: bytes, scheme: str) -> List[WriteReport]:
        """Write a buffer block by block; the tail block is zero-padded."""
        reps = []
        for off in range(0, len(data), BLOCK_SIZE):
            chunk = bytes(data[off:off + BLOCK_SIZE])
            if len(chunk) < BLOCK_SIZE:
                chunk += bytes(BLOCK_SIZE - len(chunk))
            reps.append(self.write(WriteBlock(addr + off, chunk), scheme))
        return reps

    def read_bytes(self, addr: int, n_bytes: int) -> bytes:
        out = bytearray()
        for off in range(0, n_bytes, BLOCK_SIZE):
            out += self.read(addr + off)
        return bytes(out[:n_bytes])


def decode_stored(data: bytes, approximable: bool) -> bytes:
    """Decompress a compressible block; the first byte selects the codec."""
    if data and data[0] >> 5 < len(codec.MODES):
        if not approximable:
            raise codec.CorruptBlockError("SimCom encoding found on a precise block")
        return codec.decompress(data, True, True)
    return baselines.baseline_decompress(data)


def write_access(state: NvmState, w: WriteBlock, scheme: str) -> WriteReport:
    return state.write(w, scheme)


def read_access(state: NvmState, addr: int) -> bytes:
    return state.read(addr)
