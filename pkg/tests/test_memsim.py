import random

import pytest
from hypothesis import given, settings, strategies as st

from simcom import codec
from simcom.memsim import (SCHEMES, AddressError, NvmState, QualityTable, UninitializedReadError,
                           WriteBlock, latency_energy)
from simcom.metrics import bit_write_ratio


def smooth(rng, n=64):
    v = rng.randrange(256)
    out = bytearray()
    for _ in range(n):
        v = min(max(v + rng.randint(-2, 2), 0), 255)
        out.append(v)
    return bytes(out)


def test_quality_table_validation():
    t = QualityTable()
    t.add(0, 128, 0.05)
    with pytest.raises(ValueError):
        t.add(64, 192, 0.01)       # overlap
    with pytest.raises(ValueError):
        t.add(130, 192, 0.01)      # unaligned
    with pytest.raises(ValueError):
        t.add(192, 256, 2.0)       # af
    assert t.lookup(64).af == 0.05 and t.lookup(128) is None
    assert len(t) == 1


def test_address_errors():
    st_ = NvmState(256)
    with pytest.raises(AddressError):
        st_.write(WriteBlock(3, bytes(64)), "simcom")
    with pytest.raises(AddressError):
        st_.write(WriteBlock(256, bytes(64)), "simcom")
    with pytest.raises(UninitializedReadError):
        st_.read(0)
    with pytest.raises(ValueError):
        st_.write(WriteBlock(0, bytes(10)), "simcom")
    with pytest.raises(ValueError):
        st_.write(WriteBlock(0, bytes(64)), "zip")
    with pytest.raises(ValueError):
        NvmState(100)


def test_constant_rewrite_is_free():
    s = NvmState(128)
    s.write(WriteBlock(0, bytes([7]) * 64, approximable=True), "simcom")
    rep = s.write(WriteBlock(0, bytes([7]) * 64, approximable=True), "simcom")
    assert rep.bit_writes == 0 and rep.stored_bytes == 3 and rep.write_units == 1


def test_all_zero_trace_has_zero_numerator():
    for scheme in SCHEMES:
        s = NvmState(256, count_sideband=False)
        for a in (0, 64, 128):
            s.write(WriteBlock(a, bytes(64)), scheme)
        primed = s.counters.total_bit_writes
        for _ in range(3):
            for a in (0, 64, 128):
                s.write(WriteBlock(a, bytes(64)), scheme)
        assert s.counters.total_bit_writes == primed


def test_raw_against_raw_is_one():
    rng = random.Random(2)
    s = NvmState(64 * 8)
    for _ in range(40):
        s.write(WriteBlock(64 * rng.randrange(8), bytes(rng.randrange(256) for _ in range(64)),
                           approximable=rng.random() < 0.5), "raw")
    assert bit_write_ratio(s.counters, "raw") == 1.0


def test_latency_energy_model():
    s = NvmState(128)
    rep = s.write(WriteBlock(0, bytes(range(64))), "simcom")
    units, energy, ns = latency_energy(rep)
    assert units == rep.write_units == -(-rep.stored_bytes // 8)
    assert energy == rep.bit_writes and ns == units * 150


def test_approximable_region_from_table():
    t = QualityTable()
    t.add(0, 64, 0.05)
    s = NvmState(128, t)
    block = bytes([100, 101, 102, 103] * 16)
    rep = s.write(WriteBlock(0, block), "simcom")
    assert rep.approximable and rep.compressible and rep.af == 0.05
    back = s.read(0)
    assert max(abs(a - b) for a, b in zip(back, block)) <= 12
    rep = s.write(WriteBlock(64, block), "simcom")
    assert not rep.approximable
    assert s.read(64) == block


def test_explicit_precise_flag_overrides_table():
    t = QualityTable()
    t.add(0, 64, 0.5)
    s = NvmState(64, t)
    block = bytes(range(64))
    assert not s.write(WriteBlock(0, block, approximable=False), "simcom").approximable
    assert s.read(0) == block


def test_sideband_bits_counted():
    a = NvmState(64, count_sideband=True)
    b = NvmState(64, count_sideband=False)
    block = bytes([5]) * 64
    ra = a.write(WriteBlock(0, block, approximable=True), "simcom")
    rb = b.write(WriteBlock(0, block, approximable=True), "simcom")
    assert ra.sideband_bit_writes == 2 and rb.sideband_bit_writes == 0
    assert ra.bit_writes == rb.bit_writes + 2


def test_mode_histogram_counts_approximable_writes():
    rng = random.Random(3)
    s = NvmState(64 * 16)
    for i in range(16):
        s.write(WriteBlock(64 * i, smooth(rng), approximable=i % 2 == 0), "simcom")
    c = s.counters
    assert sum(c.modes.values()) == c.approximable_writes == 8
    assert c.precise_writes == 8


def test_write_bytes_pads_tail():
    s = NvmState(256)
    s.write_bytes(0, b"abc" * 30, "raw")
    assert s.read_bytes(0, 90) == b"abc" * 30
    assert s.read(64)[26:] == bytes(38)


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(SCHEMES))
def test_exact_replay_at_zero(seed, scheme):
    rng = random.Random(seed)
    s = NvmState(64 * 4)
    shadow = {}
    for _ in range(12):
        a = 64 * rng.randrange(4)
        payload = smooth(rng) if rng.random() < 0.6 else bytes(rng.randrange(256) for _ in range(64))
        s.write(WriteBlock(a, payload, approximable=rng.random() < 0.5), scheme)
        shadow[a] = payload
        for addr, want in shadow.items():
            assert s.read(addr) == want


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["simcom", "fpc", "bdi", "biscaling"]),
       st.sampled_from([0.01, 0.05, 0.1]))
def test_accounting_invariants(seed, scheme, af):
    rng = random.Random(seed)
    s = NvmState(64 * 4, default_af=af)
    for _ in range(16):
        payload = smooth(rng) if rng.random() < 0.7 else bytes(rng.randrange(256) for _ in range(64))
        rep = s.write(WriteBlock(64 * rng.randrange(4), payload, approximable=rng.random() < 0.7), scheme)
        assert rep.bit_writes == rep.data_bit_writes + rep.flip_bit_writes + rep.sideband_bit_writes
        assert rep.write_units <= 8
    c = s.counters
    for v in (c.saved_precise, c.saved_approximate, c.saved_fnw, c.overhead):
        assert v >= 0
    saved = c.saved_precise + c.saved_approximate + c.saved_fnw - c.overhead
    assert saved == c.raw_data_bits - (c.data_bit_writes + c.flip_bit_writes)


def test_decode_stored_rejects_simcom_on_precise():
    from simcom.memsim import decode_stored
    with pytest.raises(codec.CorruptBlockError):
        decode_stored(bytes([0, 1, 63]), approximable=False)
