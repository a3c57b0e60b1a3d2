"""MSB-first bit packing used by the baseline codecs."""


class BitWriter:
    def __init__(self):
        self._acc = 0
        self._n = 0

    def write(self, value: int, width: int) -> None:
        if width == 0:
            return
        self._acc = (self._acc << width) | (value & ((1 << width) - 1))
        self._n += width

    def __len__(self) -> int:
        return self._n

    def getvalue(self) -> bytes:
        pad = (-self._n) % 8
        return (self._acc << pad).to_bytes((self._n + pad) // 8, "big")


class BitReader:
    def __init__(self, data: bytes):
        self._val = int.from_bytes(data, "big")
        self._left = len(data) * 8

    def read(self, width: int) -> int:
        if width == 0:
            return 0
        if width > self._left:
            raise EOFError("bit stream exhausted")
        self._left -= width
        return (self._val >> self._left) & ((1 << width) - 1)
