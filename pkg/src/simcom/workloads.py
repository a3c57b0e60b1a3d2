"""Bitmaps, PPM/PGM I/O, synthetic generators and image kernels.

Kernels run against an :class:`~simcom.memsim.NvmState`: the input bitmap is
written into an approximable region, read back through the read path,
processed, and the output bitmap is written to another approximable region
and read back. Per-row accumulators and histograms live in precise regions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .memsim import NvmState, WriteReport


class PpmError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


@dataclass
class BitmapImage:
    width: int
    height: int
    cc: int
    bpc: int
    data: bytes = field(repr=False)

    def __post_init__(self):
        if self.bpc not in (8, 16):
            raise ValueError(f"bits per channel must be 8 or 16, got {self.bpc}")
        if self.cc < 1:
            raise ValueError(f"channel count must be positive, got {self.cc}")
        need = self.width * self.height * self.cc * self.bpc // 8
        if len(self.data) != need:
            raise ValueError(f"expected {need} data bytes, got {len(self.data)}")

    @property
    def max_value(self) -> int:
        return (1 << self.bpc) - 1

    @property
    def dtype(self):
        return np.dtype("<u2") if self.bpc == 16 else np.dtype(np.uint8)

    def to_array(self) -> np.ndarray:
        """Channel array of shape (height, width, cc)."""
        a = np.frombuffer(self.data, dtype=self.dtype)
        return a.reshape(self.height, self.width, self.cc).astype(np.int64)

    @classmethod
    def from_array(cls, arr: np.ndarray, bpc: int = 8) -> "BitmapImage":
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, cc = arr.shape
        dt = np.dtype("<u2") if bpc == 16 else np.dtype(np.uint8)
        a = np.clip(arr, 0, (1 << bpc) - 1).astype(dt)
        return cls(w, h, cc, bpc, a.tobytes())


# --- PPM / PGM -------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def parse_ppm(raw: bytes) -> BitmapImage:
    if raw[:2] not in (b"P5", b"P6"):
        raise PpmError(f"unsupported magic {raw[:2]!r}; expected P5 or P6", 0)
    cc = 3 if raw[:2] == b"P6" else 1
    pos = 2
    vals = []
    starts = []
    for name in ("width", "height", "maxval"):
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise PpmError(f"missing {name}", pos)
        tok = m.group(1)
        if not tok.isdigit():
            raise PpmError(f"malformed {name} {tok[:16]!r}", m.start(1))
        vals.append(int(tok))
        starts.append(m.start(1))
        pos = m.end(1)
    width, height, maxval = vals
    if pos >= len(raw) or raw[pos:pos + 1] not in b" \t\r\n":
        raise PpmError("expected single whitespace before pixel data", pos)
    pos += 1
    if maxval == 255:
        bpc = 8
    elif maxval == 65535:
        bpc = 16
    else:
        raise PpmError(f"unsupported maxval {maxval}", starts[2])
    if width <= 0 or height <= 0:
        raise PpmError(f"bad dimensions {width}x{height}", 2)
    need = width * height * cc * bpc // 8
    body = raw[pos:pos + need]
    if len(body) < need:
        raise PpmError(f"truncated pixel data: {len(body)} of {need} bytes", pos + len(body))
    if bpc == 16:
        body = np.frombuffer(body, dtype=">u2").astype("<u2").tobytes()
    return BitmapImage(width, height, cc, bpc, bytes(body))


def load_ppm(path) -> BitmapImage:
    with open(path, "rb") as f:
        return parse_ppm(f.read())


def dump_ppm(img: BitmapImage) -> bytes:
    if img.cc not in (1, 3):
        raise ValueError(f"PPM/PGM hold 1 or 3 channels, image has {img.cc}")
    magic = b"P6" if img.cc == 3 else b"P5"
    head = magic + b"\n%d %d\n%d\n" % (img.width, img.height, img.max_value)
    body = img.data
    if img.bpc == 16:
        body = np.frombuffer(body, dtype="<u2").astype(">u2").tobytes()
    return head + body


def save_ppm(img: BitmapImage, path) -> None:
    with open(path, "wb") as f:
        f.write(dump_ppm(img))


def to_gray(img: BitmapImage) -> BitmapImage:
    """Host-side luma conversion, used to prepare single-channel kernel inputs."""
    if img.cc == 1:
        return img
    return BitmapImage.from_array(luma(img.to_array()), img.bpc)


def to_rgb(img: BitmapImage) -> BitmapImage:
    if img.cc == 3:
        return img
    if img.cc != 1:
        raise ValueError(f"cannot expand {img.cc} channels to RGB")
    return BitmapImage.from_array(np.repeat(img.to_array(), 3, axis=2), img.bpc)



def to_format(img: BitmapImage, cc: int, bpc: int) -> BitmapImage:
    """Convert an 8-bit gray or RGB image to any of the six bitmap formats.

    RGBA gets an opaque alpha channel. Widening to 16 bits scales by 257,
    the usual depth conversion, so 0 and 255 map to 0 and 65535.
    """
    if img.bpc != 8:
        raise ValueError("source image must be 8-bit")
    if cc == 1:
        a = to_gray(img).to_array()
    elif cc in (3, 4):
        a = to_rgb(img).to_array()
        if cc == 4:
            a = np.concatenate([a, np.full(a.shape[:2] + (1,), 255, dtype=a.dtype)], axis=2)
    else:
        raise ValueError(f"unsupported channel count {cc}")
    if bpc == 16:
        a = a * 257
    elif bpc != 8:
        raise ValueError(f"bits per channel must be 8 or 16, got {bpc}")
    return BitmapImage.from_array(a, bpc)

# --- synthetic bitmaps -------------------------------------------------------

SYNTH_KINDS = ("gradient", "noise", "grayscale-in-rgb", "constant")


def _triangle(x, period):
    x = np.mod(x, 2 * period)
    return np.where(x <= period, x, 2 * period - x)


def synth_bitmap(cc: int, bpc: int, kind: str = "gradient", width: int = 64,
                 height: int = 64, seed: int = 0) -> BitmapImage:
    """Deterministic synthetic bitmap.

    ``gradient`` ramps every channel at its own slope (at most 4 levels per
    pixel on an 8-bit scale) from its own offset, reflecting at the range
    ends. ``grayscale-in-rgb`` repeats one gradient into every channel.
    ``constant`` repeats a single byte value through the whole buffer.
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown bitmap kind {kind!r}")
    rng = np.random.default_rng(seed)
    top = (1 << bpc) - 1
    scale = top / 255.0
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    if kind == "noise":
        arr = rng.integers(0, top + 1, size=(height, width, cc))
    elif kind == "constant":
        # one byte value everywhere, so every mode sees identical words
        arr = np.full((height, width, cc), int(rng.integers(0, 256)) * (top // 255))
    else:
        nch = 1 if kind == "grayscale-in-rgb" else cc
        chans = []
        for _ in range(nch):
            sx = rng.uniform(0.5, 4.0) * rng.choice([-1, 1])
            sy = rng.uniform(0.5, 4.0) * rng.choice([-1, 1])
            off = rng.uniform(0, 255)
            v = _triangle(off + sx * x + sy * y, 255.0)
            chans.append(np.floor(v * scale).astype(np.int64))
        arr = np.stack(chans, axis=2)
        if kind == "grayscale-in-rgb":
            arr = np.repeat(arr, cc, axis=2)
    return BitmapImage.from_array(arr, bpc)


# --- kernels -------------------------------------------------------------------

KERNELS = ("sobel", "conv2d", "grayscale", "histeq")
KERNEL_CC = {"sobel": 1, "conv2d": 1, "grayscale": 3, "histeq": 1}

GAUSSIAN_3X3 = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]])
IDENTITY_3X3 = np.array([[0, 0, 0], [0, 16, 0], [0, 0, 0]])
SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]])
SOBEL_Y = SOBEL_X.T


def _correlate3(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    p = np.pad(a, 1, mode="edge")
    h, w = a.shape
    out = np.zeros((h, w), dtype=np.int64)
    for dy in range(3):
        for dx in range(3):
            if k[dy, dx]:
                out += k[dy, dx] * p[dy:dy + h, dx:dx + w]
    return out


def luma(rgb: np.ndarray) -> np.ndarray:
    """Fixed-point BT.601 luma, ``(77 r + 150 g + 29 b) >> 8``."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    return (77 * r + 150 * g + 29 * b) >> 8


def sobel(a: np.ndarray, top: int) -> np.ndarray:
    gx = _correlate3(a, SOBEL_X)
    gy = _correlate3(a, SOBEL_Y)
    return np.minimum(np.floor(np.hypot(gx, gy)).astype(np.int64), top)


def conv2d(a: np.ndarray, top: int, kernel: np.ndarray = GAUSSIAN_3X3) -> np.ndarray:
    norm = int(kernel.sum())
    acc = _correlate3(a, kernel)
    return np.clip((acc + norm // 2) // norm, 0, top)


def equalize(a: np.ndarray, hist: np.ndarray, top: int) -> np.ndarray:
    cdf = np.cumsum(hist)
    n = int(cdf[-1])
    cmin = int(cdf[np.nonzero(cdf)[0][0]])
    if n == cmin:
        return a.copy()
    lut = ((cdf - cmin) * top + (n - cmin) // 2) // (n - cmin)
    lut = np.clip(lut, 0, top)
    return lut[a]


@dataclass
class KernelResult:
    kernel: str
    output: BitmapImage
    stats: Dict[str, int]
    reports: List[WriteReport] = field(repr=False, default_factory=list)


def _store_image(state: NvmState, img: BitmapImage, af: float, scheme: str):
    addr = state.alloc(len(img.data), af=af, word_width=img.bpc)
    reps = state.write_bytes(addr, img.data, scheme)
    return addr, reps


def _load_image(state: NvmState, addr: int, like: BitmapImage) -> np.ndarray:
    raw = state.read_bytes(addr, len(like.data))
    return BitmapImage(like.width, like.height, like.cc, like.bpc, raw).to_array()


def _store_precise(state: NvmState, values: np.ndarray, scheme: str):
    raw = np.ascontiguousarray(values, dtype="<u4").tobytes()
    addr = state.alloc(len(raw))
    reps = state.write_bytes(addr, raw, scheme)
    back = np.frombuffer(state.read_bytes(addr, len(raw)), dtype="<u4").astype(np.int64)
    return back, reps


def run_kernel(kernel: str, img: BitmapImage, state: NvmState, scheme: str,
               af: float = 0.0, conv_kernel: Optional[np.ndarray] = None) -> KernelResult:
    """Run an image kernel with all bitmap traffic going through ``state``."""
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if img.cc != KERNEL_CC[kernel]:
        raise ValueError(f"{kernel} needs {KERNEL_CC[kernel]}-channel input, got {img.cc}")
    top = img.max_value
    before = _snapshot(state)
    reports: List[WriteReport] = []

    in_addr, reps = _store_image(state, img, af, scheme)
    reports += reps
    src = _load_image(state, in_addr, img)

    if kernel == "grayscale":
        out = luma(src)
    else:
        plane = src[:, :, 0]
        if kernel == "sobel":
            out = sobel(plane, top)
        elif kernel == "conv2d":
            k = GAUSSIAN_3X3 if conv_kernel is None else np.asarray(conv_kernel)
            _, reps = _store_precise(state, k.ravel(), scheme)
            reports += reps
            out = conv2d(plane, top, k)
        else:
            hist = np.bincount(plane.ravel(), minlength=top + 1)
            hist, reps = _store_precise(state, hist, scheme)
            reports += reps
            out = equalize(plane, hist, top)

    # per-row sums are the precise accumulator traffic of every kernel
    _, reps = _store_precise(state, out.reshape(img.height, -1).sum(axis=1), scheme)
    reports += reps

    out_img = BitmapImage.from_array(out, img.bpc)
    out_addr, reps = _store_image(state, out_img, af, scheme)
    reports += reps
    final = BitmapImage(out_img.width, out_img.height, out_img.cc, out_img.bpc,
                        state.read_bytes(out_addr, len(out_img.data)))
    return KernelResult(kernel, final, _delta(before, _snapshot(state)), reports)


_STAT_FIELDS = ("writes", "reads", "approximable_writes", "precise_writes",
                "approximable_reads", "precise_reads", "total_bit_writes",
                "total_write_units", "raw_bits", "raw_fnw_bits")


def _snapshot(state: NvmState) -> Dict[str, int]:
    return {k: getattr(state.counters, k) for k in _STAT_FIELDS}


def _delta(a: Dict[str, int], b: Dict[str, int]) -> Dict[str, int]:
    return {k: b[k] - a[k] for k in _STAT_FIELDS}


def kernel_input(kernel: str, img: BitmapImage) -> BitmapImage:
    """Adapt an image to the channel layout a kernel expects."""
    if KERNEL_CC[kernel] == 1:
        return to_gray(img)
    return to_rgb(img)


def memory_for(img: BitmapImage) -> int:
    """Simulated memory size that fits any kernel run on ``img``."""
    n = len(img.data) * 2 + (1 << img.bpc) * 4 + img.height * 4 + 4096
    return -(-n // 64) * 64 + 64 * 8
