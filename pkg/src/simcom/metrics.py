"""Quality and efficiency metrics for simulated runs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import codec
from .codec import CompressionMode, diff_limit, partition
from .memsim import INCOMPRESSIBLE, Counters

BASELINE_MODES = ("raw", "raw-fnw")
HIST_LABELS = tuple(m.name for m in codec.MODES) + (INCOMPRESSIBLE,)


class UndefinedRatioError(ZeroDivisionError):
    pass


def rmse(candidate, baseline) -> float:
    """Root-mean-square error over channel samples normalized by the max value.

    The mean runs over pixels x channels.
    """
    if (candidate.width, candidate.height, candidate.cc, candidate.bpc) != \
            (baseline.width, baseline.height, baseline.cc, baseline.bpc):
        raise ValueError("images differ in shape or format")
    a = candidate.to_array().astype(np.float64)
    b = baseline.to_array().astype(np.float64)
    d = (a - b) / baseline.max_value
    return float(np.sqrt(np.mean(d * d)))


def group_sizes(words, limit: int) -> List[int]:
    sizes = []
    base = None
    for w in words:
        if base is not None and max(abs(x - y) for x, y in zip(w, base)) <= limit:
            sizes[-1] += 1
        else:
            base = w
            sizes.append(1)
    return sizes


def similar_word_ratio(blocks: Iterable[bytes], mode: CompressionMode, af: float) -> float:
    """Share of full words that sit in a relaxed group of two or more.

    Remainder bytes never count.
    """
    limit = diff_limit(af, mode.max_value)
    similar = total = 0
    for blk in blocks:
        words, _ = partition(blk, mode)
        for s in group_sizes(words, limit):
            total += s
            if s >= 2:
                similar += s
    if total == 0:
        return 0.0
    return similar / total


def bit_write_ratio(counters: Counters, baseline: str = "raw") -> float:
    """Scheme bit-writes over the uncompressed baseline on the same accesses."""
    if baseline == "raw":
        denom = counters.raw_bits
    elif baseline == "raw-fnw":
        denom = counters.raw_fnw_bits
    else:
        raise ValueError(f"baseline must be one of {BASELINE_MODES}")
    if denom == 0:
        raise UndefinedRatioError("baseline wrote no bits")
    return counters.total_bit_writes / denom


@dataclass
class EvaluationReport:
    rmse: float
    bit_write_ratio: float
    bit_write_ratio_fnw: float
    latency_units: int
    energy_units: int
    approximable_writes: int
    precise_writes: int
    breakdown: Dict[str, int] = field(default_factory=dict)
    mode_histogram: Dict[str, int] = field(default_factory=dict)

    @property
    def latency_ns(self) -> int:
        from .memsim import WRITE_LATENCY_NS
        return self.latency_units * WRITE_LATENCY_NS


def evaluate(counters: Counters, quality: float) -> EvaluationReport:
    """Summarize counters of a completed run.

    ``breakdown``: bits saved by precise compression, approximate compression
    and FNW, plus ``overhead`` for accesses that wrote more than the raw
    baseline. saved - overhead == raw data bits - (data + flip bits).
    """
    hist = {k: 0 for k in HIST_LABELS}
    for k, v in counters.modes.items():
        hist[k] = hist.get(k, 0) + v
    return EvaluationReport(
        rmse=quality,
        bit_write_ratio=bit_write_ratio(counters, "raw") if counters.raw_bits else 0.0,
        bit_write_ratio_fnw=bit_write_ratio(counters, "raw-fnw") if counters.raw_fnw_bits else 0.0,
        latency_units=counters.total_write_units,
        energy_units=counters.total_bit_writes,
        approximable_writes=counters.approximable_writes,
        precise_writes=counters.precise_writes,
        breakdown={
            "precise_compression": counters.saved_precise,
            "approximate_compression": counters.saved_approximate,
            "fnw": counters.saved_fnw,
            "overhead": counters.overhead,
        },
        mode_histogram=hist,
    )


# --- matched-quality search ------------------------------------------------

@dataclass
class SearchResult:
    af: float
    rmse: float
    matched: bool
    evaluations: int
    trail: list = field(default_factory=list)


def search_af(evaluate_rmse: Callable[[float], float], target: float = 0.03,
              tol: float = 0.002, lo: float = 0.0, hi: float = 0.5,
              max_iter: int = 24, floor_exp: int = -64) -> SearchResult:
    """Find ``af`` in ``[lo, hi]`` whose output RMSE is within ``tol`` of ``target``.

    RMSE is assumed non-decreasing in ``af``. Bisection runs on ``log2(af)``
    between ``hi * 2**floor_exp`` and ``hi``, which copes with codecs whose
    error grows by orders of magnitude near zero. If no probe lands inside
    the band, the largest probed ``af`` whose RMSE stays at or under
    ``target + tol`` is returned with ``matched=False``.
    """
    trail = []

    def probe(af):
        r = evaluate_rmse(af)
        trail.append((af, r))
        return r

    def done(af, r, matched):
        return SearchResult(af, r, matched, len(trail), trail)

    r_hi = probe(hi)
    if abs(r_hi - target) <= tol:
        return done(hi, r_hi, True)
    if r_hi < target:
        return done(hi, r_hi, False)
    low = max(lo, hi * 2.0 ** floor_exp)
    a, b = math.log2(low), math.log2(hi)
    for _ in range(max_iter):
        mid = (a + b) / 2
        af = 2.0 ** mid
        r = probe(af)
        if abs(r - target) <= tol:
            return done(af, r, True)
        if r < target:
            a = mid
        else:
            b = mid
    feasible = [(af, r) for af, r in trail if r <= target + tol]
    if not feasible:
        r0 = probe(lo)
        return done(lo, r0, abs(r0 - target) <= tol)
    af, r = max(feasible)
    return done(af, r, False)


# --- CSV -----------------------------------------------------------------

CSV_COLUMNS = (
    ["workload", "image", "scheme", "af", "rmse", "bit_write_ratio", "bit_write_ratio_fnw",
     "latency_units", "latency_ns", "energy_units", "approximable_writes", "precise_writes"]
    + ["mode_" + k for k in HIST_LABELS]
    + ["saved_precise_compression", "saved_approximate_compression", "saved_fnw",
       "overhead", "error"]
)


def report_row(workload: str, image: str, scheme: str, af: float,
               rep: Optional[EvaluationReport], error: str = "") -> Dict[str, object]:
    row: Dict[str, object] = {c: "" for c in CSV_COLUMNS}
    row.update(workload=workload, image=image, scheme=scheme, af=f"{af:.6g}", error=error)
    if rep is None:
        return row
    row.update(
        rmse=f"{rep.rmse:.6f}",
        bit_write_ratio=f"{rep.bit_write_ratio:.6f}",
        bit_write_ratio_fnw=f"{rep.bit_write_ratio_fnw:.6f}",
        latency_units=rep.latency_units,
        latency_ns=rep.latency_ns,
        energy_units=rep.energy_units,
        approximable_writes=rep.approximable_writes,
        precise_writes=rep.precise_writes,
        saved_precise_compression=rep.breakdown["precise_compression"],
        saved_approximate_compression=rep.breakdown["approximate_compression"],
        saved_fnw=rep.breakdown["fnw"],
        overhead=rep.breakdown["overhead"],
    )
    for k in HIST_LABELS:
        row["mode_" + k] = rep.mode_histogram.get(k, 0)
    return row


def write_csv(rows: Sequence[Dict[str, object]], out) -> None:
    w = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)


def csv_text(rows: Sequence[Dict[str, object]]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()
